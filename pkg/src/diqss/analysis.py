"""Round accounting against the CHSH/Svetlichny scheme and the tables behind
the ratio and key-rate figures."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import bitcore
from .noise import NoiseParams, Threshold, efficiency_threshold, key_rate_bound, qber_total

# Fraction of CHSH-scheme rounds whose basis choice feeds the key (A1 B1 C1 of 2*3*2).
CHSH_KEY_FRACTION = Fraction(1, 12)
# Half the rounds satisfy the promise; 9/16 of those have weight 0 mod 4 (n = 7).
PT_KEY_FRACTION = bitcore.ratio_closed_form_exact(7) / 2
ADVANTAGE_FACTOR = PT_KEY_FRACTION / CHSH_KEY_FRACTION  # 27/8

RATIO_SCAN_MAX_N = 16


@dataclass(frozen=True, slots=True)
class RoundBudget:
    total: int
    check_fraction: float

    def __post_init__(self) -> None:
        if self.total < 0:
            raise ValueError("round total must be non-negative")
        if not 0.0 <= self.check_fraction < 1.0:
            raise ValueError("check fraction must lie in [0, 1)")


def chsh_key_rounds(budget: RoundBudget) -> float:
    return float(CHSH_KEY_FRACTION) * (budget.total - budget.check_fraction * budget.total)


def pt_key_rounds(budget: RoundBudget) -> float:
    return float(PT_KEY_FRACTION) * (budget.total - budget.check_fraction * budget.total)


def advantage(alpha: float, beta: float) -> float:
    """Expected key rounds of this scheme over the CHSH scheme, same R."""
    if not 0.0 < alpha < 1.0 or not 0.0 < beta < 1.0:
        raise ValueError("alpha and beta must lie strictly between 0 and 1")
    return float(ADVANTAGE_FACTOR) * ((1.0 - beta) / (1.0 - alpha))


@dataclass(frozen=True, slots=True)
class RatioRow:
    n: int
    brute: Fraction
    closed: Fraction


def ratio_scan(n_min: int, n_max: int) -> list[RatioRow]:
    if not 1 <= n_min <= n_max <= RATIO_SCAN_MAX_N:
        raise ValueError(f"need 1 <= n_min <= n_max <= {RATIO_SCAN_MAX_N}")
    rows = []
    for n in range(n_min, n_max + 1):
        row = RatioRow(n, bitcore.count_valid_pairs(n).ratio, bitcore.ratio_closed_form_exact(n))
        if row.brute != row.closed:
            raise ArithmeticError(f"n={n}: enumeration {row.brute} != closed form {row.closed}")
        rows.append(row)
    return rows


def closed_form_maximum(n_min: int = 3, n_max: int = 64) -> tuple[Fraction, list[int]]:
    """Largest closed-form ratio on [n_min, n_max] and every n attaining it."""
    values = {n: bitcore.ratio_closed_form_exact(n) for n in range(n_min, n_max + 1)}
    best = max(values.values())
    return best, [n for n, v in values.items() if v == best]


@dataclass(frozen=True, slots=True)
class KeyRateRow:
    eta: float
    qber: float
    rate: float


@dataclass(frozen=True)
class KeyRateCurve:
    fidelity: float
    rows: list[KeyRateRow]
    bracket: tuple[float, float] | None  # consecutive grid points where r changes sign
    threshold: Threshold | None


def keyrate_curve(fidelity: float, eta_grid: Sequence[float]) -> KeyRateCurve:
    if any(not 0.0 <= eta <= 1.0 for eta in eta_grid):
        raise ValueError("efficiency grid values must lie in [0, 1]")
    rows = []
    for eta in eta_grid:
        params = NoiseParams(fidelity, eta)
        rows.append(KeyRateRow(eta, qber_total(params), key_rate_bound(params)))
    bracket = None
    for lo, hi in zip(rows, rows[1:]):
        if (lo.rate <= 0.0) != (hi.rate <= 0.0):
            bracket = (lo.eta, hi.eta)
            break
    try:
        threshold = efficiency_threshold(fidelity)
    except ValueError:
        threshold = None
    return KeyRateCurve(fidelity, rows, bracket, threshold)
