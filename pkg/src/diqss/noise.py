"""White noise plus photon loss on the seven-qubit resource, error rates and
the resulting key-rate bound."""
from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy import optimize

from .bitcore import BitString, THREE_PARTY, _block_masks, _key_ok
from .quantum import GhzLabel, OutcomeSampler, StateVector, apply_inputs, prepare_ghz
from .streams import RoundStream, check_seed, round_words

N_QUBITS = 7

# eta^7 F at which 1 - 2 h(1/2 - eta^7 F / 2) crosses zero, to two digits
PAPER_CRITICAL_PRODUCT = 0.78


@dataclass(frozen=True, slots=True)
class NoiseParams:
    fidelity: float = 1.0
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        for name in ("fidelity", "efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")

    @property
    def signal_weight(self) -> float:
        """eta^7 F: weight of the ideal branch."""
        return self.efficiency**N_QUBITS * self.fidelity


@dataclass(frozen=True, slots=True)
class Signal:
    label: GhzLabel
    kind = "signal"


@dataclass(frozen=True, slots=True)
class Loss:
    lost: frozenset[int]
    surviving_bit: int
    kind = "loss"

    def __post_init__(self) -> None:
        if not 1 <= len(self.lost) <= N_QUBITS - 1:
            raise ValueError("a loss branch loses between 1 and 6 qubits")
        if not self.lost <= set(range(N_QUBITS)):
            raise ValueError("lost qubit index out of range")
        if self.surviving_bit not in (0, 1):
            raise ValueError("surviving_bit must be 0 or 1")


@dataclass(frozen=True, slots=True)
class Vacuum:
    kind = "vacuum"


Branch = Signal | Loss | Vacuum

_IDEAL = Signal(GhzLabel.plus(N_QUBITS))
_LABELS = [Signal(lab) for lab in GhzLabel.all(N_QUBITS)]
_VACUUM = Vacuum()
_SUBSETS = {k: [frozenset(c) for c in combinations(range(N_QUBITS), k)] for k in range(1, N_QUBITS)}


def branch_probabilities(params: NoiseParams) -> list[float]:
    """[ideal, white noise, lose 1, ..., lose 6, vacuum]."""
    eta, fid = params.efficiency, params.fidelity
    eta_bar = 1.0 - eta
    full = eta**N_QUBITS
    probs = [full * fid, full * (1.0 - fid)]
    probs += [math.comb(N_QUBITS, k) * eta ** (N_QUBITS - k) * eta_bar**k for k in range(1, N_QUBITS)]
    probs.append(eta_bar**N_QUBITS)
    return probs


@lru_cache(maxsize=64)
def _branch_cdf(params: NoiseParams) -> tuple[float, ...]:
    cdf = np.cumsum(branch_probabilities(params))
    return tuple((cdf / cdf[-1]).tolist())


def sample_branch(params: NoiseParams, rng) -> Branch:
    cdf = _branch_cdf(params)
    slot = min(bisect.bisect_right(cdf, rng.random()), len(cdf) - 1)
    if slot == 0:
        return _IDEAL
    if slot == 1:
        return _LABELS[rng.integers(len(_LABELS))]
    if slot == N_QUBITS + 1:
        return _VACUUM
    subsets = _SUBSETS[slot - 1]
    return Loss(subsets[rng.integers(len(subsets))], rng.integers(2))


@lru_cache(maxsize=None)
def _signal_sampler(label_index: int, x: int) -> OutcomeSampler:
    label = _LABELS[label_index].label
    return OutcomeSampler(apply_inputs(prepare_ghz(label), BitString.from_int(x, N_QUBITS)))


@lru_cache(maxsize=None)
def _loss_sampler(lost: frozenset[int], b: int, x: int) -> tuple[OutcomeSampler, tuple[int, ...]]:
    survivors = tuple(q for q in range(N_QUBITS) if q not in lost)
    m = len(survivors)
    start = StateVector.basis_state(BitString((b,) * m))
    x_bits = BitString.from_int(x, N_QUBITS)
    x_surv = BitString(tuple(x_bits[q] for q in survivors))
    return OutcomeSampler(apply_inputs(start, x_surv)), survivors


def _output_int(branch: Branch, x: int, rng) -> int:
    if isinstance(branch, Signal):
        return _signal_sampler(branch.label.index, x).draw(rng)
    if isinstance(branch, Vacuum):
        return rng.integers(1 << N_QUBITS)
    sampler, survivors = _loss_sampler(branch.lost, branch.surviving_bit, x)
    measured = sampler.draw(rng)
    m = len(survivors)
    y = 0
    for pos, q in enumerate(survivors):
        if (measured >> (m - 1 - pos)) & 1:
            y |= 1 << (N_QUBITS - 1 - q)
    # no-click positions carry an independent fair bit each
    lost = sorted(branch.lost)
    filler = rng.integers(1 << len(lost))
    for pos, q in enumerate(lost):
        if (filler >> (len(lost) - 1 - pos)) & 1:
            y |= 1 << (N_QUBITS - 1 - q)
    return y


def round_output(branch: Branch, x: BitString, rng) -> BitString:
    if len(x) != N_QUBITS:
        raise ValueError(f"round inputs have {N_QUBITS} bits")
    if sum(x.bits) % 2:
        raise ValueError(f"input {x} violates the even-weight promise")
    return BitString.from_int(_output_int(branch, x.to_int(), rng), N_QUBITS)


def qber_decoherence(params: NoiseParams) -> float:
    return (1.0 - params.fidelity) / 2.0 * params.efficiency**N_QUBITS


def qber_loss(params: NoiseParams) -> float:
    return 0.5 * (1.0 - params.efficiency**N_QUBITS)


def qber_total(params: NoiseParams) -> float:
    return 0.5 - params.signal_weight / 2.0


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def key_rate_bound(params: NoiseParams) -> float:
    """1 - 2 h(Q); negative values mean no secure key."""
    return 1.0 - 2.0 * binary_entropy(qber_total(params))


@dataclass(frozen=True, slots=True)
class Threshold:
    fidelity: float
    efficiency: float  # numeric root of the key-rate bound
    approximation: float  # (0.78 / F)^(1/7)


def efficiency_threshold(fidelity: float) -> Threshold:
    """Smallest detection efficiency with a non-negative key-rate bound."""
    if not 0.0 < fidelity <= 1.0:
        raise ValueError("fidelity must lie in (0, 1]")

    def rate(eta: float) -> float:
        return key_rate_bound(NoiseParams(fidelity, eta))

    if rate(1.0) <= 0.0:
        raise ValueError(f"no positive key rate for F = {fidelity}: threshold does not exist")
    root = optimize.bisect(rate, 0.0, 1.0, xtol=1e-9)
    return Threshold(fidelity, root, (PAPER_CRITICAL_PRODUCT / fidelity) ** (1.0 / N_QUBITS))


# Monte Carlo estimate of the key error rate on key-compatible inputs

KEY_INPUTS = tuple(x for x in range(1 << N_QUBITS) if x.bit_count() % 4 == 0)
_KEY_MASKS = _block_masks(THREE_PARTY)


@dataclass(frozen=True, slots=True)
class ErrorEstimate:
    rounds: int
    errors: int
    seed: int

    @property
    def rate(self) -> float:
        return self.errors / self.rounds

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.rounds)


def _count_errors(args: tuple[NoiseParams, int, int, int]) -> int:
    params, seed, start, stop = args
    errors = 0
    chunk = 1 << 16
    for lo in range(start, stop, chunk):
        hi = min(lo + chunk, stop)
        for words in round_words(seed, lo, hi - lo):
            rng = RoundStream(words)
            x = KEY_INPUTS[rng.integers(len(KEY_INPUTS))]
            y = _output_int(sample_branch(params, rng), x, rng)
            errors += not _key_ok(y, _KEY_MASKS)
    return errors


def _split(rounds: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, rounds, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def estimate_key_error_rate(params: NoiseParams, rounds: int, seed: int = 0, workers: int = 1) -> ErrorEstimate:
    """Fraction of rounds violating K_A = K_B xor K_C.

    Inputs are uniform over the 36 seven-bit words of weight 0 or 4. The count
    depends only on (params, rounds, seed), never on ``workers``.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    check_seed(seed)
    jobs = [(params, seed, a, b) for a, b in _split(rounds, max(1, workers))]
    if workers <= 1:
        errors = sum(map(_count_errors, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(_count_errors, jobs))
    return ErrorEstimate(rounds, errors, seed)
