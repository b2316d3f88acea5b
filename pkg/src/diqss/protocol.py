"""Round-by-round simulation of the seven-qubit secret sharing protocol:
inputs, device outputs, sifting, testing, abort decision and key extraction."""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .bitcore import THREE_PARTY, BitString, Partition, _block_masks, _wins
from .noise import (
    _LABELS,
    _VACUUM,
    N_QUBITS,
    Branch,
    Loss,
    NoiseParams,
    Signal,
    Vacuum,
    _output_int,
    sample_branch,
)
from .streams import RoundStream, check_seed, round_words

_CHUNK = 1 << 16


class ProtocolAbort(Exception):
    """A run cannot produce a key; ``reason`` is a short machine-readable code."""

    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class ProtocolConfig:
    rounds: int = 100_000
    test_fraction: float = 0.2
    abort_threshold: float = 0.02
    partition: Partition = THREE_PARTY
    noise: NoiseParams = field(default_factory=NoiseParams)
    master_seed: int = 42

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        if not 0.0 <= self.abort_threshold <= 1.0:
            raise ValueError("abort_threshold must lie in [0, 1]")
        p = self.partition
        if p.n != N_QUBITS or p.sizes[0] != 1 or len(p.sizes) != 3:
            raise ValueError(f"partition must be (1, j, 6-j), got {p.sizes}")
        check_seed(self.master_seed)


@dataclass(frozen=True, slots=True)
class RoundRecord:
    index: int
    x: BitString
    y: BitString
    branch: Branch
    sifted: bool
    in_test_set: bool
    won: bool


@dataclass(frozen=True)
class KeyShares:
    k_a: tuple[int, ...]
    k_b: tuple[int, ...]
    k_c: tuple[int, ...]

    def __post_init__(self) -> None:
        if not len(self.k_a) == len(self.k_b) == len(self.k_c):
            raise ValueError("key shares must have equal length")

    def __len__(self) -> int:
        return len(self.k_a)

    def mismatches(self) -> int:
        return sum(a != (b ^ c) for a, b, c in zip(self.k_a, self.k_b, self.k_c))


@dataclass(frozen=True)
class SimulationReport:
    rounds_total: int
    rounds_sifted: int
    rounds_tested: int
    empirical_win_rate: float | None
    aborted: bool
    abort_reason: str | None
    key: KeyShares | None
    key_error_rate: float | None
    seed_echo: int
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if self.key is not None:
            out["key"] = {
                name: "".join(map(str, getattr(self.key, name))) for name in ("k_a", "k_b", "k_c")
            }
        return out


def config_summary(config: ProtocolConfig) -> dict[str, Any]:
    return {
        "rounds": config.rounds,
        "gamma": config.test_fraction,
        "abort_threshold": config.abort_threshold,
        "fidelity": config.noise.fidelity,
        "efficiency": config.noise.efficiency,
        "seed": config.master_seed,
        "partition": list(config.partition.sizes),
    }


# --- branch codes: compact per-round storage for bulk runs -----------------
# 0..127 signal label index, 256 + (lost mask << 1 | bit) loss, 1024 vacuum

_VACUUM_CODE = 1024


def encode_branch(branch: Branch) -> int:
    if isinstance(branch, Signal):
        return branch.label.index
    if isinstance(branch, Vacuum):
        return _VACUUM_CODE
    mask = sum(1 << q for q in branch.lost)
    return 256 + (mask << 1 | branch.surviving_bit)


def decode_branch(code: int) -> Branch:
    if code < 256:
        return _LABELS[code]
    if code == _VACUUM_CODE:
        return _VACUUM
    mask, bit = (code - 256) >> 1, (code - 256) & 1
    return Loss(frozenset(q for q in range(N_QUBITS) if mask >> q & 1), bit)


def describe_branch(branch: Branch) -> str:
    if isinstance(branch, Signal):
        return f"signal:{branch.label}"
    if isinstance(branch, Vacuum):
        return "vacuum"
    return f"loss:{''.join(map(str, sorted(branch.lost)))}:{branch.surviving_bit}"


# --- single round ---------------------------------------------------------

def generate_inputs(rng) -> BitString:
    """Seven independent fair input bits: x1 | x2 x3 x4 | x5 x6 x7."""
    return BitString.from_int(int(rng.integers(1 << N_QUBITS)), N_QUBITS)


def _play(noise: NoiseParams, rng) -> tuple[int, Branch, int]:
    x = int(rng.integers(1 << N_QUBITS))
    branch = sample_branch(noise, rng)
    return x, branch, int(_output_int(branch, x, rng))


def _won(x: int, y: int) -> bool:
    return x.bit_count() % 2 == 0 and _wins(x, y)


def run_round(config: ProtocolConfig, index: int) -> RoundRecord:
    if not 0 <= index < config.rounds:
        raise IndexError(f"round {index} outside 0..{config.rounds - 1}")
    rng = RoundStream.for_round(config.master_seed, index)
    x, branch, y = _play(config.noise, rng)
    return RoundRecord(
        index=index,
        x=BitString.from_int(x, N_QUBITS),
        y=BitString.from_int(y, N_QUBITS),
        branch=branch,
        sifted=x.bit_count() % 4 == 0,
        in_test_set=False,
        won=_won(x, y),
    )


# --- bulk rounds ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RoundTable:
    """Column storage for many rounds, in index order."""

    x: np.ndarray
    y: np.ndarray
    branch: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    @property
    def sifted(self) -> np.ndarray:
        return np.bitwise_count(self.x) % 4 == 0

    @property
    def won(self) -> np.ndarray:
        wx = np.bitwise_count(self.x).astype(np.int64)
        wy = np.bitwise_count(self.y).astype(np.int64)
        return (wx % 2 == 0) & (wy % 2 == (wx // 2) % 2)

    def record(self, i: int, in_test_set: bool = False) -> RoundRecord:
        x, y = int(self.x[i]), int(self.y[i])
        return RoundRecord(
            index=i,
            x=BitString.from_int(x, N_QUBITS),
            y=BitString.from_int(y, N_QUBITS),
            branch=decode_branch(int(self.branch[i])),
            sifted=x.bit_count() % 4 == 0,
            in_test_set=in_test_set,
            won=_won(x, y),
        )


def _simulate_span(args: tuple[NoiseParams, int, int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    noise, seed, start, stop = args
    count = stop - start
    xs = np.empty(count, dtype=np.uint8)
    ys = np.empty(count, dtype=np.uint8)
    codes = np.empty(count, dtype=np.int16)
    i = 0
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        for words in round_words(seed, lo, hi - lo):
            x, branch, y = _play(noise, RoundStream(words))
            xs[i], ys[i], codes[i] = x, y, encode_branch(branch)
            i += 1
    return xs, ys, codes


def simulate_rounds(config: ProtocolConfig, workers: int = 1) -> RoundTable:
    """All rounds of a run. Identical output for any ``workers`` value."""
    edges = np.linspace(0, config.rounds, max(1, workers) + 1).astype(int)
    jobs = [(config.noise, config.master_seed, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers <= 1:
        parts = list(map(_simulate_span, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_span, jobs))
    return RoundTable(*(np.concatenate(cols) for cols in zip(*parts)))


# --- sifting, testing, key extraction -------------------------------------

def tested_count(sifted: int, gamma: float) -> int:
    # round() strips representation noise such as 0.29 * 100 = 28.999999999999996
    return math.floor(round(gamma * sifted, 9))


def selection_rng(seed: int) -> np.random.Generator:
    """Stream for the test-subset choice, separate from all round streams."""
    return np.random.default_rng([check_seed(seed), 0x7E57])


def _choose_test(sifted: int, gamma: float, rng) -> np.ndarray:
    m = tested_count(sifted, gamma)
    return np.sort(rng.choice(sifted, size=m, replace=False))


def sift_and_test(
    records: Sequence[RoundRecord], gamma: float, rng
) -> tuple[list[RoundRecord], list[RoundRecord]]:
    """Split the sifted rounds into (test set, key set), keeping round order."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly between 0 and 1")
    kept = [r for r in records if r.sifted]
    if not kept:
        raise ProtocolAbort("no_sifted_rounds")
    chosen = set(_choose_test(len(kept), gamma, rng).tolist())
    test = [replace(r, in_test_set=True) for i, r in enumerate(kept) if i in chosen]
    key = [r for i, r in enumerate(kept) if i not in chosen]
    return test, key


def win_rate(test_set: Sequence[RoundRecord]) -> float | None:
    if not test_set:
        return None
    return sum(r.won for r in test_set) / len(test_set)


def _abort(rate: float | None, eps_abort: float) -> bool:
    if rate is None:
        return eps_abort < 1.0
    return rate < 1.0 - eps_abort


def decide_abort(test_set: Sequence[RoundRecord], eps_abort: float) -> bool:
    """Abort when the observed win rate falls below 1 - eps_abort."""
    return _abort(win_rate(test_set), eps_abort)


def _key_bits(ys: np.ndarray, partition: Partition) -> tuple[np.ndarray, ...]:
    shares = []
    for mask in _block_masks(partition):
        shares.append((np.bitwise_count(ys & np.uint8(mask)) & 1).astype(np.uint8))
    return tuple(shares)


def extract_keys(key_set: Sequence[RoundRecord], partition: Partition = THREE_PARTY) -> KeyShares:
    if not key_set:
        raise ProtocolAbort("empty_key_set")
    if partition.n != N_QUBITS or len(partition.sizes) != 3 or partition.sizes[0] != 1:
        raise ValueError(f"key extraction needs a (1, j, 6-j) partition, got {partition.sizes}")
    ys = np.array([r.y.to_int() for r in key_set], dtype=np.uint8)
    k_a, k_b, k_c = _key_bits(ys, partition)
    return KeyShares(tuple(k_a.tolist()), tuple(k_b.tolist()), tuple(k_c.tolist()))


# --- whole run ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProtocolRun:
    report: SimulationReport
    table: RoundTable
    test_mask: np.ndarray  # True for rounds in the test set

    def records(self):
        for i in range(len(self.table)):
            yield self.table.record(i, bool(self.test_mask[i]))


def execute(config: ProtocolConfig, workers: int = 1) -> ProtocolRun:
    table = simulate_rounds(config, workers)
    sifted_idx = np.flatnonzero(table.sifted)
    test_mask = np.zeros(len(table), dtype=bool)
    common = dict(rounds_total=config.rounds, seed_echo=config.master_seed, config=config_summary(config))

    if len(sifted_idx) == 0:
        report = SimulationReport(
            rounds_sifted=0, rounds_tested=0, empirical_win_rate=None, aborted=True,
            abort_reason="no_sifted_rounds", key=None, key_error_rate=None, **common,
        )
        return ProtocolRun(report, table, test_mask)

    chosen = _choose_test(len(sifted_idx), config.test_fraction, selection_rng(config.master_seed))
    test_mask[sifted_idx[chosen]] = True
    key_idx = sifted_idx[~np.isin(np.arange(len(sifted_idx)), chosen)]

    won = table.won
    rate = float(won[test_mask].mean()) if len(chosen) else None
    aborted = _abort(rate, config.abort_threshold)
    reason = None
    if aborted:
        reason = "empty_test_set" if rate is None else "win_rate_below_threshold"
    elif len(key_idx) == 0:
        aborted, reason = True, "empty_key_set"

    key_error_rate = None
    key = None
    if len(key_idx):
        k_a, k_b, k_c = _key_bits(table.y[key_idx], config.partition)
        key_error_rate = float(np.mean(k_a != (k_b ^ k_c)))
        if not aborted:
            key = KeyShares(tuple(k_a.tolist()), tuple(k_b.tolist()), tuple(k_c.tolist()))

    report = SimulationReport(
        rounds_sifted=len(sifted_idx),
        rounds_tested=len(chosen),
        empirical_win_rate=rate,
        aborted=aborted,
        abort_reason=reason,
        key=key,
        key_error_rate=key_error_rate,
        **common,
    )
    return ProtocolRun(report, table, test_mask)


def run_protocol(config: ProtocolConfig, workers: int = 1) -> SimulationReport:
    return execute(config, workers).report


# --- finite-sample correctness --------------------------------------------

@dataclass(frozen=True, slots=True)
class CorrectnessBound:
    x: float
    epsilon_floor: float
    matches: int  # (1 - nu) R_l rounded to the nearest integer
    mismatches: int


def correctness_bound(rounds: int, nu: float, p_match: float) -> CorrectnessBound:
    """Binomial probability of exactly (1-nu)R_l matching rounds, and 1 minus it."""
    if rounds < 1:
        raise ValueError("rounds must be positive")
    if not 0.0 <= nu <= 1.0 or not 0.0 <= p_match <= 1.0:
        raise ValueError("nu and p_match must lie in [0, 1]")
    matches = int(round((1.0 - nu) * rounds))
    mismatches = rounds - matches

    def term(count: int, p: float) -> float:
        if count == 0:
            return 0.0
        return -math.inf if p == 0.0 else count * math.log(p)

    log_x = (
        math.lgamma(rounds + 1) - math.lgamma(matches + 1) - math.lgamma(mismatches + 1)
        + term(matches, p_match) + term(mismatches, 1.0 - p_match)
    )
    x = math.exp(log_x) if log_x > -math.inf else 0.0
    return CorrectnessBound(x, 1.0 - x, matches, mismatches)


# --- information checks ---------------------------------------------------

def empirical_conditional_entropy(target: Sequence[int], *given: Sequence[int]) -> float:
    """Plug-in estimate of H(target | given...) in bits."""
    n = len(target)
    if n == 0:
        raise ValueError("no samples")
    joint = Counter(zip(*given, target)) if given else Counter((t,) for t in target)
    cond = Counter(zip(*given)) if given else Counter({(): n})
    h = 0.0
    for key, count in joint.items():
        h -= count / n * math.log2(count / cond[key[:-1]])
    return h
