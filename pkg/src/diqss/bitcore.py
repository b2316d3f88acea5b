"""Bit-level logic of the n-party parity game.

Bit strings are read left to right: position 0 is player 1. When a string is
packed into an integer, position 0 is the most significant bit, so ``"0001111"``
is ``0b0001111`` and matches the computational-basis ket ``|0001111>``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BitString",
    "Partition",
    "PairCount",
    "ClassicalBound",
    "THREE_PARTY",
    "weight",
    "parity",
    "valid_input",
    "wins_game",
    "key_condition",
    "key_equivalence_counterexample",
    "theorem1_equivalence",
    "count_valid_pairs",
    "ratio_closed_form",
    "ratio_closed_form_exact",
    "classical_optimum",
    "classical_bound_report",
    "iter_bitstrings",
    "partition_parity_table",
]


@dataclass(frozen=True, slots=True)
class BitString:
    """Fixed-length word over {0, 1}."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.bits:
            raise ValueError("bit string must have positive length")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be 0 or 1, got {self.bits!r}")

    @classmethod
    def parse(cls, text: str) -> BitString:
        """Parse ``"1 000 001"``-style text; spaces are ignored."""
        cleaned = text.replace(" ", "").replace("_", "")
        if not cleaned or set(cleaned) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(c) for c in cleaned))

    @classmethod
    def from_int(cls, value: int, n: int) -> BitString:
        if n < 1 or not 0 <= value < (1 << n):
            raise ValueError(f"{value} does not fit in {n} bits")
        return cls(tuple((value >> (n - 1 - i)) & 1 for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.bits)

    def to_int(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True, slots=True)
class Partition:
    """Ordered block sizes; block 0 belongs to the dealer."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValueError(f"partition blocks must be positive, got {self.sizes!r}")

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def blocks(self) -> list[range]:
        out, start = [], 0
        for s in self.sizes:
            out.append(range(start, start + s))
            start += s
        return out


THREE_PARTY = Partition((1, 3, 3))


@dataclass(frozen=True, slots=True)
class PairCount:
    pair_count: int
    ratio: Fraction


@dataclass(frozen=True, slots=True)
class ClassicalBound:
    n: int
    optimum: Fraction
    floor_formula: Fraction
    ceil_formula: Fraction

    @property
    def floor_formula_consistent(self) -> bool:
        return self.optimum == self.floor_formula


def iter_bitstrings(n: int) -> Iterator[BitString]:
    for value in range(1 << n):
        yield BitString.from_int(value, n)


def weight(x: BitString) -> int:
    return sum(x.bits)


def parity(x: BitString) -> int:
    return weight(x) & 1


def valid_input(x: BitString) -> bool:
    """The game promise: an even number of ones."""
    return weight(x) % 2 == 0


def wins_game(x: BitString, y: BitString) -> bool:
    if len(x) != len(y):
        raise ValueError(f"input and output lengths differ ({len(x)} vs {len(y)})")
    if not valid_input(x):
        raise ValueError(f"input {x} violates the even-weight promise")
    return _wins(x.to_int(), y.to_int())


def key_condition(y: BitString, p: Partition = THREE_PARTY) -> bool:
    """Dealer block parity equals the XOR of every other block's parity."""
    if p.n != len(y):
        raise ValueError(f"partition {p.sizes} does not cover {len(y)} bits")
    if p.sizes[0] != 1:
        raise ValueError("first partition block must be the single dealer bit")
    blocks = [sum(y.bits[i] for i in block) & 1 for block in p.blocks()]
    rest = 0
    for b in blocks[1:]:
        rest ^= b
    return blocks[0] == rest


# Integer fast paths used by the exhaustive scans. They implement the same
# predicates as above on packed words.

def _wins(x: int, y: int) -> bool:
    return (y.bit_count() & 1) == ((x.bit_count() // 2) & 1)


def _block_masks(p: Partition) -> list[int]:
    n = p.n
    masks = []
    for block in p.blocks():
        m = 0
        for i in block:
            m |= 1 << (n - 1 - i)
        masks.append(m)
    return masks


def _key_ok(y: int, masks: Sequence[int]) -> bool:
    acc = 0
    for m in masks[1:]:
        acc ^= (y & m).bit_count() & 1
    return ((y & masks[0]).bit_count() & 1) == acc


def _dealer_partitions(n: int) -> list[Partition]:
    """A representative family of dealer-first partitions for the scans."""
    candidates = {(1, n - 1), tuple([1] * n)}
    if n >= 3:
        rest = n - 1
        half = rest // 2
        candidates.add((1, half, rest - half))
    return [Partition(c) for c in sorted(candidates) if all(s >= 1 for s in c)]


def key_equivalence_counterexample(n: int) -> tuple[BitString, BitString, Partition] | None:
    """First winning pair where mod-4 weight and even-parity/key output disagree.

    For every even-weight x and every winning y, the input weight is a multiple
    of four exactly when y has even parity and meets the key condition for each
    tested dealer-first partition.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    partitions = _dealer_partitions(n)
    masks = [_block_masks(p) for p in partitions]
    for x in range(1 << n):
        wx = x.bit_count()
        if wx & 1:
            continue
        lhs = wx % 4 == 0
        for y in range(1 << n):
            if not _wins(x, y):
                continue
            even = (y.bit_count() & 1) == 0
            for p, m in zip(partitions, masks):
                if lhs != (even and _key_ok(y, m)):
                    return BitString.from_int(x, n), BitString.from_int(y, n), p
    return None


def theorem1_equivalence(n: int) -> bool:
    return key_equivalence_counterexample(n) is None


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values).astype(np.int64) & 1


def count_valid_pairs(n: int) -> PairCount:
    """Enumerate (x, y) with wt(x) = 0 mod 4 and y meeting the parity rule.

    Every x and every y of length n is visited once; the Kronecker-delta double
    sum is folded through a histogram of output residues.
    """
    if n < 1:
        raise ValueError("n must be positive")
    words = np.arange(1 << n, dtype=np.uint64)
    wt = np.bitwise_count(words).astype(np.int64)
    res_x = (wt[wt % 4 == 0] // 2) % 2
    res_y = _popcount_parity(words)
    hist = np.bincount(res_y, minlength=2)
    pair_count = int(hist[res_x].sum())
    return PairCount(pair_count, Fraction(pair_count, 1 << (2 * (n - 1))))


_COS_QUARTER = {0: 1, 1: 1, 2: 0, 3: -1, 4: -1, 5: -1, 6: 0, 7: 1}


def ratio_closed_form_exact(n: int) -> Fraction:
    """1/2 + 2^(-n/2) cos(n pi / 4) as an exact rational.

    For odd n, cos(n pi/4) = +-sqrt(2)/2 and the product collapses to
    +-2^(-(n+1)/2); for even n the cosine is 0 or +-1.
    """
    if n < 1:
        raise ValueError("n must be positive")
    sign = _COS_QUARTER[n % 8]
    if sign == 0:
        return Fraction(1, 2)
    exponent = (n + 1) // 2 if n % 2 else n // 2
    return Fraction(1, 2) + Fraction(sign, 1 << exponent)


def ratio_closed_form(n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return 0.5 + 2.0 ** (-n / 2) * math.cos(n * math.pi / 4)


def classical_optimum(n: int) -> Fraction:
    """Best deterministic local strategy, uniform over promise inputs.

    Each player answers y_j = a_j XOR (b_j AND x_j); all 4^n tuples (a, b) are
    scored against every even-weight input.
    """
    if not 2 <= n <= 7:
        raise ValueError("classical_optimum supports 2 <= n <= 7")
    words = np.arange(1 << n, dtype=np.uint64)
    xs = words[np.bitwise_count(words) % 2 == 0]
    target = (np.bitwise_count(xs).astype(np.int64) // 2) % 2
    a_par = _popcount_parity(words)
    # bx[b, x] = parity(b & x)
    bx = _popcount_parity(words[:, None] & xs[None, :])
    # y parity = parity(a) XOR parity(b & x) for strategy (a, b)
    wins = (a_par[:, None, None] ^ bx[None, :, :]) == target[None, None, :]
    best = int(wins.sum(axis=2).max())
    return Fraction(best, len(xs))


def classical_bound_report(n: int) -> ClassicalBound:
    return ClassicalBound(
        n=n,
        optimum=classical_optimum(n),
        floor_formula=Fraction(1, 2) + Fraction(1, 1 << (n // 2)),
        ceil_formula=Fraction(1, 2) + Fraction(1, 1 << ((n + 1) // 2)),
    )


def partition_parity_table(
    y_values: Iterable[BitString] | None = None, p: Partition = THREE_PARTY
) -> list[tuple[int, tuple[int, ...], bool]]:
    """Rows of (total weight, per-block weights, key condition) for even outputs.

    Distinct block-weight patterns only, sorted by descending total weight.
    """
    if y_values is None:
        y_values = (y for y in iter_bitstrings(p.n) if parity(y) == 0)
    rows = set()
    for y in y_values:
        block_wt = tuple(sum(y.bits[i] for i in block) for block in p.blocks())
        rows.add((sum(block_wt), block_wt, key_condition(y, p)))
    return sorted(rows, key=lambda r: (-r[0], r[1]))


def _all_dealer_partitions(n: int) -> Iterator[Partition]:
    """Every composition of n whose first block has size 1."""
    rest = n - 1
    for cuts in itertools.product((0, 1), repeat=max(rest - 1, 0)):
        sizes, run = [1], 1
        for c in cuts:
            if c:
                sizes.append(run)
                run = 1
            else:
                run += 1
        sizes.append(run)
        yield Partition(tuple(sizes))
