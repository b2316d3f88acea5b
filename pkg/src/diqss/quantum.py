"""Dense statevector simulation of the parity-game circuit.

Qubit 0 is the leftmost tensor factor, so basis index ``b`` corresponds to the
bit string ``BitString.from_int(b, n)``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .bitcore import BitString

MAX_QUBITS = 12
TOL = 1e-12

_SQRT1_2 = 1 / np.sqrt(2)
_I_POWERS = np.array([1, 1j, -1, -1j], dtype=complex)


def _basis(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.uint64)


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    n: int = field(init=False)

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        size = amps.shape[0] if amps.ndim == 1 else 0
        if size < 2 or size & (size - 1):
            raise ValueError("amplitude vector length must be a power of two >= 2")
        n = size.bit_length() - 1
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1) > TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n", n)

    @classmethod
    def basis_state(cls, bits: BitString) -> StateVector:
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[bits.to_int()] = 1
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, y: BitString) -> complex:
        return complex(self.amplitudes[y.to_int()])


@dataclass(frozen=True, slots=True)
class GhzLabel:
    """|GHZ> = (|base> + sign |complement of base>) / sqrt 2, base[0] == 0."""

    base: BitString
    sign: int = 1

    def __post_init__(self) -> None:
        if self.base[0] != 0:
            raise ValueError("canonical GHZ base must start with 0")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if len(self.base) > MAX_QUBITS:
            raise ValueError(f"{len(self.base)} qubits exceeds the {MAX_QUBITS}-qubit cap")

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def index(self) -> int:
        """Dense index in [0, 2^n): base value times two, plus one for minus."""
        return (self.base.to_int() << 1) | (self.sign < 0)

    @classmethod
    def from_index(cls, index: int, n: int) -> GhzLabel:
        return cls(BitString.from_int(index >> 1, n), -1 if index & 1 else 1)

    @classmethod
    def plus(cls, n: int) -> GhzLabel:
        return cls(BitString((0,) * n), 1)

    @classmethod
    def all(cls, n: int) -> list[GhzLabel]:
        return [cls.from_index(i, n) for i in range(1 << n)]

    def __str__(self) -> str:
        return f"GHZ[{self.base}{'+' if self.sign > 0 else '-'}]"


def prepare_ghz(label: GhzLabel) -> StateVector:
    n = label.n
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
    a = label.base.to_int()
    amps = np.zeros(1 << n, dtype=complex)
    amps[a] = _SQRT1_2
    amps[a ^ ((1 << n) - 1)] = label.sign * _SQRT1_2
    return StateVector(amps)


def hadamard_all(amps: np.ndarray, n: int) -> np.ndarray:
    """H on every qubit (unnormalised Walsh-Hadamard butterfly, then scale)."""
    out = np.asarray(amps, dtype=complex).copy()
    for q in range(n):
        view = out.reshape(1 << q, 2, 1 << (n - q - 1))
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = a0 + a1
        view[:, 1, :] = a0 - a1
    return out * (2.0 ** (-n / 2))


def apply_inputs(state: StateVector, x: BitString, *, conditional_phase: bool = True) -> StateVector:
    """S^(x_j) on each qubit j, then H on all qubits.

    With ``conditional_phase=False`` S is applied to every qubit regardless of
    the input; that variant exists only as a negative control.
    """
    if len(x) != state.n:
        raise ValueError(f"input length {len(x)} does not match {state.n} qubits")
    n = state.n
    mask = x.to_int() if conditional_phase else (1 << n) - 1
    powers = np.bitwise_count(_basis(n) & np.uint64(mask)).astype(np.int64) % 4
    phased = state.amplitudes * _I_POWERS[powers]
    return StateVector(hadamard_all(phased, n))


def _support(state: StateVector, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    amps = state.amplitudes
    idx = np.flatnonzero(np.abs(amps) > tol)
    probs = np.abs(amps[idx]) ** 2
    return idx, probs


def support(state: StateVector, tol: float = TOL) -> list[BitString]:
    idx, _ = _support(state, tol)
    return [BitString.from_int(int(i), state.n) for i in idx]


def output_distribution(state: StateVector) -> dict[BitString, float]:
    """Computational-basis measurement statistics.

    Amplitudes with modulus at or below 1e-12 are treated as exact zeros.
    """
    idx, probs = _support(state)
    return {BitString.from_int(int(i), state.n): float(p) for i, p in zip(idx, probs)}


class OutcomeSampler:
    """Inverse-CDF sampler over a state's measurement support."""

    __slots__ = ("outcomes", "cdf", "n")

    def __init__(self, state: StateVector) -> None:
        idx, probs = _support(state)
        self.n = state.n
        self.outcomes = [int(i) for i in idx]
        cdf = np.cumsum(probs)
        self.cdf = (cdf / cdf[-1]).tolist()
        self.cdf[-1] = 1.0

    def draw(self, rng) -> int:
        i = bisect.bisect_right(self.cdf, rng.random())
        return self.outcomes[min(i, len(self.outcomes) - 1)]


def sample_output(state: StateVector, rng) -> BitString:
    """One full n-bit measurement outcome; ``rng`` needs a ``random()`` method."""
    return BitString.from_int(OutcomeSampler(state).draw(rng), state.n)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    k: int = field(init=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density operator must be a square matrix")
        size = m.shape[0]
        if size < 1 or size & (size - 1):
            raise ValueError("dimension must be a power of two")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "k", size.bit_length() - 1)

    @classmethod
    def from_state(cls, state: StateVector) -> DensityOperator:
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()))

    def is_physical(self, tol: float = TOL) -> bool:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            return False
        if abs(np.trace(m) - 1) > tol:
            return False
        return bool(np.linalg.eigvalsh(m).min() >= -tol)


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """Trace out every qubit not in ``keep``; kept qubits stay in ascending order."""
    keep = sorted(set(keep))
    k = rho.k
    if not keep:
        raise ValueError("keep set must not be empty")
    if keep[0] < 0 or keep[-1] >= k:
        raise ValueError(f"qubit indices must lie in 0..{k - 1}")
    drop = [q for q in range(k) if q not in keep]
    tensor = rho.matrix.reshape([2] * (2 * k))
    order = keep + drop + [k + q for q in keep] + [k + q for q in drop]
    dk, dd = 1 << len(keep), 1 << len(drop)
    tensor = tensor.transpose(order).reshape(dk, dd, dk, dd)
    return DensityOperator(np.trace(tensor, axis1=1, axis2=3))


def frobenius_distance(a: DensityOperator, b: DensityOperator) -> float:
    if a.k != b.k:
        raise ValueError("operators act on different numbers of qubits")
    return float(np.linalg.norm(a.matrix - b.matrix))


@dataclass(frozen=True, slots=True)
class ReducedViews:
    j: int
    bob_qubits: int
    charlie_qubits: int
    distance: float | None  # None when the dimensions differ

    @property
    def equal(self) -> bool:
        return self.distance is not None and self.distance < TOL


def reduced_views(j: int, n: int = 7) -> ReducedViews:
    """Compare the reduced states of the two share holders for (1, j, n-1-j)."""
    if not 1 <= j <= n - 2:
        raise ValueError(f"j must lie in 1..{n - 2}")
    rho = DensityOperator.from_state(prepare_ghz(GhzLabel.plus(n)))
    bob = partial_trace(rho, range(1, j + 1))
    charlie = partial_trace(rho, range(j + 1, n))
    dist = frobenius_distance(bob, charlie) if bob.k == charlie.k else None
    return ReducedViews(j, bob.k, charlie.k, dist)


def reduced_views_equal(j: int) -> bool:
    return reduced_views(j).equal


def parity_probabilities(state: StateVector) -> tuple[float, float]:
    """(even, odd) output parity probabilities."""
    probs = np.abs(state.amplitudes) ** 2
    odd = np.bitwise_count(_basis(state.n)) % 2 == 1
    p_odd = float(probs[odd].sum())
    return 1 - p_odd, p_odd


def mixture_odd_probability(x: BitString) -> float:
    """Odd-parity probability for input ``x`` under the uniform mixture of all
    GHZ basis states on ``len(x)`` qubits."""
    labels = GhzLabel.all(len(x))
    total = sum(parity_probabilities(apply_inputs(prepare_ghz(lab), x))[1] for lab in labels)
    return total / len(labels)


def ghz_output_parity(label: GhzLabel, x: BitString) -> int:
    """Output parity that a single GHZ basis state produces deterministically.

    The relative phase between |a> and its complement after the phase layer is
    sign * (-1)^(wt(x)/2 - x.a); H on all qubits maps a +1 relative phase onto
    even-parity strings and -1 onto odd ones.
    """
    if sum(x.bits) % 2:
        raise ValueError("input must have even weight")
    overlap = (x.to_int() & label.base.to_int()).bit_count()
    rel = label.sign * (-1) ** ((sum(x.bits) // 2 - overlap) % 2)
    return 0 if rel > 0 else 1
