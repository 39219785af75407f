"""Four-qubit state-vector engine.

Qubits are labelled a, b, c, d. In a basis-state index, qubit a is the most
significant bit and d the least significant, so ``|0011>`` has index 3.
Measurement outcome 0 is the +1 eigenvalue and outcome 1 the -1 eigenvalue,
in both the Z and X bases.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from math import sqrt
from typing import Iterable, Sequence, Union

import numpy as np

N_QUBITS = 4
DIM = 2**N_QUBITS

# branches lighter than this are never drawn or kept
PRUNE = 1e-15
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


class Qubit(enum.IntEnum):
    """Qubit label; the value is the tensor axis (a=0 is the MSB)."""

    a = 0
    b = 1
    c = 2
    d = 3

    @property
    def bit(self) -> int:
        return N_QUBITS - 1 - int(self)

    @classmethod
    def parse(cls, label: "str | Qubit") -> "Qubit":
        if isinstance(label, Qubit):
            return label
        return cls[label.lower()]


class Basis(enum.Enum):
    Z = "Z"
    X = "X"

    @property
    def eigenvectors(self) -> np.ndarray:
        """Rows are the outcome-0 and outcome-1 eigenvectors."""
        return _EIGENVECTORS[self]

    @property
    def pauli(self) -> np.ndarray:
        return _PAULI[self]

    @classmethod
    def parse(cls, label: "str | Basis") -> "Basis":
        if isinstance(label, Basis):
            return label
        return cls(label.upper())


_S = 1 / sqrt(2)
_EIGENVECTORS = {
    Basis.Z: np.array([[1, 0], [0, 1]], dtype=complex),
    Basis.X: np.array([[_S, _S], [_S, -_S]], dtype=complex),
}
_PAULI = {
    Basis.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    Basis.X: np.array([[0, 1], [1, 0]], dtype=complex),
}
for _v in _EIGENVECTORS.values():
    _v.setflags(write=False)
for _v in _PAULI.values():
    _v.setflags(write=False)


@dataclass(frozen=True, eq=False)
class PureState:
    """Sixteen amplitudes over ``|q_a q_b q_c q_d>``; the array is read-only."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(DIM)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_terms(cls, terms: dict[str, complex], normalize: bool = True) -> "PureState":
        """Build from ``{"0011": amp, ...}``."""
        amps = np.zeros(DIM, dtype=complex)
        for bits, amp in terms.items():
            if len(bits) != N_QUBITS or set(bits) - {"0", "1"}:
                raise ValueError(f"bad basis label {bits!r}")
            amps[int(bits, 2)] += amp
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(amps)

    @classmethod
    def basis_state(cls, bits: str) -> "PureState":
        return cls.from_terms({bits: 1.0})

    def amp(self, bits: str) -> complex:
        return complex(self.amplitudes[int(bits, 2)])

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * N_QUBITS)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def same_ray(self, other: "PureState", tol: float = 1e-10) -> bool:
        """Equality up to global phase."""
        return abs(abs(self.overlap(other)) - 1) <= tol

    def __repr__(self):
        terms = [
            f"{a:.4g}|{i:04b}>" for i, a in enumerate(self.amplitudes) if abs(a) > 1e-12
        ]
        return f"PureState({' + '.join(terms)})"


@dataclass(frozen=True)
class Ensemble:
    """Probabilistic mixture of pure states."""

    members: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        members = tuple((float(w), s) for w, s in self.members)
        if not members:
            raise ValueError("empty ensemble")
        if any(w <= 0 for w, _ in members):
            raise ValueError("ensemble weights must be positive")
        if abs(sum(w for w, _ in members) - 1) > NORM_TOL:
            raise ValueError("ensemble weights must sum to 1")
        object.__setattr__(self, "members", members)

    @classmethod
    def mix(cls, parts: Iterable[tuple[float, "Ensemble | PureState"]]) -> "Ensemble":
        """Flatten a weighted mixture of ensembles and states; zero weights drop out."""
        out = []
        for p, src in parts:
            if p <= 0:
                continue
            if isinstance(src, PureState):
                out.append((p, src))
            else:
                out.extend((p * w, s) for w, s in src.members)
        return cls(tuple(out))

    @property
    def weights(self) -> list[float]:
        return [w for w, _ in self.members]

    @property
    def states(self) -> list[PureState]:
        return [s for _, s in self.members]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class PauliObservable:
    qubit: Qubit
    axis: Basis

    @classmethod
    def of(cls, qubit: "str | Qubit", axis: "str | Basis") -> "PauliObservable":
        return cls(Qubit.parse(qubit), Basis.parse(axis))


def make_psi4() -> PureState:
    """The four-qubit invariant state used to distribute the lists."""
    k = 1 / (2 * sqrt(3))
    return PureState.from_terms(
        {"0011": 2 * k, "0101": -k, "0110": -k, "1001": -k, "1010": -k, "1100": 2 * k},
        normalize=False,
    )


def _apply_1q(tensor: np.ndarray, matrix: np.ndarray, q: Qubit) -> np.ndarray:
    out = np.tensordot(matrix, tensor, axes=([1], [int(q)]))
    return np.moveaxis(out, 0, int(q))


def _projection(state: PureState, q: Qubit, basis: Basis, outcome: int) -> np.ndarray:
    vec = basis.eigenvectors[outcome]
    proj = np.outer(vec, vec.conj())
    return _apply_1q(state.tensor(), proj, q).reshape(DIM)


def branch_probabilities(state: PureState, q: Qubit, basis: Basis) -> tuple[float, float]:
    """Born probabilities of outcomes 0 and 1 for one qubit."""
    p = []
    for k in (0, 1):
        comp = _projection(state, q, basis, k)
        p.append(float(np.vdot(comp, comp).real))
    return p[0], p[1]


def collapse(state: PureState, q: Qubit, basis: Basis, outcome: int) -> PureState:
    comp = _projection(state, q, basis, outcome)
    norm = np.linalg.norm(comp)
    if norm**2 < PRUNE:
        raise ValueError(f"outcome {outcome} on qubit {q.name} has zero probability")
    return PureState(comp / norm)


def draw_outcome(p0: float, p1: float, rand: float) -> int:
    """Outcome 0 iff ``rand < p0``; a branch below the prune level is never drawn."""
    if p0 < PRUNE and p1 < PRUNE:
        raise RuntimeError("both measurement branches vanish; input state is not normalized")
    if p0 < PRUNE:
        return 1
    if p1 < PRUNE:
        return 0
    return 0 if rand < p0 else 1


def measure_qubit(
    state: PureState, q: "Qubit | str", basis: "Basis | str", rand: float
) -> tuple[int, PureState, float]:
    """Projectively measure one qubit.

    Returns ``(outcome, collapsed_state, probability_of_outcome)``.
    """
    q, basis = Qubit.parse(q), Basis.parse(basis)
    p0, p1 = branch_probabilities(state, q, basis)
    outcome = draw_outcome(p0, p1, rand)
    return outcome, collapse(state, q, basis, outcome), (p0, p1)[outcome]


def project_all(
    state: PureState, qubits: Sequence["Qubit | str"], basis: "Basis | str"
) -> Ensemble:
    """All outcome branches of measuring ``qubits`` in ``basis``, weighted by probability."""
    qs = [Qubit.parse(q) for q in qubits]
    basis = Basis.parse(basis)
    if not qs:
        raise ValueError("no qubits to project")
    if len(set(qs)) != len(qs):
        raise ValueError(f"duplicate qubits in {[q.name for q in qs]}")
    branches = [state.amplitudes]
    for q in qs:
        nxt = []
        for amps in branches:
            for k in (0, 1):
                comp = _projection(PureState(amps), q, basis, k)
                if np.vdot(comp, comp).real >= PRUNE:
                    nxt.append(comp)
        branches = nxt
    total = sum(np.vdot(b, b).real for b in branches)
    members = []
    for amps in branches:
        w = np.vdot(amps, amps).real
        members.append((w / total, PureState(amps / sqrt(w))))
    return Ensemble(tuple(members))


def _pair_expectation_pure(state: PureState, o1: PauliObservable, o2: PauliObservable) -> float:
    t = state.tensor()
    t2 = _apply_1q(_apply_1q(t, o1.axis.pauli, o1.qubit), o2.axis.pauli, o2.qubit)
    return float(np.vdot(t.reshape(DIM), t2.reshape(DIM)).real)


def expectation_pair(
    src: Union[PureState, Ensemble], o1: PauliObservable, o2: PauliObservable
) -> float:
    """Exact ``<o1 (x) o2>`` on a pure state or ensemble average."""
    if o1.qubit == o2.qubit:
        raise ValueError(f"both observables act on qubit {o1.qubit.name}")
    if isinstance(src, PureState):
        value = _pair_expectation_pure(src, o1, o2)
    else:
        value = sum(w * _pair_expectation_pure(s, o1, o2) for w, s in src.members)
    return min(1.0, max(-1.0, value))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    return u.shape == (2, 2) and np.allclose(u.conj().T @ u, np.eye(2), atol=tol, rtol=0)


def apply_uniform_unitary(state: PureState, u: np.ndarray) -> PureState:
    """Apply ``u`` to every qubit."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("matrix is not a 2x2 unitary")
    t = state.tensor()
    for q in Qubit:
        t = _apply_1q(t, u, q)
    return PureState(t.reshape(DIM))


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _S
