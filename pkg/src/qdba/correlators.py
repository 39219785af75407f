"""Pairwise Pauli correlators: exact predictions, empirical estimates, reference data."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import sqrt
from typing import Iterable, Union

import numpy as np

from .adversary import AttackBasisPolicy, AttackCase, attacked_ensemble
from .qengine import Basis, PauliObservable, Qubit, expectation_pair, make_psi4
from .records import MeasurementRecord, RecordTable, axis_code


class NoSamplesError(ValueError):
    def __init__(self, key: "CorrelatorKey"):
        super().__init__(f"no rounds measured {key} on both qubits")
        self.key = key


@dataclass(frozen=True)
class CorrelatorKey:
    first: Qubit
    second: Qubit
    axis: Basis

    def __post_init__(self):
        if not self.first < self.second:
            raise ValueError(f"pair must be ordered a<b<c<d, got ({self.first.name},{self.second.name})")

    @classmethod
    def of(cls, first: "str | Qubit", second: "str | Qubit", axis: "str | Basis") -> "CorrelatorKey":
        return cls(Qubit.parse(first), Qubit.parse(second), Basis.parse(axis))

    @property
    def observables(self) -> tuple[PauliObservable, PauliObservable]:
        return PauliObservable(self.first, self.axis), PauliObservable(self.second, self.axis)

    def __lt__(self, other):
        return self._order() < other._order()

    def _order(self):
        return (int(self.first), int(self.second), 0 if self.axis is Basis.X else 1)

    def __str__(self):
        return f"({self.first.name},{self.second.name},{self.axis.value})"


# reference-table row order: pairs in (a,b,c,d) order, X before Z
ALL_KEYS: tuple[CorrelatorKey, ...] = tuple(
    CorrelatorKey(q1, q2, axis)
    for q1, q2 in itertools.combinations(Qubit, 2)
    for axis in (Basis.X, Basis.Z)
)


@dataclass(frozen=True)
class CorrelatorEstimate:
    key: CorrelatorKey
    value: float
    stderr: float
    n: int

    @classmethod
    def from_value(cls, key: CorrelatorKey, value: float, n: int) -> "CorrelatorEstimate":
        return cls(key, value, plugin_stderr(value, n), n)


def plugin_stderr(value: float, n: int) -> float:
    """Standard error of the mean of a ±1 variable with sample mean ``value``."""
    if n < 1:
        raise ValueError("stderr needs at least one sample")
    return sqrt(max(0.0, 1.0 - value * value) / n)


def estimate(records: Union[RecordTable, Iterable[MeasurementRecord]], key: CorrelatorKey) -> CorrelatorEstimate:
    """Mean product of ±1 outcomes over rounds where both qubits used ``key.axis``."""
    table = RecordTable.from_records(records)
    code = axis_code(key.axis)
    mask = (table.qubit_axis(key.first) == code) & (table.qubit_axis(key.second) == code)
    n = int(mask.sum())
    if n == 0:
        raise NoSamplesError(key)
    o1 = table.outcomes[mask, int(key.first)].astype(np.int64)
    o2 = table.outcomes[mask, int(key.second)].astype(np.int64)
    # outcome 0 -> +1, 1 -> -1, so the product is +1 iff the bits agree
    total = int(n - 2 * np.count_nonzero(o1 ^ o2))
    return CorrelatorEstimate.from_value(key, total / n, n)


def estimate_all(records: Union[RecordTable, Iterable[MeasurementRecord]]) -> dict[CorrelatorKey, CorrelatorEstimate]:
    table = RecordTable.from_records(records)
    return {key: estimate(table, key) for key in ALL_KEYS}


HONEST = (AttackCase.NONE, AttackBasisPolicy())


@lru_cache(maxsize=None)
def _theory(key: CorrelatorKey, case: AttackCase, policy: AttackBasisPolicy) -> float:
    src = attacked_ensemble(make_psi4(), case, policy)
    return expectation_pair(src, *key.observables)


def theoretical(key: CorrelatorKey, scenario: tuple[AttackCase, AttackBasisPolicy] = HONEST) -> float:
    """Exact correlator on the shared state, or on its post-attack ensemble."""
    case, policy = scenario
    return _theory(key, AttackCase.parse(case), policy)


def predictions(scenario: tuple[AttackCase, AttackBasisPolicy] = HONEST) -> dict[CorrelatorKey, float]:
    return {key: theoretical(key, scenario) for key in ALL_KEYS}


@dataclass(frozen=True)
class ReferenceRow:
    key: CorrelatorKey
    value: float
    error: float
    theory: Fraction

    def as_estimate(self) -> CorrelatorEstimate:
        """Estimate whose plug-in stderr matches the printed error, n rounded to an integer."""
        n = max(1, round((1 - self.value**2) / self.error**2))
        return CorrelatorEstimate.from_value(self.key, self.value, n)


_TABLE1 = (
    ("a", "b", "X", 0.262, 0.025),
    ("a", "b", "Z", 0.273, 0.025),
    ("a", "c", "X", -0.602, 0.021),
    ("a", "c", "Z", -0.631, 0.02),
    ("a", "d", "X", -0.612, 0.02),
    ("a", "d", "Z", -0.663, 0.019),
    ("b", "c", "X", -0.603, 0.021),
    ("b", "c", "Z", -0.615, 0.02),
    ("b", "d", "X", -0.61, 0.02),
    ("b", "d", "Z", -0.621, 0.02),
    ("c", "d", "X", 0.334, 0.025),
    ("c", "d", "Z", 0.326, 0.024),
)


def table1_reference() -> tuple[ReferenceRow, ...]:
    """Measured correlators from the photonic experiment, with their quoted errors."""
    rows = []
    for q1, q2, axis, value, error in _TABLE1:
        theory = Fraction(1, 3) if (q1, q2) in (("a", "b"), ("c", "d")) else Fraction(-2, 3)
        rows.append(ReferenceRow(CorrelatorKey.of(q1, q2, axis), value, error, theory))
    return tuple(rows)
