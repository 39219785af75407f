"""Intercept-resend attacks on the distributed four-qubit state.

Three attacks cover every traitor position up to the B/C symmetry:

* case I   -- commander A intercepts qubit c on its way to B;
* case II  -- B intercepts qubits a, b on their way to A;
* case III -- B intercepts qubit d on its way to C.

The traitor measures the intercepted qubits in Z or X and forwards the
collapsed state, learning the victim's outcome whenever the victim later
measures in the same basis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .qengine import Basis, Ensemble, PureState, Qubit, measure_qubit, project_all
from .records import MeasurementRecord, Party, trit_of


class AttackCase(enum.Enum):
    NONE = "none"
    I = "I"
    II = "II"
    III = "III"

    @property
    def intercepted(self) -> tuple[Qubit, ...]:
        return _INTERCEPTED[self]

    @property
    def traitor(self) -> Optional[Party]:
        return _TRAITOR[self]

    @property
    def victim(self) -> Optional[Party]:
        return _VICTIM[self]

    @classmethod
    def parse(cls, label: "str | AttackCase") -> "AttackCase":
        if isinstance(label, AttackCase):
            return label
        label = label.strip()
        if label.lower() == "none":
            return cls.NONE
        return cls(label.upper())


_INTERCEPTED = {
    AttackCase.NONE: (),
    AttackCase.I: (Qubit.c,),
    AttackCase.II: (Qubit.a, Qubit.b),
    AttackCase.III: (Qubit.d,),
}
_TRAITOR = {AttackCase.NONE: None, AttackCase.I: Party.A, AttackCase.II: Party.B, AttackCase.III: Party.B}
_VICTIM = {AttackCase.NONE: None, AttackCase.I: Party.B, AttackCase.II: Party.A, AttackCase.III: Party.C}


@dataclass(frozen=True)
class AttackBasisPolicy:
    """Basis the traitor measures in: Z with probability ``p_z``, else X.

    ``p_z`` of 1 or 0 gives the fixed-basis attacks.
    """

    p_z: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_z <= 1.0:
            raise ValueError(f"p_z must lie in [0, 1], got {self.p_z}")

    @classmethod
    def always(cls, basis: "Basis | str") -> "AttackBasisPolicy":
        return cls(1.0 if Basis.parse(basis) is Basis.Z else 0.0)

    @classmethod
    def random(cls, p_z: float = 0.5) -> "AttackBasisPolicy":
        return cls(p_z)

    @property
    def fixed(self) -> Optional[Basis]:
        if self.p_z == 1.0:
            return Basis.Z
        if self.p_z == 0.0:
            return Basis.X
        return None

    def choose(self, rand: float) -> Basis:
        return Basis.Z if rand < self.p_z else Basis.X

    def __str__(self):
        fixed = self.fixed
        return f"always-{fixed.value}" if fixed else f"random(p_z={self.p_z:g})"


ALWAYS_Z = AttackBasisPolicy.always(Basis.Z)
ALWAYS_X = AttackBasisPolicy.always(Basis.X)


@dataclass(frozen=True)
class TraitorRecord:
    round: int
    basis_used: Basis
    outcomes: Mapping[Qubit, int]


def apply_attack(
    state: PureState,
    case: AttackCase,
    policy: AttackBasisPolicy,
    rng,
    round: int = 0,
) -> tuple[PureState, Optional[TraitorRecord]]:
    """Intercept, measure and resend.

    ``rng`` needs only a ``random()`` method. An attack consumes one draw for
    the basis (whatever the policy) and then one per intercepted qubit, so the
    draw layout of a round does not depend on the policy.
    """
    case = AttackCase.parse(case)
    if case is AttackCase.NONE:
        return state, None
    basis = policy.choose(rng.random())
    outcomes = {}
    for q in case.intercepted:
        outcomes[q], state, _ = measure_qubit(state, q, basis, rng.random())
    return state, TraitorRecord(round, basis, outcomes)


def attacked_ensemble(state: PureState, case: AttackCase, policy: AttackBasisPolicy) -> "Ensemble | PureState":
    """Average post-attack state as seen by the honest parties."""
    case = AttackCase.parse(case)
    if case is AttackCase.NONE:
        return state
    return Ensemble.mix(
        [
            (policy.p_z, project_all(state, case.intercepted, Basis.Z)),
            (1 - policy.p_z, project_all(state, case.intercepted, Basis.X)),
        ]
    )


def infer_secret(
    records: Sequence[TraitorRecord],
    rounds: Sequence[MeasurementRecord],
    target: "Party | str",
) -> list:
    """What the traitor knows of ``target``'s list symbol, round by round.

    A round yields a value only when the traitor intercepted every qubit of
    ``target`` and measured in the basis ``target`` then used; the victim's
    repeat measurement is then certain to reproduce it. Other rounds give
    ``None``. Values are a :class:`Trit` for A and a bit for B or C.
    """
    target = Party.parse(target)
    if len(records) != len(rounds):
        raise ValueError(f"{len(records)} traitor records for {len(rounds)} rounds")
    out = []
    for rec, meta in zip(records, rounds):
        if rec.round != meta.round:
            raise ValueError(f"round mismatch: traitor record {rec.round} vs measurement {meta.round}")
        qs = target.qubits
        if any(q not in rec.outcomes for q in qs) or rec.basis_used is not meta.basis[target]:
            out.append(None)
        elif target is Party.A:
            out.append(trit_of(rec.outcomes[Qubit.a], rec.outcomes[Qubit.b]))
        else:
            out.append(rec.outcomes[qs[0]])
    return out

