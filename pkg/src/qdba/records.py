"""Parties, per-round measurement records and the line-delimited record file."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .qengine import Basis, Qubit


class Party(enum.Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def qubits(self) -> tuple[Qubit, ...]:
        return PARTY_QUBITS[self]

    @classmethod
    def parse(cls, label: "str | Party") -> "Party":
        if isinstance(label, Party):
            return label
        return cls(label.upper())


PARTY_QUBITS = {
    Party.A: (Qubit.a, Qubit.b),
    Party.B: (Qubit.c,),
    Party.C: (Qubit.d,),
}
OWNER = {q: p for p, qs in PARTY_QUBITS.items() for q in qs}


class Trit(enum.Enum):
    ZERO = 0
    ONE = 1
    BOT = "⊥"

    def __str__(self):
        return str(self.value)


def trit_of(out_a: int, out_b: int) -> Trit:
    """Commander's list symbol from her two outcomes: 11 -> 0, 00 -> 1, else ⊥."""
    if out_a == out_b == 1:
        return Trit.ZERO
    if out_a == out_b == 0:
        return Trit.ONE
    return Trit.BOT


@dataclass(frozen=True)
class MeasurementRecord:
    """One distribution round. A's basis applies to both of her qubits."""

    round: int
    basis: Mapping[Party, Basis]
    outcome: Mapping[Qubit, int]

    def __post_init__(self):
        if set(self.basis) != set(Party):
            raise ValueError("basis must name exactly A, B, C")
        if set(self.outcome) != set(Qubit):
            raise ValueError("outcome must name exactly a, b, c, d")
        if any(v not in (0, 1) for v in self.outcome.values()):
            raise ValueError("outcomes must be 0 or 1")

    def basis_of(self, q: Qubit) -> Basis:
        return self.basis[OWNER[q]]

    @property
    def all_same_basis(self) -> "Basis | None":
        bases = set(self.basis.values())
        return bases.pop() if len(bases) == 1 else None

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "basisA": self.basis[Party.A].value,
            "basisB": self.basis[Party.B].value,
            "basisC": self.basis[Party.C].value,
            "outA": self.outcome[Qubit.a],
            "outB": self.outcome[Qubit.b],
            "outC": self.outcome[Qubit.c],
            "outD": self.outcome[Qubit.d],
        }


class RecordTable:
    """Columnar store of measurement records.

    ``bases`` is ``(n, 3)`` with 0 for Z and 1 for X in party order A, B, C;
    ``outcomes`` is ``(n, 4)`` in qubit order a, b, c, d.
    """

    def __init__(self, rounds: np.ndarray, bases: np.ndarray, outcomes: np.ndarray):
        self.rounds = np.asarray(rounds, dtype=np.int64)
        self.bases = np.asarray(bases, dtype=np.int8).reshape(-1, 3)
        self.outcomes = np.asarray(outcomes, dtype=np.int8).reshape(-1, 4)
        if not (len(self.rounds) == len(self.bases) == len(self.outcomes)):
            raise ValueError("column lengths differ")

    @classmethod
    def from_records(cls, records: Iterable[MeasurementRecord]) -> "RecordTable":
        if isinstance(records, RecordTable):
            return records
        records = list(records)
        rounds = [r.round for r in records]
        bases = [[_AXIS_CODE[r.basis[p]] for p in Party] for r in records]
        outs = [[r.outcome[q] for q in Qubit] for r in records]
        return cls(rounds, np.array(bases).reshape(-1, 3), np.array(outs).reshape(-1, 4))

    def __len__(self):
        return len(self.rounds)

    def __getitem__(self, i: int) -> MeasurementRecord:
        return MeasurementRecord(
            round=int(self.rounds[i]),
            basis={p: _AXES[self.bases[i, j]] for j, p in enumerate(Party)},
            outcome={q: int(self.outcomes[i, int(q)]) for q in Qubit},
        )

    def __iter__(self) -> Iterator[MeasurementRecord]:
        return (self[i] for i in range(len(self)))

    def subset(self, mask: np.ndarray) -> "RecordTable":
        return RecordTable(self.rounds[mask], self.bases[mask], self.outcomes[mask])

    def qubit_axis(self, q: Qubit) -> np.ndarray:
        """Per-round axis code (0=Z, 1=X) used on qubit ``q``."""
        return self.bases[:, list(Party).index(OWNER[q])]

    def same_basis_mask(self, axis: Basis) -> np.ndarray:
        return np.all(self.bases == _AXIS_CODE[axis], axis=1)

    def trits(self) -> list[Trit]:
        return [trit_of(a, b) for a, b in self.outcomes[:, :2].tolist()]


_AXES = (Basis.Z, Basis.X)
_AXIS_CODE = {Basis.Z: 0, Basis.X: 1}


def axis_code(axis: Basis) -> int:
    return _AXIS_CODE[axis]


def axis_from_code(code: int) -> Basis:
    return _AXES[code]


# record file -------------------------------------------------------------

FIELDS = ("round", "basisA", "basisB", "basisC", "outA", "outB", "outC", "outD")


class RecordFileError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def format_lines(table: RecordTable) -> Iterator[str]:
    for rnd, bases, outs in zip(table.rounds.tolist(), table.bases.tolist(), table.outcomes.tolist()):
        yield (
            f'{{"round": {rnd}, "basisA": "{"ZX"[bases[0]]}", "basisB": "{"ZX"[bases[1]]}", '
            f'"basisC": "{"ZX"[bases[2]]}", "outA": {outs[0]}, "outB": {outs[1]}, '
            f'"outC": {outs[2]}, "outD": {outs[3]}}}'
        )


def write_records(path, table: RecordTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in format_lines(table):
            fh.write(line + "\n")


def parse_lines(lines: Iterable[str]) -> RecordTable:
    """Parse and validate record-file lines; blank lines are skipped."""
    rounds, bases, outs = [], [], []
    last = None
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordFileError(lineno, f"not a JSON object ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise RecordFileError(lineno, "not a JSON object")
        if set(obj) != set(FIELDS):
            missing = sorted(set(FIELDS) - set(obj))
            extra = sorted(set(obj) - set(FIELDS))
            raise RecordFileError(lineno, f"bad fields (missing {missing}, unexpected {extra})")
        rnd = obj["round"]
        if type(rnd) is not int or rnd < 0:
            raise RecordFileError(lineno, "round must be a non-negative integer")
        if last is not None and rnd <= last:
            raise RecordFileError(lineno, f"round {rnd} does not increase (previous {last})")
        last = rnd
        row_b = []
        for key in ("basisA", "basisB", "basisC"):
            if obj[key] not in ("Z", "X"):
                raise RecordFileError(lineno, f"{key} must be \"Z\" or \"X\"")
            row_b.append(0 if obj[key] == "Z" else 1)
        row_o = []
        for key in ("outA", "outB", "outC", "outD"):
            v = obj[key]
            if type(v) is not int or v not in (0, 1):
                raise RecordFileError(lineno, f"{key} must be 0 or 1")
            row_o.append(v)
        rounds.append(rnd)
        bases.append(row_b)
        outs.append(row_o)
    return RecordTable(
        np.array(rounds, dtype=np.int64),
        np.array(bases, dtype=np.int8).reshape(-1, 3),
        np.array(outs, dtype=np.int8).reshape(-1, 4),
    )


def read_records(path) -> RecordTable:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh)


def records_from_rows(rows: Sequence[Mapping]) -> list[MeasurementRecord]:
    """Build records from ``{"round":..., "basisA":..., ...}`` dicts (tests, fixtures)."""
    return list(parse_lines(json.dumps(dict(r)) for r in rows))
