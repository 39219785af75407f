"""Three-party detectable Byzantine agreement built on shared four-qubit rounds.

A round: a fresh shared state is prepared, an attack (if any) is applied,
then A measures a, b in one basis, B measures c and C measures d, each party
picking Z or X with probability 1/2. Rounds where all three chose Z make up
the secret lists.

Every round owns a fixed block of twelve uniform draws taken from a Philox
stream at counter ``3 * round`` (four doubles per counter step), so its
outcomes depend only on ``(seed, round)``:

====  =========================================
slot  use
====  =========================================
0-2   basis of A, B, C (Z if draw < 1/2)
3     attack basis (Z if draw < p_z)
4-5   attack outcomes, intercepted qubit order
6-9   measurement of a, b, c, d
====  =========================================
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from . import qengine
from .adversary import (
    AttackBasisPolicy,
    AttackCase,
    TraitorRecord,
    apply_attack,
    infer_secret,
)
from .correlators import NoSamplesError, estimate_all, predictions
from .detector import DetectorConfig, Status, Verdict, decide
from .qengine import Basis, Qubit, branch_probabilities, collapse, make_psi4
from .records import MeasurementRecord, Party, RecordTable, Trit, trit_of

DRAWS_PER_ROUND = 12
_COUNTER_STEPS_PER_ROUND = DRAWS_PER_ROUND // 4
_SLOT_BASES = (0, 1, 2)
_SLOT_ATTACK_BASIS = 3
_SLOT_ATTACK = (4, 5)
_SLOT_MEASURE = (6, 7, 8, 9)
CHUNK = 1 << 16


class InsufficientRoundsError(RuntimeError):
    pass


def round_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Draw block of rounds ``start..stop-1``, shape ``(stop - start, 12)``."""
    bitgen = np.random.Philox(key=int(seed))
    bitgen.advance(start * _COUNTER_STEPS_PER_ROUND)
    return np.random.Generator(bitgen).random((stop - start, DRAWS_PER_ROUND))


class _Draws:
    """Feeds a fixed sequence of draws to code expecting ``rng.random()``."""

    def __init__(self, values):
        self._it = iter(values)

    def random(self) -> float:
        return float(next(self._it))


# exact sampling -------------------------------------------------------------


def _steps(case: AttackCase, attack_basis: Basis, bases: Sequence[Basis]) -> list:
    steps = [(q, attack_basis) for q in case.intercepted]
    b_a, b_b, b_c = bases
    steps += [(Qubit.a, b_a), (Qubit.b, b_a), (Qubit.c, b_b), (Qubit.d, b_c)]
    return steps


def _fill_tree(table: np.ndarray, state, steps, node: int = 1) -> None:
    """Store P(outcome 0) for every reachable prefix, heap-indexed."""
    if not steps:
        return
    q, basis = steps[0]
    p0, p1 = branch_probabilities(state, q, basis)
    # encode the draw rule: outcome 1 iff draw >= stored value
    if p0 < qengine.PRUNE:
        table[node] = 0.0
    elif p1 < qengine.PRUNE:
        table[node] = 2.0
    else:
        table[node] = p0
    for k, p in ((0, p0), (1, p1)):
        if p >= qengine.PRUNE:
            _fill_tree(table, collapse(state, q, basis, k), steps[1:], 2 * node + k)


@lru_cache(maxsize=None)
def _sampling_table(case: AttackCase) -> np.ndarray:
    """``[attack_basis, basis_combo, node] -> P(0)`` for sequential measurement."""
    depth = len(case.intercepted) + 4
    table = np.full((2, 8, 1 << depth), np.nan)
    psi = make_psi4()
    for ab, attack_basis in enumerate((Basis.Z, Basis.X)):
        for combo in range(8):
            bases = [(Basis.Z, Basis.X)[(combo >> s) & 1] for s in (2, 1, 0)]
            _fill_tree(table[ab, combo], psi, _steps(case, attack_basis, bases))
    table.setflags(write=False)
    return table


@dataclass
class _Chunk:
    rounds: np.ndarray
    bases: np.ndarray
    outcomes: np.ndarray
    attack_basis: np.ndarray
    attack_outcomes: np.ndarray


def _simulate_chunk(seed: int, start: int, stop: int, case: AttackCase, policy: AttackBasisPolicy) -> _Chunk:
    u = round_uniforms(seed, start, stop)
    n = stop - start
    bases = (u[:, list(_SLOT_BASES)] >= 0.5).astype(np.int8)
    combo = bases[:, 0] * 4 + bases[:, 1] * 2 + bases[:, 2]
    k = len(case.intercepted)
    if k:
        att = (u[:, _SLOT_ATTACK_BASIS] >= policy.p_z).astype(np.int8)
    else:
        att = np.zeros(n, dtype=np.int8)
    table = _sampling_table(case)
    node = np.ones(n, dtype=np.int64)
    bits = []
    for slot in list(_SLOT_ATTACK[:k]) + list(_SLOT_MEASURE):
        bit = u[:, slot] >= table[att, combo, node]
        bits.append(bit.astype(np.int8))
        node = 2 * node + bit
    attack_out = np.full((n, 2), -1, dtype=np.int8)
    for j in range(k):
        attack_out[:, j] = bits[j]
    return _Chunk(
        rounds=np.arange(start, stop, dtype=np.int64),
        bases=bases,
        outcomes=np.stack(bits[k:], axis=1),
        attack_basis=att if k else np.full(n, -1, dtype=np.int8),
        attack_outcomes=attack_out,
    )


def simulate_round(
    seed: int, index: int, case: AttackCase = AttackCase.NONE, policy: AttackBasisPolicy = AttackBasisPolicy()
) -> tuple[MeasurementRecord, Optional[TraitorRecord]]:
    """One round, step by step through the state-vector engine.

    Uses the same draw slots as :func:`run_distribution` and gives the same
    result; slower, kept as the readable reference.
    """
    case = AttackCase.parse(case)
    u = round_uniforms(seed, index, index + 1)[0]
    bases = {p: (Basis.Z if u[s] < 0.5 else Basis.X) for p, s in zip(Party, _SLOT_BASES)}
    state = make_psi4()
    attack_draws = [u[_SLOT_ATTACK_BASIS], *u[list(_SLOT_ATTACK)]]
    state, trecord = apply_attack(state, case, policy, _Draws(attack_draws), round=index)
    outcome = {}
    party_of = {Qubit.a: Party.A, Qubit.b: Party.A, Qubit.c: Party.B, Qubit.d: Party.C}
    for q, slot in zip(Qubit, _SLOT_MEASURE):
        outcome[q], state, _ = qengine.measure_qubit(state, q, bases[party_of[q]], u[slot])
    return MeasurementRecord(index, bases, outcome), trecord


# transcript -------------------------------------------------------------


@dataclass
class Transcript:
    """Everything the distribution phase produced.

    ``attack_basis`` is -1 on unattacked runs, else 0 (Z) / 1 (X);
    ``attack_outcomes`` holds the traitor's results, -1 where unused.
    ``consumed`` collects rounds spent on spot checks.
    """

    table: RecordTable
    case: AttackCase
    policy: AttackBasisPolicy
    attack_basis: np.ndarray
    attack_outcomes: np.ndarray
    consumed: set = field(default_factory=set)

    def __len__(self):
        return len(self.table)

    def traitor_records(self) -> list[TraitorRecord]:
        if self.case is AttackCase.NONE:
            return []
        qs = self.case.intercepted
        out = []
        for rnd, ab, outs in zip(
            self.table.rounds.tolist(), self.attack_basis.tolist(), self.attack_outcomes.tolist()
        ):
            out.append(TraitorRecord(rnd, (Basis.Z, Basis.X)[ab], {q: outs[j] for j, q in enumerate(qs)}))
        return out


def run_distribution(
    n_rounds: int,
    attack: tuple[AttackCase, AttackBasisPolicy] = (AttackCase.NONE, AttackBasisPolicy()),
    seed: int = 0,
    workers: int = 1,
) -> Transcript:
    """Simulate ``n_rounds`` rounds; identical output for any ``workers``."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be at least 1")
    case, policy = AttackCase.parse(attack[0]), attack[1]
    bounds = [(s, min(s + CHUNK, n_rounds)) for s in range(0, n_rounds, CHUNK)]

    def work(b):
        return _simulate_chunk(seed, b[0], b[1], case, policy)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, bounds))
    else:
        chunks = [work(b) for b in bounds]
    cat = lambda name: np.concatenate([getattr(c, name) for c in chunks])  # noqa: E731
    return Transcript(
        table=RecordTable(cat("rounds"), cat("bases"), cat("outcomes")),
        case=case,
        policy=policy,
        attack_basis=cat("attack_basis"),
        attack_outcomes=cat("attack_outcomes"),
    )


# lists ------------------------------------------------------------------


@dataclass(frozen=True)
class SecretLists:
    positions: tuple[int, ...]
    tA: tuple[Trit, ...]
    bB: tuple[int, ...]
    bC: tuple[int, ...]

    def __len__(self):
        return len(self.positions)

    def own_bits(self, party: Party) -> dict[int, int]:
        bits = {Party.B: self.bB, Party.C: self.bC}[party]
        return dict(zip(self.positions, bits))

    def index_set(self, order: int) -> frozenset:
        want = Trit(order)
        return frozenset(k for k, t in zip(self.positions, self.tA) if t is want)

    def violations(self) -> list[int]:
        return [k for k, t, b, c in zip(self.positions, self.tA, self.bB, self.bC) if not _consistent(t, b, c)]


def _consistent(t: Trit, b: int, c: int) -> bool:
    if t is Trit.BOT:
        return b != c
    return b == c == t.value


def derive_lists(transcript: Union[Transcript, RecordTable]) -> SecretLists:
    """List positions are the all-Z rounds not already spent on checks."""
    if isinstance(transcript, Transcript):
        table, consumed = transcript.table, transcript.consumed
    else:
        table, consumed = transcript, set()
    if len(table) == 0:
        raise InsufficientRoundsError("empty transcript")
    mask = table.same_basis_mask(Basis.Z)
    if consumed:
        mask &= ~np.isin(table.rounds, np.fromiter(consumed, dtype=np.int64))
    sub = table.subset(mask)
    if len(sub) == 0:
        raise InsufficientRoundsError("no all-Z rounds available for the lists")
    outs = sub.outcomes.tolist()
    return SecretLists(
        positions=tuple(sub.rounds.tolist()),
        tA=tuple(trit_of(o[0], o[1]) for o in outs),
        bB=tuple(o[2] for o in outs),
        bC=tuple(o[3] for o in outs),
    )


# verification -----------------------------------------------------------


def _spot_check(table: RecordTable, consumed: set, fraction: float, rng: np.random.Generator) -> tuple[list, list]:
    same = table.same_basis_mask(Basis.Z) | table.same_basis_mask(Basis.X)
    idx = np.flatnonzero(same)
    if consumed:
        idx = idx[~np.isin(table.rounds[idx], np.fromiter(consumed, dtype=np.int64))]
    k = min(len(idx), math.ceil(fraction * len(idx))) if fraction > 0 else 0
    picked = np.sort(rng.choice(idx, size=k, replace=False)) if k else idx[:0]
    outs = table.outcomes[picked]
    trit = np.where(
        outs[:, 0] != outs[:, 1], -1, 1 - outs[:, 0]
    )  # 11 -> 0, 00 -> 1, mixed -> -1 (⊥)
    ok = np.where(trit == -1, outs[:, 2] != outs[:, 3], (outs[:, 2] == trit) & (outs[:, 3] == trit))
    rounds = table.rounds[picked]
    return rounds.tolist(), rounds[~ok].tolist()


def verify_step_iii(
    transcript: Transcript,
    sample_fraction: float = 0.1,
    config: DetectorConfig = DetectorConfig(),
    seed: int = 0,
) -> Verdict:
    """Spot-check list correlations, then test all twelve correlators.

    Sampled rounds are added to ``transcript.consumed``. Accept requires both
    checks to pass.
    """
    if not 0.0 <= sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in [0, 1]")
    table = transcript.table if isinstance(transcript, Transcript) else transcript
    if len(table) == 0:
        raise InsufficientRoundsError("empty transcript")
    rng = np.random.default_rng([int(seed), 0x5E1EC7])
    consumed = transcript.consumed if isinstance(transcript, Transcript) else set()
    checked, bad = _spot_check(table, consumed, sample_fraction, rng)
    if isinstance(transcript, Transcript):
        transcript.consumed.update(checked)
    try:
        estimates = estimate_all(table)
    except NoSamplesError as exc:
        raise InsufficientRoundsError(str(exc)) from exc
    verdict = decide(estimates.values(), predictions(), config)
    status = Status.ABORT if bad else verdict.status
    return dataclasses.replace(
        verdict,
        status=status,
        list_checked=len(checked),
        list_violations=tuple(bad),
        consumed=frozenset(checked),
    )


# agreement --------------------------------------------------------------


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class Equivocate:
    """Commander sends (0, her 0-set) to B and (1, her 1-set) to C."""


@dataclass(frozen=True)
class ForgeOrder:
    """Receiver claims the opposite order and backs it with a forged index set.

    Without ``peer_bits`` the set is guessed from the traitor's own list; with
    them (stolen by an attack) it is built from the peer's actual bits.
    """

    peer_bits: Optional[Mapping[int, int]] = None


Behavior = Union[Honest, Equivocate, ForgeOrder]


@dataclass(frozen=True)
class Agree:
    order: int


@dataclass(frozen=True)
class TraitorDetected:
    party: Party
    order: Optional[int] = None  # order the detecting receiver still acts on, if any


@dataclass(frozen=True)
class AbortedAtVerification:
    violations: tuple = ()


AgreementOutcome = Union[Agree, TraitorDetected, AbortedAtVerification]


def default_l_min(list_length: int) -> int:
    return max(1, list_length // 6)


def _valid(msg, own: Mapping[int, int], l_min: int) -> bool:
    if msg is None:
        return False
    order, idx = msg
    return len(idx) >= l_min and all(k in own and own[k] == order for k in idx)


def run_agreement(
    lists: SecretLists,
    order: int,
    behaviors: Optional[Mapping[Party, Behavior]] = None,
    l_min: Optional[int] = None,
    seed: int = 0,
) -> dict[Party, AgreementOutcome]:
    """Agreement phase; returns the outcome of each loyal party.

    Caller must have run verification first.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    behaviors = {Party.parse(p): b for p, b in (behaviors or {}).items()}
    traitors = [p for p, b in behaviors.items() if not isinstance(b, Honest)]
    if len(traitors) > 1:
        raise ValueError("at most one traitor")
    if isinstance(behaviors.get(Party.B), Equivocate) or isinstance(behaviors.get(Party.C), Equivocate):
        raise ValueError("only the commander can equivocate")
    if isinstance(behaviors.get(Party.A), ForgeOrder):
        raise ValueError("only a receiver can forge an order")
    rng = np.random.default_rng([int(seed), 0xA9EE])
    l_min = default_l_min(len(lists)) if l_min is None else l_min

    a_behavior = behaviors.get(Party.A, Honest())
    sent_orders = (0, 1) if isinstance(a_behavior, Equivocate) else (order,)
    for m in sent_orders:
        if len(lists.index_set(m)) < l_min:
            raise InsufficientRoundsError(f"only {len(lists.index_set(m))} list positions for order {m}, need {l_min}")

    # (1) commander to receivers
    if isinstance(a_behavior, Equivocate):
        received = {Party.B: (0, lists.index_set(0)), Party.C: (1, lists.index_set(1))}
    else:
        received = {p: (order, lists.index_set(order)) for p in (Party.B, Party.C)}

    own = {p: lists.own_bits(p) for p in (Party.B, Party.C)}
    # (2) receivers validate
    valid = {p: _valid(received[p], own[p], l_min) for p in (Party.B, Party.C)}

    # what each receiver claims in (3) and forwards in (4)
    claim = {}
    for p in (Party.B, Party.C):
        b = behaviors.get(p, Honest())
        if isinstance(b, ForgeOrder):
            claim[p] = _forge(received[p], own[p], b, lists, l_min, rng)
        else:
            claim[p] = received[p] if valid[p] else None

    outcomes: dict[Party, AgreementOutcome] = {}
    if Party.A not in traitors:
        outcomes[Party.A] = Agree(order)
    for p, peer in ((Party.B, Party.C), (Party.C, Party.B)):
        if p in traitors:
            continue
        if not valid[p]:
            outcomes[p] = TraitorDetected(Party.A)
            continue
        m = received[p][0]
        # (3) exchange orders
        if claim[peer] is not None and claim[peer][0] == m:
            outcomes[p] = Agree(m)
            continue
        # (4) check the peer's forwarded set against the own list
        if claim[peer] is not None and _valid(claim[peer], own[p], l_min):
            outcomes[p] = TraitorDetected(Party.A)
        else:
            outcomes[p] = TraitorDetected(peer, order=m)
    return outcomes


def _forge(received, own: Mapping[int, int], b: ForgeOrder, lists: SecretLists, l_min: int, rng) -> tuple:
    fake = 1 - received[0]
    if b.peer_bits is not None:
        pos = set(lists.positions)
        return fake, frozenset(k for k, v in b.peer_bits.items() if k in pos and v == fake)
    # own bit == fake outside the received set: either a true fake-order position or ⊥
    candidates = sorted(k for k, v in own.items() if v == fake and k not in received[1])
    size = min(l_min, len(candidates))
    picked = rng.choice(len(candidates), size=size, replace=False) if size else []
    return fake, frozenset(candidates[i] for i in picked)


def stolen_bits(transcript: Transcript, target: Party) -> dict[int, int]:
    """Round -> bit of ``target`` as learned by the traitor's interceptions."""
    inferred = infer_secret(transcript.traitor_records(), transcript.table, target)
    return {int(r): v for r, v in zip(transcript.table.rounds.tolist(), inferred) if v is not None}


# orchestration ----------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    rounds: int = 100_000
    case: AttackCase = AttackCase.NONE
    policy: AttackBasisPolicy = AttackBasisPolicy()
    seed: int = 0
    order: int = 1
    traitor: Optional[Party] = None
    strategy: Optional[Behavior] = None
    detector: DetectorConfig = DetectorConfig()
    sample_fraction: float = 0.1
    workers: int = 1


@dataclass
class ProtocolResult:
    transcript: Transcript
    verdict: Verdict
    lists: Optional[SecretLists]
    outcomes: dict


def behaviors_for(config: ProtocolConfig, transcript: Optional[Transcript] = None) -> dict[Party, Behavior]:
    if config.traitor is None:
        return {}
    strategy = config.strategy
    if strategy is None:
        strategy = Equivocate() if config.traitor is Party.A else ForgeOrder()
    if isinstance(strategy, ForgeOrder) and strategy.peer_bits is None and transcript is not None:
        peer = Party.C if config.traitor is Party.B else Party.B
        if config.case.victim is peer:
            strategy = ForgeOrder(peer_bits=stolen_bits(transcript, peer))
    return {config.traitor: strategy}


def run_protocol(config: ProtocolConfig) -> ProtocolResult:
    """Distribution, verification, then agreement among the loyal parties."""
    case = config.case
    if case.traitor is not None and config.traitor not in (None, case.traitor):
        raise ValueError(f"attack case {case.value} needs traitor {case.traitor.value}")
    traitor = config.traitor or case.traitor
    config = dataclasses.replace(config, traitor=traitor)
    transcript = run_distribution(config.rounds, (case, config.policy), config.seed, config.workers)
    verdict = verify_step_iii(transcript, config.sample_fraction, config.detector, config.seed)
    if verdict.status is not Status.ACCEPT:
        loyal = [p for p in Party if p is not traitor]
        return ProtocolResult(
            transcript, verdict, None, {p: AbortedAtVerification(verdict.violated_keys) for p in loyal}
        )
    lists = derive_lists(transcript)
    outcomes = run_agreement(lists, config.order, behaviors_for(config, transcript), seed=config.seed)
    return ProtocolResult(transcript, verdict, lists, outcomes)
