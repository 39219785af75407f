"""Exit criteria. Each test is one criterion; a PASS/FAIL line per criterion is
printed in the terminal summary (see conftest.py)."""
import re
import time

import numpy as np
import pytest

from qdba.adversary import ALWAYS_X, ALWAYS_Z, AttackCase, infer_secret
from qdba.cli import main
from qdba.correlators import CorrelatorKey, estimate_all, table1_reference, theoretical
from qdba.detector import Status
from qdba.protocol import (
    AbortedAtVerification,
    Agree,
    ProtocolConfig,
    TraitorDetected,
    run_distribution,
    run_protocol,
    verify_step_iii,
)
from qdba.qengine import Basis, PureState, Qubit, apply_uniform_unitary, expectation_pair, make_psi4, measure_qubit
from qdba.records import Party, trit_of

import oracles

ATTACKS = [(c, p) for c in (AttackCase.I, AttackCase.II, AttackCase.III) for p in (ALWAYS_Z, ALWAYS_X)]


def K(p, q, axis):
    return CorrelatorKey.of(p, q, axis)


def test_criterion_1_exact_theory():
    t0 = time.perf_counter()
    psi = make_psi4()
    for row in table1_reference():
        got = expectation_pair(psi, *row.key.observables)
        assert got == pytest.approx(float(row.theory), abs=1e-12), row.key
    assert time.perf_counter() - t0 < 1.0


def test_criterion_2_attack_signatures():
    t0 = time.perf_counter()
    vanish = {
        AttackCase.I: [K("c", "d", "X")],
        AttackCase.II: [K("a", "b", "X")],
        AttackCase.III: [K("a", "d", "X"), K("b", "d", "X")],
    }
    for case, keys in vanish.items():
        for key in keys:
            assert theoretical(key, (case, ALWAYS_Z)) == pytest.approx(0, abs=1e-12)
            z_key = CorrelatorKey(key.first, key.second, Basis.Z)
            assert theoretical(z_key, (case, ALWAYS_Z)) == pytest.approx(theoretical(z_key), abs=1e-12)
    assert time.perf_counter() - t0 < 1.0


def test_criterion_3_collapse_states():
    eq2 = PureState(np.array([0, 0, 0, 0, 0, -1, 0, 0, 0, -1, 0, 0, 2, 0, 0, 0]) / np.sqrt(6))
    eq3 = PureState(np.array([0, 0, 0, 2, 0, 0, -1, 0, 0, 0, -1, 0, 0, 0, 0, 0]) / np.sqrt(6))
    out0, post0, p0 = measure_qubit(make_psi4(), "c", "Z", 0.25)
    out1, post1, p1 = measure_qubit(make_psi4(), "c", "Z", 0.75)
    assert (out0, out1) == (0, 1)
    assert p0 == pytest.approx(0.5, abs=1e-12) and p1 == pytest.approx(0.5, abs=1e-12)
    assert abs(post0.overlap(eq2)) == pytest.approx(1, abs=1e-10)
    assert abs(post1.overlap(eq3)) == pytest.approx(1, abs=1e-10)


def test_criterion_4_uniform_unitary_invariance():
    psi = make_psi4()
    rng = np.random.default_rng(20081201)
    worst = 0.0
    for _ in range(100):
        u = oracles.random_unitary(rng)
        worst = max(worst, abs(abs(psi.overlap(apply_uniform_unitary(psi, u))) - 1))
    assert worst <= 1e-10


def test_criterion_5_monte_carlo_reproduction():
    t0 = time.perf_counter()
    tr = run_distribution(200_000, seed=20080215)
    for key, est in estimate_all(tr.table).items():
        assert abs(est.value - theoretical(key)) <= 5 * est.stderr, key
    assert time.perf_counter() - t0 < 60

    for case, policy in ATTACKS:
        t0 = time.perf_counter()
        aborts = sum(
            verify_step_iii(run_distribution(100_000, (case, policy), seed=seed), seed=seed).status is Status.ABORT
            for seed in range(100)
        )
        assert aborts >= 99, (case, policy, aborts)
        assert time.perf_counter() - t0 < 60


def test_criterion_6_table1_reanalysis(capsys):
    code = main(["table1"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.strip().splitlines()[-1] == "VERDICT=ACCEPT"
    m = re.search(r"max z: ([0-9.]+) at (\(\w,\w,\w\))", out)
    assert m.group(2) == "(a,c,X)"
    assert float(m.group(1)) == pytest.approx(3.08, abs=0.05)


def test_criterion_7_secret_list_theft():
    tr = run_distribution(100_000, (AttackCase.II, ALWAYS_Z), seed=7)
    meas = list(tr.table)
    inferred = infer_secret(tr.traitor_records(), meas, Party.A)
    all_z = [(m, v) for m, v in zip(meas, inferred) if m.all_same_basis is Basis.Z]
    assert len(all_z) >= 10_000
    matches = sum(v is trit_of(m.outcome[Qubit.a], m.outcome[Qubit.b]) for m, v in all_z)
    assert matches == len(all_z)


def test_criterion_8_end_to_end_protocol():
    honest = run_protocol(ProtocolConfig(rounds=200_000, seed=11, order=1))
    assert honest.verdict.status is Status.ACCEPT
    assert all(o == Agree(1) for o in honest.outcomes.values())

    equiv = run_protocol(ProtocolConfig(rounds=200_000, seed=11, traitor=Party.A))
    assert equiv.outcomes == {Party.B: TraitorDetected(Party.A), Party.C: TraitorDetected(Party.A)}

    for case, policy in ATTACKS:
        res = run_protocol(ProtocolConfig(rounds=200_000, case=case, policy=policy, seed=11))
        assert res.verdict.status is Status.ABORT, (case, policy)
        assert all(isinstance(o, AbortedAtVerification) for o in res.outcomes.values())
