import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdba.adversary import ALWAYS_X, ALWAYS_Z, AttackCase
from qdba.correlators import ALL_KEYS, CorrelatorEstimate, CorrelatorKey, estimate_all, predictions, table1_reference
from qdba.detector import DetectorConfig, Status, decide, z_score
from qdba.protocol import run_distribution

PRED = predictions()


def at_prediction(n=1000):
    return [CorrelatorEstimate.from_value(k, PRED[k], n) for k in ALL_KEYS]


def test_table1_accepts_with_max_z_at_ac_x():
    rows = table1_reference()
    verdict = decide([r.as_estimate() for r in rows], {r.key: float(r.theory) for r in rows})
    assert verdict.status is Status.ACCEPT
    key, z = verdict.max_z
    assert key == CorrelatorKey.of("a", "c", "X")
    # plain arithmetic on the printed row
    assert z == pytest.approx((2 / 3 - 0.602) / 0.021, abs=5e-3)
    assert z == pytest.approx(3.08, abs=0.01)


def test_attack_signature_aborts():
    key = CorrelatorKey.of("a", "b", "X")
    ests = at_prediction()
    ests[ALL_KEYS.index(key)] = CorrelatorEstimate.from_value(key, 0.0, 1600)  # 0.000 ± 0.025
    verdict = decide(ests, PRED)
    assert verdict.status is Status.ABORT
    assert verdict.violated_keys == (key,)
    v = verdict.violations[0]
    assert v.z_score == pytest.approx((1 / 3) / 0.025, rel=1e-9)
    assert v.z_score == pytest.approx(13.3, abs=0.05)
    assert v.predicted == PRED[key]


def test_exact_match_accepts():
    verdict = decide(at_prediction(200), PRED)
    assert verdict.status is Status.ACCEPT
    assert max(verdict.z_scores.values()) == 0


def test_insufficient_samples():
    ests = at_prediction()
    ests[3] = CorrelatorEstimate.from_value(ALL_KEYS[3], PRED[ALL_KEYS[3]], 199)
    verdict = decide(ests, PRED, DetectorConfig(min_samples_per_key=200))
    assert verdict.status is Status.INSUFFICIENT
    assert verdict.insufficient_keys == (ALL_KEYS[3],)


def test_missing_key_rejected():
    with pytest.raises(ValueError, match="missing"):
        decide(at_prediction()[:-1], PRED)


def test_zero_stderr():
    k = ALL_KEYS[0]
    assert z_score(CorrelatorEstimate(k, 1.0, 0.0, 10), 1.0) == 0
    assert z_score(CorrelatorEstimate(k, 1.0, 0.0, 10), 1 / 3) == math.inf
    ests = at_prediction()
    ests[0] = CorrelatorEstimate(k, 1.0, 0.0, 500)
    assert decide(ests, PRED).status is Status.ABORT


def test_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(threshold_sigma=0)
    with pytest.raises(ValueError):
        DetectorConfig(min_samples_per_key=0)


estimate_lists = st.lists(
    st.tuples(st.floats(-1, 1), st.integers(200, 5000)), min_size=12, max_size=12
)


@settings(max_examples=100, deadline=None)
@given(estimate_lists, st.floats(0.5, 10), st.floats(0, 10))
def test_monotone_in_threshold(vals, t, dt):
    ests = [CorrelatorEstimate.from_value(k, v, n) for k, (v, n) in zip(ALL_KEYS, vals)]
    if decide(ests, PRED, DetectorConfig(t)).status is Status.ACCEPT:
        assert decide(ests, PRED, DetectorConfig(t + dt)).status is Status.ACCEPT


@settings(max_examples=50, deadline=None)
@given(estimate_lists, st.randoms(use_true_random=False))
def test_order_independent(vals, rnd):
    ests = [CorrelatorEstimate.from_value(k, v, n) for k, (v, n) in zip(ALL_KEYS, vals)]
    shuffled = list(ests)
    rnd.shuffle(shuffled)
    assert decide(ests, PRED) == decide(shuffled, PRED)


# power ----------------------------------------------------------------------

# 4e4 rounds put about 1e4 samples on each cross-party key (both parties pick the axis w.p. 1/4)
ROUNDS = 40_000
SEEDS = range(100)


@pytest.mark.parametrize("case", [AttackCase.I, AttackCase.II, AttackCase.III])
@pytest.mark.parametrize("policy", [ALWAYS_Z, ALWAYS_X], ids=str)
def test_power_on_attacked_data(case, policy):
    aborts = 0
    for seed in SEEDS:
        tr = run_distribution(ROUNDS, (case, policy), seed=seed)
        aborts += decide(estimate_all(tr.table).values(), PRED).status is Status.ABORT
    assert aborts >= 99


def test_honest_acceptance_rate():
    accepts = 0
    for seed in SEEDS:
        tr = run_distribution(ROUNDS, seed=10_000 + seed)
        ests = estimate_all(tr.table)
        assert min(e.n for e in ests.values()) > 9000
        accepts += decide(ests.values(), PRED).status is Status.ACCEPT
    assert accepts >= 95
