import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdfu.simulator import (ExperimentConfig, InputChange, LossModel, Scenario, SimulationError,
                            UndefinedMetrics, counting_scenario, dynamic_scenario, round_metrics,
                            run, run_many, sample_nodes)
from mdfu.topology import generate_er

from conftest import random_connected_graph


def test_two_node_run(two_nodes):
    res = run(ExperimentConfig(two_nodes, Scenario([1.0, 0.0]), "mdfu", 0.0, 2))
    assert [m.round for m in res.metrics] == [0, 1, 2]
    assert res.metrics[0].max_rel_err == 1.0
    assert [m.max_rel_err for m in res.metrics[1:]] == [0.0, 0.0]
    errs = res.series("max_rel_err")
    assert np.all(np.diff(errs) <= 0)


@pytest.mark.parametrize("proto", ["mdfu", "mdfu-lp", "push-synopses"])
def test_equal_inputs_stay_exact(proto):
    g = generate_er(40, 120, 3)
    res = run(ExperimentConfig(g, Scenario(np.full(40, 2.5)), proto, 0.0, 30))
    # s/w division rounds; the flow protocols stay exact.
    tol = 1e-14 if proto == "push-synopses" else 0.0
    assert np.all(res.series("cv_rmse") <= tol)


def test_record_estimates_includes_round_zero(path3):
    res = run(ExperimentConfig(path3, Scenario([3.0, 0.0, 0.0]), rounds=4, record_estimates=True))
    assert res.estimates.shape == (5, 3)
    assert res.estimates[0].tolist() == [3.0, 0.0, 0.0]


def test_zero_mean_is_rejected(two_nodes):
    with pytest.raises(UndefinedMetrics):
        run(ExperimentConfig(two_nodes, Scenario([1.0, -1.0]), rounds=3))


@pytest.mark.parametrize("kwargs", [dict(rounds=0), dict(f=1.0), dict(protocol="drg")])
def test_config_validation(two_nodes, kwargs):
    with pytest.raises(SimulationError):
        run(ExperimentConfig(two_nodes, Scenario([1.0, 0.0]), **kwargs))


def test_push_synopses_refuses_dynamic_inputs(two_nodes):
    sc = Scenario([1.0, 2.0], [InputChange(2, 0, "mul", 2.0)])
    with pytest.raises(SimulationError):
        run(ExperimentConfig(two_nodes, sc, "push-synopses", rounds=3))


def test_scenario_validation():
    with pytest.raises(SimulationError):
        Scenario([1.0, 2.0], [InputChange(3, 0, "mul", 2.0), InputChange(2, 0, "mul", 2.0)])
    with pytest.raises(SimulationError):
        Scenario([1.0, 2.0], [InputChange(1, 5, "set", 2.0)])
    with pytest.raises(SimulationError):
        Scenario([1.0, 2.0], [InputChange(0, 0, "set", 2.0)])


def test_metrics_formulae():
    m = round_metrics(3, np.array([1.0, 3.0]), np.array([2.0, 2.0]))
    assert m.cv_rmse == 0.5
    assert m.max_rel_err == 0.5
    assert m.mean_estimate == 2.0
    assert m.node_mass_fraction == 1.0


# -- loss model ---------------------------------------------------------------

def test_loss_scalar_and_vector_agree():
    lm = LossModel(0.3, 12345)
    src = np.array([0, 1, 5, 9, 2])
    dst = np.array([1, 0, 7, 3, 8])
    vec = lm.uniforms(17, src, dst)
    assert vec.tolist() == [lm.uniform(17, int(a), int(b)) for a, b in zip(src, dst)]
    assert lm.drop_mask(17, src, dst).tolist() == [lm.dropped(17, int(a), int(b)) for a, b in zip(src, dst)]


def test_loss_is_order_independent():
    lm = LossModel(0.5, 3)
    src = np.arange(50)
    dst = (src * 7 + 1) % 50
    perm = np.random.default_rng(0).permutation(50)
    assert np.array_equal(lm.drop_mask(4, src, dst)[perm], lm.drop_mask(4, src[perm], dst[perm]))


@pytest.mark.parametrize("f", [0.01, 0.1, 0.5, 0.8])
def test_empirical_loss_rate(f):
    g = generate_er(100, 500, 1)
    src, dst = g.directed_edges()
    lm = LossModel(f, 99)
    rounds = 200
    drops = sum(int(lm.drop_mask(r, src, dst).sum()) for r in range(1, rounds + 1))
    trials = rounds * len(src)
    sigma = np.sqrt(trials * f * (1 - f))
    assert abs(drops - trials * f) <= 5 * sigma


def test_zero_loss_never_drops():
    lm = LossModel(0.0, 7)
    assert not lm.drop_mask(1, np.arange(10), np.arange(10)[::-1]).any()
    assert not lm.dropped(1, 0, 1)


# -- scenarios ----------------------------------------------------------------

def test_counting_scenario():
    assert counting_scenario(1).inputs.tolist() == [1.0]
    sc = counting_scenario(1000, 5)
    assert sc.inputs.sum() == 1.0 and np.count_nonzero(sc.inputs) == 1
    assert sc.inputs.mean() == pytest.approx(0.001)
    assert np.array_equal(sc.inputs, counting_scenario(1000, 5).inputs)


def test_dynamic_scenario_defaults():
    sc = dynamic_scenario(1000, 2)
    assert sc.inputs.min() >= 25.0 and sc.inputs.max() <= 35.0
    nodes = {c.node for c in sc.changes}
    assert len(nodes) == 500
    ups = [c for c in sc.changes if c.value == 1.05]
    downs = [c for c in sc.changes if c.value == 0.95]
    assert {c.round for c in ups} == set(range(50, 100))
    assert {c.round for c in downs} == set(range(100, 150))
    assert len(ups) == len(downs) == 500 * 50


def test_dynamic_scenario_inverse_and_zero_rate():
    assert dynamic_scenario(10, 0, rate=0.0).changes == []
    sc = dynamic_scenario(10, 0, decrease="inverse", window=3)
    v = sc.inputs_at(10)
    assert np.allclose(v, sc.inputs, rtol=1e-12)


def test_single_change_moves_true_mean(path3):
    v = np.array([2.0, 4.0, 6.0])
    sc = Scenario(v, [InputChange(2, 1, "mul", 1.05)])
    res = run(ExperimentConfig(path3, sc, rounds=3))
    tm = res.series("true_mean")
    assert tm[1] == pytest.approx(4.0)
    assert tm[2] == pytest.approx((2.0 + 4.0 * 1.05 + 6.0) / 3.0, rel=1e-15)
    assert tm[2] / tm[1] - 1.0 == pytest.approx(0.05 * (4.0 / 12.0))


def test_static_scenario_equal_to_rate_zero():
    g = generate_er(30, 80, 4)
    a = run(ExperimentConfig(g, dynamic_scenario(30, 1, rate=0.0), "mdfu", 0.1, 40, 3))
    b = run(ExperimentConfig(g, Scenario(dynamic_scenario(30, 1).inputs), "mdfu", 0.1, 40, 3))
    assert a.metrics == b.metrics


# -- runners ------------------------------------------------------------------

def test_run_many_single_seed_matches_run():
    g = generate_er(50, 150, 2)
    cfg = ExperimentConfig(g, counting_scenario(50, 2), "mdfu", 0.2, 40, 0)
    agg = run_many(cfg, [11])
    single = run(ExperimentConfig(g, cfg.scenario, "mdfu", 0.2, 40, 11))
    for k in ("cv_rmse", "max_rel_err", "mean_estimate"):
        assert np.array_equal(agg.mean[k], single.series(k))
        assert np.all(agg.std[k] == 0.0)


def test_run_many_without_loss_has_no_spread():
    g = generate_er(50, 150, 2)
    agg = run_many(ExperimentConfig(g, counting_scenario(50, 2), "mdfu", 0.0, 30), range(30))
    # Identical runs; any spread left is rounding in the mean itself.
    for k, s in agg.std.items():
        assert np.all(s <= 1e-12 * np.maximum(np.abs(agg.mean[k]), 1e-300)), k


def test_run_many_needs_seeds(two_nodes):
    with pytest.raises(SimulationError):
        run_many(ExperimentConfig(two_nodes, Scenario([1.0, 0.0])), [])


def test_runs_are_deterministic():
    g = generate_er(60, 200, 9)
    cfg = ExperimentConfig(g, counting_scenario(60, 1), "mdfu-lp", 0.4, 60, 5)
    assert run(cfg).metrics == run(cfg).metrics


def test_engines_agree_with_loss_and_changes():
    g = generate_er(25, 60, 8)
    sc = dynamic_scenario(25, 3, start=5, window=5)
    for proto in ("mdfu", "mdfu-lp"):
        cfg = ExperimentConfig(g, sc, proto, 0.3, 20, 4, record_estimates=True)
        assert np.array_equal(run(cfg).estimates, run(cfg, engine="nodes").estimates)


def test_sample_nodes():
    assert sample_nodes(10, 10) == list(range(10))
    assert sample_nodes(10, 0) == []
    a = sample_nodes(1000, 100, 4)
    assert a == sample_nodes(1000, 100, 4) and len(set(a)) == 100
    with pytest.raises(SimulationError):
        sample_nodes(5, 6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["mdfu", "mdfu-lp", "push-synopses"]),
       st.floats(0.0, 0.7))
def test_metric_invariants(seed, proto, f):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(2, 30)))
    v = rng.uniform(0.5, 3.0, g.n)
    res = run(ExperimentConfig(g, Scenario(v), proto, f, 25, seed))
    for m in res.metrics:
        assert m.cv_rmse >= 0.0 and m.max_rel_err >= 0.0
        assert m.cv_rmse <= m.max_rel_err * (1 + 1e-12)
    if f == 0.0 and proto == "mdfu":
        assert np.allclose(res.series("node_mass_fraction"), 1.0, atol=1e-9)
