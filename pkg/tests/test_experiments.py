import math
from types import SimpleNamespace

import numpy as np
import pytest

from netsde.experiments import (METHODS, IncompatibleConfigError, SweepSpec, convergence_study, error_curves,
                                predict, robustness_sweep, vr_study)
from netsde.network import GeneratorConfig, build_network, generate
from netsde.ratemodel import NetworkRates


def curves(times, mu, marg):
    return SimpleNamespace(times=np.asarray(times, float), mu=np.asarray(mu, float),
                           marginals=np.asarray(marg, float))


def test_error_curves_identical():
    c = curves([0, 1, 2], [1, 2, 3], [[1, 0], [1, 1], [1, 2]])
    r = error_curves(c, c)
    assert np.all(r.rel_influence == 0) and np.all(r.rel_marginal == 0) and r.max_abs == 0


def test_error_curves_arithmetic():
    est = curves([0, 1], [1.1, 1.1], [[1.1, 0], [1.1, 0]])
    tru = curves([0, 1], [1.0, 1.0], [[1.0, 0], [1.0, 0]])
    r = error_curves(est, tru)
    assert r.rel_influence == pytest.approx([0.1, 0.1])
    assert r.max_abs == pytest.approx(0.1)


def test_error_curves_marginal_example():
    est = curves([0], [1.5], [[1.0, 0.5]])
    tru = curves([0], [1.4], [[1.0, 0.4]])
    assert error_curves(est, tru).rel_marginal[0] == pytest.approx(0.1 / 1.4)


def test_error_curves_skip_zero_denominator():
    r = error_curves(curves([0], [0.5], [[0.5]]), curves([0], [0.0], [[0.0]]))
    assert math.isnan(r.rel_influence[0]) and math.isnan(r.rel_marginal[0])
    assert r.max_abs == 0.5


def test_error_curves_right_continuous_truth():
    tru = curves([0.0, 0.5, 1.0], [1.0, 2.0, 3.0], [[1.0], [2.0], [3.0]])
    est = curves([0.0, 0.25, 0.5, 0.75, 1.0], [1.0, 1.0, 2.0, 2.0, 3.0], [[1.0], [1.0], [2.0], [2.0], [3.0]])
    assert error_curves(est, tru).max_abs == 0.0


def test_error_curves_invariant_to_truth_refinement():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 11)
    mu = np.cumsum(rng.random(11))
    tru = curves(t, mu, mu[:, None])
    fine_t = np.linspace(0, 1, 101)
    k = np.searchsorted(t, fine_t + 1e-12, side="right") - 1
    fine = curves(fine_t, mu[k], mu[k][:, None])
    est = curves(t, mu * 1.05, (mu * 1.05)[:, None])
    a, b = error_curves(est, tru), error_curves(est, fine)
    assert np.allclose(a.rel_influence, b.rel_influence) and a.max_abs == pytest.approx(b.max_abs)


def test_error_curves_disjoint_grids():
    with pytest.raises(ValueError):
        error_curves(curves([5, 6], [1, 1], [[1], [1]]), curves([0, 1], [1, 1], [[1], [1]]))


def test_predict_all_methods_share_grid():
    net = generate(GeneratorConfig("er", 30, seed=1))
    outs = {m: predict(m, net, [0], 1.0, 0.1, 200, seed=1) for m in METHODS}
    for c in outs.values():
        assert c.times.shape == (11,) and c.marginals.shape == (11, 30)
        assert c.mu[0] == 1.0


def test_predict_rejects_incompatible_rate_model():
    net = build_network(2, [(0, 1, 1.0)])
    rates = NetworkRates.weibull(net, 2.0)
    for m in ("meanfield", "mc-oracle", "sde-taylor2"):
        with pytest.raises(IncompatibleConfigError):
            predict(m, net, [0], 1.0, 0.1, 10, rates=rates)
    assert predict("sde-euler", net, [0], 1.0, 0.1, 10, rates=rates).mu.shape == (11,)
    assert predict("sde-jump-adapted", net, [0], 1.0, 0.1, 10, rates=rates).mu.shape == (11,)
    with pytest.raises(ValueError):
        predict("contin", net, [0], 1.0, 0.1, 10)


def test_convergence_study_needs_three_steps(edge2):
    with pytest.raises(ValueError):
        convergence_study(edge2, [0], 0.8, [0.4, 0.2], L=100)


def test_convergence_study_flags_zero_bias(edge2):
    res = convergence_study(edge2, [0], 0.8, [0.4, 0.2, 0.1], L=2000, seed=1)
    assert res.inconclusive["euler"] and math.isnan(res.slope)


def test_convergence_study_two_node_recovery():
    net = build_network(2, [(0, 1, 1.0)], [1.0, 0.0])
    res = convergence_study(net, [0], 2.0, [0.4, 0.2, 0.1], L=100_000, seed=2)
    assert not res.inconclusive["euler"] and 0.6 <= res.slope <= 1.4


def test_convergence_study_gillespie_reference():
    net = build_network(2, [(0, 1, 1.0)], [1.0, 0.0])
    res = convergence_study(net, [0], 2.0, [0.4, 0.2, 0.1], L=40_000, seed=3, reference="gillespie")
    assert res.reference == "gillespie"
    exact = math.exp(-2) + 0.5 * (1 - math.exp(-4))
    assert abs(res.reference_mean - exact) < 0.02
    assert np.all(res.bias["euler"] > 0)


def test_vr_study_control_arms_identical():
    net = generate(GeneratorConfig("er", 30, seed=2))
    r = vr_study(net, [0], 1.0, 0.1, [4, 8], 5, truth=3.0, seed=1, arms=(True, False))
    r2 = vr_study(net, [0], 1.0, 0.1, [4, 8], 5, truth=3.0, seed=1, arms=(False,))
    assert np.array_equal(r.errors[False], r2.errors[False])
    assert np.array_equal(r.mse[False], r2.mse[False])


def test_vr_study_mse_decreases_with_L():
    net = generate(GeneratorConfig("er", 40, seed=2))
    r = vr_study(net, [0, 1], 2.0, 0.1, [4, 64], 40, truth=predict("mc-oracle", net, [0, 1], 2.0, 0.1, 20_000,
                                                                     seed=5).mu[-1], seed=3)
    for a in r.arms:
        assert r.mse[a][1] < r.mse[a][0]
        lo, hi = r.ci[a]
        assert np.all(lo <= r.mse[a]) and np.all(r.mse[a] <= hi)


def test_vr_study_rejects_odd_L():
    net = build_network(2, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        vr_study(net, [0], 1.0, 0.1, [5], 3, truth=1.0)


def test_robustness_sweep_shapes_and_std_guard():
    spec = SweepSpec("sources", [2, 4], repeats=1, n=40, T=1.0, h=0.1, L=50, truth_runs=200, seed=1)
    res = robustness_sweep("er", spec, ("sde-euler", "meanfield"))
    assert [r.method for r in res] == ["sde-euler", "meanfield"]
    for r in res:
        assert r.raw.shape == (2, 1) and r.std is None and np.all(r.raw >= 0)
    spec = SweepSpec("density", [2, 3], repeats=2, n=40, T=1.0, h=0.1, L=50, truth_runs=200, seed=1)
    res = robustness_sweep("sw", spec, ("meanfield",))
    assert res[0].std.shape == (2,)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("colour", [1])
