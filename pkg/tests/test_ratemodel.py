import math

import numpy as np
import pytest

from netsde.baselines import monte_carlo_marginals
from netsde.network import GeneratorConfig, build_network, generate
from netsde.ratemodel import (AugmentedState, Constant, NetworkRates, Throttled, UnsupportedHazardError, Weibull,
                              augmented_clock_update, edge_intensity, sde_simulate_time_varying,
                              thinning_marginals, thinning_simulate, time_varying_marginals)
from netsde.sampling import SamplePlan, run_estimator


def test_edge_intensity_examples():
    assert edge_intensity(Weibull(1.0, 2.0), 0.5) == pytest.approx(1.0)
    for u in (0.0, 0.3, 7.0):
        assert edge_intensity(Weibull(0.7, 1.0), u) == 0.7
        assert edge_intensity(Constant(0.7), u) == 0.7
    assert edge_intensity(Throttled(1.5), 0.0, [1, 1], [1.0, 1.0]) == 1.5
    assert edge_intensity(Throttled(3.0), 0.0, [1, 0, 1], [1.0, 5.0, 1.0]) == 2.0


def test_edge_intensity_errors():
    with pytest.raises(UnsupportedHazardError):
        edge_intensity(Weibull(1.0, 0.5), 0.0)
    with pytest.raises(ValueError):
        edge_intensity(Constant(1.0), -1.0)
    with pytest.raises(ValueError):
        edge_intensity(Throttled(1.0), 0.0)
    with pytest.raises(ValueError):
        Weibull(1.0, 0.0)
    with pytest.raises(ValueError):
        Constant(0.0)
    with pytest.raises(ValueError):
        Throttled(-1.0)


def test_weibull_hazard_increasing():
    u = np.linspace(0.01, 3, 50)
    hz = [edge_intensity(Weibull(0.8, 2.5), x) for x in u]
    assert np.all(np.diff(hz) > 0)


def test_clock_update_examples():
    s = AugmentedState([1, 0, 1], [0.2, 0.0, 0.0])
    s2 = augmented_clock_update(s, 0.3)
    assert s2.U.tolist() == pytest.approx([0.5, 0.0, 0.3])
    s3 = augmented_clock_update(s2, 0.1, recovered=[0])
    assert s3.X.tolist() == [0, 0, 1] and s3.U.tolist() == pytest.approx([0.0, 0.0, 0.4])
    with pytest.raises(ValueError):
        augmented_clock_update(s, -0.1)


def test_augmented_state_invariants():
    with pytest.raises(ValueError):
        AugmentedState([0, 1], [0.5, 0.0])
    with pytest.raises(ValueError):
        AugmentedState([1, 1], [-0.5, 0.0])
    with pytest.raises(ValueError):
        AugmentedState([2, 1], [0.0, 0.0])


def test_network_rates_validation():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 2.0)])
    with pytest.raises(UnsupportedHazardError):
        NetworkRates.weibull(net, 0.5)
    with pytest.raises(UnsupportedHazardError):
        NetworkRates(net, [2.0, 1.0], [np.inf, np.inf, 1.0])
    with pytest.raises(ValueError):
        NetworkRates(net, [1.0], [np.inf] * 3)
    r = NetworkRates.from_models(net, [Weibull(1.0, 2.0), Constant(2.0)])
    assert r.shape.tolist() == [2.0, 1.0] and not r.is_constant
    r = NetworkRates.from_models(net, [Throttled(1.5), Throttled(1.5)])
    assert r.cap.tolist()[2] == 1.5
    with pytest.raises(ValueError):
        NetworkRates.from_models(net, [Constant(3.0), Constant(2.0)])
    assert NetworkRates.weibull(net, 1.0).is_constant


def test_node_intensity_matches_edge_intensity():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 2.0)])
    r = NetworkRates.throttled(net, 1.5)
    lam = r.node_intensity([1, 1, 0], [0.0, 0.0, 0.0])
    assert lam[2] == edge_intensity(Throttled(1.5), 0.0, [1, 1], [1.0, 2.0])
    r = NetworkRates.weibull(net, 2.0)
    lam = r.node_intensity([1, 0, 0], [0.5, 0.0, 0.0])
    assert lam[2] == pytest.approx(edge_intensity(Weibull(1.0, 2.0), 0.5))


def test_thinning_isolated_source_has_no_events():
    net = build_network(3, [(1, 2, 1.0)])
    tr = thinning_simulate(net, NetworkRates.weibull(net, 2.0), [0], 5.0, rng=1)
    assert tr.times.tolist() == [0.0] and tr.states.tolist() == [[1, 0, 0]]


def test_thinning_path_invariants():
    net = generate(GeneratorConfig("er", 30, recovery=(0.0, 0.4), seed=3))
    tr = thinning_simulate(net, NetworkRates.weibull(net, 2.0), [0, 1], 4.0, rng=2)
    assert np.all(np.diff(tr.times) > 0)
    assert np.all((tr.clocks >= 0) & (tr.clocks <= tr.times[:, None] + 1e-12))
    assert np.all(tr.clocks[tr.states == 0] == 0)


def test_rayleigh_single_edge_law():
    net = build_network(2, [(0, 1, 1.0)])
    t = np.array([0.5, 1.0, 1.5])
    em = thinning_marginals(net, NetworkRates.weibull(net, 2.0), [0], 1.5, t, runs=20_000, seed=4)
    assert np.all(np.abs(em.marginals[:, 1] - (1 - np.exp(-t ** 2))) < 3 * em.marginal_se[:, 1] + 1e-12)


def test_thinning_constant_matches_gillespie():
    net = build_network(3, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.3), (2, 0, 0.6)], [0.5, 0.2, 0.4])
    grid = [0.5, 1.0, 2.0]
    a = thinning_marginals(net, None, [0], 2.0, grid, runs=40_000, seed=1)
    b = monte_carlo_marginals(net, [0], 2.0, grid, runs=40_000, seed=2)
    se = np.hypot(a.marginal_se, b.marginal_se)
    assert np.all(np.abs(a.marginals - b.marginals) <= 3 * se + 1e-12)


def test_weibull_shape_one_is_constant_path():
    net = generate(GeneratorConfig("er", 20, recovery=(0, 0.4), seed=1))
    a = thinning_marginals(net, NetworkRates.weibull(net, 1.0), [0], 2.0, [1.0, 2.0], runs=500, seed=3)
    b = thinning_marginals(net, NetworkRates.constant(net), [0], 2.0, [1.0, 2.0], runs=500, seed=3)
    assert np.array_equal(a.marginals, b.marginals)


def test_time_varying_euler_constant_rates_agree_with_euler():
    net = generate(GeneratorConfig("er", 20, recovery=(0, 0.4), seed=5))
    tv = time_varying_marginals(net, None, [0], SamplePlan(2.0, 0.1, 20_000, seed=1))
    eu = run_estimator(net, [0], SamplePlan(2.0, 0.1, 20_000, seed=2, antithetic=False))
    se = np.hypot(tv.se, eu.se)
    assert np.all(np.abs(tv.mu - eu.mu) <= 4 * se + 1e-12)


def test_time_varying_clocks_reset_for_inactive_nodes():
    net = generate(GeneratorConfig("er", 25, recovery=(0, 0.8), seed=2))
    tr = sde_simulate_time_varying(net, NetworkRates.weibull(net, 2.0), [0, 1], 3.0, 0.1, rng=3)
    assert tr.states.shape == (31, 25)
    assert np.all(tr.clocks[tr.states == 0] == 0)
    assert np.all(tr.clocks <= tr.times[:, None] + 1e-9)


def test_time_varying_rayleigh_refines_towards_law():
    net = build_network(2, [(0, 1, 1.0)])
    rates = NetworkRates.weibull(net, 2.0)
    exact = 1 - math.exp(-1.6 ** 2)
    errs = []
    for h in (0.2, 0.05):
        em = time_varying_marginals(net, rates, [0], SamplePlan(1.6, h, 40_000, seed=7))
        errs.append(abs(em.marginals[-1, 1] - exact))
    assert errs[0] > errs[1]


def test_throttled_cap_slows_activation():
    net = build_network(3, [(0, 2, 2.0), (1, 2, 2.0)])
    capped = thinning_marginals(net, NetworkRates.throttled(net, 1.0), [0, 1], 1.0, [1.0], runs=20_000, seed=1)
    # capped intensity is exactly 1, so P(active at 1) = 1 - e^-1
    p = capped.marginals[0, 2]
    assert abs(p - (1 - math.exp(-1))) < 3 * capped.marginal_se[0, 2]
