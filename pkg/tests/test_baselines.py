import math

import numpy as np
import pytest

from netsde.baselines import (CascadeRecord, StepTooLargeError, empirical_marginals, gillespie_simulate,
                              meanfield_rhs, meanfield_solve, monte_carlo_marginals, read_cascades,
                              write_cascades)
from netsde.network import GeneratorConfig, build_network, generate


def test_meanfield_rhs_examples():
    net = build_network(2, [(0, 1, 1.0)])
    assert meanfield_rhs(net, [1.0, 0.0])[1] == 1.0
    net = build_network(2, [(0, 1, 1.0)], [0.0, 0.5])
    assert meanfield_rhs(net, [1.0, 0.4])[1] == pytest.approx(0.4)
    net = build_network(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
    assert np.all(meanfield_rhs(net, np.ones(3)) == 0)


def test_meanfield_isolated_source():
    net = build_network(3, [(1, 2, 1.0)])
    mf = meanfield_solve(net, [0], 2.0)
    assert np.all(mf.x == [1, 0, 0])


def test_meanfield_single_edge_exact():
    net = build_network(2, [(0, 1, 1.0)])
    mf = meanfield_solve(net, [0], 2.0, step=1e-3)
    assert np.max(np.abs(mf.x[:, 1] - (1 - np.exp(-mf.times)))) < 1e-6


def test_meanfield_grid_sampling():
    net = build_network(2, [(0, 1, 1.0)])
    mf = meanfield_solve(net, [0], 2.0, grid=[0.0, 0.5, 2.0])
    assert mf.times.tolist() == [0.0, 0.5, 2.0]
    assert mf.mu[-1] == pytest.approx(2 - math.exp(-2), abs=1e-8)


def test_meanfield_step_rejection():
    net = build_network(3, [(0, 1, 80.0), (0, 2, 80.0), (1, 2, 80.0)])
    with pytest.raises(StepTooLargeError):
        meanfield_solve(net, [0], 1.0, step=0.1)


def test_meanfield_monotone_without_recovery():
    net = generate(GeneratorConfig("sf", 50, kappa=2, seed=1))
    mf = meanfield_solve(net, [0, 1], 3.0)
    assert np.all(np.diff(mf.x, axis=0) >= -1e-15)


def test_gillespie_single_clock_law():
    net = build_network(2, [], [0.7, 0.0])
    t = np.array([0.5, 1.0, 2.0])
    em = monte_carlo_marginals(net, [0], 2.0, t, runs=100_000, seed=3)
    assert np.all(np.abs(em.marginals[:, 0] - np.exp(-0.7 * t)) < 3 * em.marginal_se[:, 0])


def test_gillespie_single_edge_law(edge2):
    t = np.array([0.5, 1.0, 2.0])
    em = monte_carlo_marginals(edge2, [0], 2.0, t, runs=100_000, seed=4)
    assert np.all(np.abs(em.marginals[:, 1] - (1 - np.exp(-t))) < 3 * em.marginal_se[:, 1])


def test_gillespie_saturated_start_is_constant():
    net = build_network(3, [(0, 1, 1.0), (1, 2, 1.0)])
    c = gillespie_simulate(net, [0, 1, 2], 5.0, rng=1)
    assert c.times.size == 0


def test_gillespie_record_structure():
    net = generate(GeneratorConfig("er", 40, recovery=(0.0, 0.4), seed=2))
    rng = np.random.default_rng(8)
    for _ in range(20):
        c = gillespie_simulate(net, [0, 1], 6.0, rng=rng)
        assert np.all(np.diff(c.times) > 0) and np.all(c.times <= 6.0)
        state = np.zeros(40, int)
        state[c.sources] = 1
        for node, kind in zip(c.nodes, c.kinds):
            assert state[node] == (0 if kind > 0 else 1)
            state[node] = 1 if kind > 0 else 0


def test_empirical_marginals_single_quiet_cascade():
    c = CascadeRecord(np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64), 1.0, np.array([1]))
    em = empirical_marginals([c], 3, [0.0, 0.5, 1.0])
    assert np.all(em.marginals == [0, 1, 0]) and np.all(em.marginal_se == 0)
    with pytest.raises(ValueError):
        empirical_marginals([], 3, [0.0])


def test_empirical_marginals_match_state_at():
    net = generate(GeneratorConfig("sw", 30, recovery=(0.0, 0.4), seed=1))
    rng = np.random.default_rng(1)
    cs = [gillespie_simulate(net, [3], 4.0, rng=rng) for _ in range(30)]
    grid = np.linspace(0, 4, 17)
    em = empirical_marginals(cs, 30, grid)
    direct = np.mean([[c.state_at(30, t) for t in grid] for c in cs], axis=0)
    assert np.allclose(em.marginals, direct)


def test_monte_carlo_nondecreasing_without_recovery():
    net = generate(GeneratorConfig("er", 60, seed=3))
    em = monte_carlo_marginals(net, [0, 5], 4.0, np.linspace(0, 4, 41), runs=500, seed=1)
    assert np.all(np.diff(em.mu) >= 0)


def test_monte_carlo_workers_identical():
    net = generate(GeneratorConfig("er", 40, recovery=(0.0, 0.4), seed=3))
    grid = np.linspace(0, 3, 7)
    a = monte_carlo_marginals(net, [0], 3.0, grid, runs=1200, seed=9, workers=1)
    b = monte_carlo_marginals(net, [0], 3.0, grid, runs=1200, seed=9, workers=4)
    assert np.array_equal(a.marginals, b.marginals) and np.array_equal(a.mu_var, b.mu_var)


def test_cascade_dump_round_trip(tmp_path):
    net = generate(GeneratorConfig("er", 20, recovery=(0.0, 0.4), seed=3))
    rng = np.random.default_rng(2)
    cs = [gillespie_simulate(net, [0, 4], 3.0, rng=rng) for _ in range(5)]
    p = tmp_path / "c.txt"
    write_cascades(cs, p, seed=2, config_hash=net.fingerprint())
    assert p.read_text().startswith("# seed=2")
    back = read_cascades(p)
    assert len(back) == 5
    for a, b in zip(cs, back):
        assert np.array_equal(a.times, b.times) and np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(a.kinds, b.kinds) and np.array_equal(a.sources, b.sources)


def test_cascade_dump_malformed(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# seed=0\n0.1 2 activated\n")
    with pytest.raises(ValueError, match=":2:"):
        read_cascades(p)
    p.write_text("# cascade 0 T=1.0 sources=0\n0.1 2 jumped\n")
    with pytest.raises(ValueError, match=":2:"):
        read_cascades(p)
