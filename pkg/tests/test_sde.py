import numpy as np
import pytest

from netsde.network import build_network
from netsde.sde import (EventList, JumpIncrements, coeff_b, coeff_matrix, euler_step, jump_adapted_replay,
                        simulate_trajectory, taylor2_step)


def inc(net, dR=None, dN=None):
    r = np.zeros(net.n, np.int64)
    q = np.zeros(net.m, np.int64)
    for k, v in (dR or {}).items():
        r[k] = v
    for k, v in (dN or {}).items():
        q[k] = v
    return JumpIncrements(r, q)


def edge_id(net, i, j):
    return int(np.flatnonzero((net.src == i) & (net.dst == j))[0])


def test_coeff_b_zero_state():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 2.0), (0, 1, 1.0)])
    assert all(not b.any() for b in coeff_b(net, [0, 0, 0]))


def test_coeff_b_two_parents():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 2.0)])
    assert list(coeff_b(net, [1, 1, 0])[2]) == [1, 1]
    assert list(coeff_b(net, [1, 1, 1])[2]) == [0, 0]


def test_coeff_b_saturated_state_is_zero():
    net = build_network(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
    assert all(not b.any() for b in coeff_b(net, [1, 1, 1]))


def test_coeff_matrix_layout():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 2.0)])
    c = coeff_matrix(net, [1, 1, 0]).toarray()
    assert c.shape == (3, 5)
    assert np.array_equal(c[:, :3], -np.diag([1, 1, 0]))
    assert np.array_equal(c[2, 3:], [1, 1])


def test_euler_chain_uses_step_start_state(chain3):
    out = euler_step(chain3, [1, 0, 0], inc(chain3, dN={edge_id(chain3, 0, 1): 1, edge_id(chain3, 1, 2): 1}))
    assert list(out) == [1, 1, 0]


def test_euler_recovery_and_activation_read_pre_step_state(chain3_rec):
    net = chain3_rec
    out = euler_step(net, [1, 1, 0], inc(net, dR={1: 1}, dN={edge_id(net, 1, 2): 1}))
    assert list(out) == [1, 0, 1]


def test_zero_increment_is_identity(chain3):
    for X in ([1, 0, 0], [1, 1, 0], [0, 1, 1]):
        assert list(euler_step(chain3, X, JumpIncrements.zeros(chain3))) == X
        assert list(taylor2_step(chain3, X, JumpIncrements.zeros(chain3))) == X


def test_euler_clamps_multiple_activations():
    net = build_network(3, [(0, 2, 1.0), (1, 2, 1.0)])
    out = euler_step(net, [1, 1, 0], inc(net, dN={0: 3, 1: 2}))
    assert list(out) == [1, 1, 1]


def test_euler_clamps_repeated_recovery():
    net = build_network(2, [(0, 1, 1.0)], [2.0, 0.0])
    assert list(euler_step(net, [1, 0], inc(net, dR={0: 3}))) == [0, 0]


def test_taylor2_equals_euler_for_unit_increments(chain3_rec):
    rng = np.random.default_rng(0)
    for _ in range(50):
        X = rng.integers(0, 2, 3)
        j = JumpIncrements(rng.integers(0, 2, 3), rng.integers(0, 2, 2))
        assert np.array_equal(euler_step(chain3_rec, X, j), taylor2_step(chain3_rec, X, j))


def test_taylor2_golden_chain(chain3):
    # predictor (1,1,0); correction on node 1 is (0 - 1) * 2 * 1 / 2 = -1, node 2 none
    j = inc(chain3, dN={edge_id(chain3, 0, 1): 2, edge_id(chain3, 1, 2): 1})
    assert list(taylor2_step(chain3, [1, 0, 0], j)) == [1, 1, 0]


def test_taylor2_golden_two_parents():
    # X=(1,0,0) on 0->1, 0->2, 1->2 with dN = (1, 2, 2): predictor (1,1,1)
    net = build_network(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
    j = inc(net, dN={edge_id(net, 0, 1): 1, edge_id(net, 0, 2): 2, edge_id(net, 1, 2): 2})
    # raw node 2: 0 + 2 + (b_half - b_0).w = 2 + ((0,0) - (1,0)).(1,1) = 1
    assert list(taylor2_step(net, [1, 0, 0], j)) == [1, 1, 1]


def test_replay_single_event(edge2):
    tr = jump_adapted_replay(edge2, [0], EventList([0.3], [2]))
    assert list(tr.at(0.29)) == [1, 0]
    assert list(tr.at(0.3)) == [1, 1]
    assert list(tr.at(5.0)) == [1, 1]
    assert tr.activation_times[1] == 0.3


def test_replay_empty(edge2):
    tr = jump_adapted_replay(edge2, [0], EventList([], []))
    assert list(tr.at(10.0)) == [1, 0]


def test_replay_inactive_parent_is_noop(chain3):
    tr = jump_adapted_replay(chain3, [0], EventList([0.1], [3 + edge_id(chain3, 1, 2)]))
    assert tr.times.tolist() == [0.0]


def test_replay_recovery(chain3_rec):
    ev = EventList([0.1, 0.2, 0.3], [3 + 0, 1, 3 + 1])
    tr = jump_adapted_replay(chain3_rec, [0], ev)
    assert list(tr.at(0.15)) == [1, 1, 0]
    assert list(tr.at(0.25)) == [1, 0, 0]
    assert list(tr.at(0.35)) == [1, 0, 0]


def test_event_list_rejects_unsorted():
    with pytest.raises(ValueError, match="not sorted"):
        EventList([0.2, 0.1], [0, 1])
    with pytest.raises(ValueError, match="not sorted"):
        EventList([0.1, 0.1], [3, 1])
    ev = EventList.from_unsorted([0.2, 0.1, 0.1], [0, 3, 1])
    assert ev.pids.tolist() == [1, 3, 0]


def test_jump_increments_reject_negative():
    with pytest.raises(ValueError):
        JumpIncrements([0, -1], [0])


def test_simulate_zero_schedule(chain3):
    tr = simulate_trajectory(chain3, [0], [JumpIncrements.zeros(chain3)] * 5, 0.2)
    assert tr.states.shape == (6, 3)
    assert np.all(tr.states == [1, 0, 0])
    assert np.allclose(tr.times, 0.2 * np.arange(6))


def test_simulate_activation_shows_from_next_grid_point(edge2):
    K = 6
    dN = np.zeros((K, 1), np.int64)
    dN[3, 0] = 1
    tr = simulate_trajectory(edge2, [0], (np.zeros((K, 2), np.int64), dN), 0.1)
    assert tr.states[:4, 1].tolist() == [0, 0, 0, 0]
    assert tr.states[4:, 1].tolist() == [1, 1, 1]


def test_simulate_dimension_mismatch(edge2):
    with pytest.raises(ValueError, match="dimensions"):
        simulate_trajectory(edge2, [0], [JumpIncrements([0], [0])], 0.1)
    with pytest.raises(ValueError):
        simulate_trajectory(edge2, [0], [], 0.1, stepper="jump-adapted")
