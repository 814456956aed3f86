import math

import numpy as np
import pytest

from qdqn_dper.agent import (
    batch_loss_and_gradient,
    decay_epsilon,
    loss_matrix,
    matrix_loss,
    matrix_loss_value,
    select_action,
    td_loss_value,
    td_targets,
)
from qdqn_dper.model import ModelParams, Variant, forward, init_params
from qdqn_dper.replay import Trajectory


def constant_q(values, variant=Variant.QUANTUM):
    p = init_params(np.random.default_rng(0), variant)
    p.post_weights[...] = 0.0
    p.post_bias[...] = values
    return p


def random_trajectory(rng, n, done=False):
    return Trajectory(rng.normal(scale=0.3, size=(n, 4)), rng.integers(0, 2, n), np.ones(n),
                      rng.normal(scale=0.3, size=(n, 4)), [False] * (n - 1) + [done])


def test_full_exploration_is_uniform():
    p = constant_q([0.0, 1.0])
    rng = np.random.default_rng(0)
    actions = [select_action(p, np.zeros(4), 1.0, rng) for _ in range(10_000)]
    assert abs(np.mean(actions) - 0.5) <= 0.02


def test_greedy_action_and_tie_break():
    assert select_action(constant_q([0.3, 0.9]), np.zeros(4), 0.0, np.random.default_rng(0)) == 1
    assert select_action(constant_q([0.5, 0.5]), np.zeros(4), 0.0, np.random.default_rng(0)) == 0


def test_epsilon_out_of_range():
    with pytest.raises(ValueError):
        select_action(constant_q([0, 0]), np.zeros(4), 1.5, np.random.default_rng(0))


def test_gamma_zero_targets_are_rewards():
    rng = np.random.default_rng(1)
    t = random_trajectory(rng, 4)
    t = Trajectory(t.states, t.actions, [0.5, 1.0, -2.0, 3.0], t.next_states, t.dones)
    np.testing.assert_array_equal(td_targets(t, init_params(rng), 0.0), [0.5, 1.0, -2.0, 3.0])


def test_terminal_target_ignores_network():
    t = Trajectory(np.zeros((1, 4)), [0], [1.0], np.ones((1, 4)), [True])
    for bias in ([100.0, -3.0], [-7.0, 2.0]):
        assert td_targets(t, constant_q(bias), 0.9).tolist() == [1.0]


def test_hand_set_target_network():
    # classical network reading only x: Q_0(s') = 2 + c * tanh(tanh(x')), Q_1 = Q_0 - 1
    x = 0.8
    target = ModelParams(init_params(np.random.default_rng(0), Variant.CLASSICAL).arch)
    target.pre_weights[0, 0] = 1.0
    target.mid_weights[0, 0] = 1.0
    c = 1.0 / math.tanh(math.tanh(x))
    target.post_weights[:, 0] = c
    target.post_bias[...] = [2.0, 1.0]
    next_states = np.zeros((2, 4))
    next_states[1, 0] = x
    np.testing.assert_allclose(forward(target, next_states).max(axis=1), [2.0, 3.0], atol=1e-12)
    t = Trajectory(np.zeros((2, 4)), [0, 1], [1.0, 1.0], next_states, [False, False])
    np.testing.assert_allclose(td_targets(t, target, 0.9), [2.8, 3.7], atol=1e-12)


def test_two_by_two_matrix_example():
    m = loss_matrix([1.0, 2.0], [0.0, 0.0])
    np.testing.assert_array_equal(m, [[1.0, 1.0], [2.0, 2.0]])
    assert matrix_loss_value([1.0, 2.0], [0.0, 0.0]) == 2.5
    assert matrix_loss_value([0.7] * 3, [0.7] * 3) == 0.0


def test_single_step_reduces_to_squared_td_error_bitwise():
    rng = np.random.default_rng(2)
    for v, q in rng.normal(size=(50, 2)):
        d = v - q  # scalar ** 2 goes through pow and may differ by an ulp from d * d
        assert matrix_loss_value([v], [q]) == td_loss_value([v], [q]) == d * d


def test_diagonal_identity_on_random_trajectories():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        v, q = rng.normal(size=n), rng.normal(size=n)
        assert abs(np.mean(np.diag(loss_matrix(v, q)) ** 2) - td_loss_value(v, q)) <= 1e-12


def test_matrix_loss_from_networks_matches_value():
    rng = np.random.default_rng(4)
    policy, target = init_params(rng), init_params(rng)
    t = random_trajectory(rng, 3)
    q = forward(policy, t.states)[np.arange(3), t.actions]
    expected = matrix_loss_value(td_targets(t, target, 0.9), q)
    assert matrix_loss(t, policy, target, 0.9) == expected >= 0


def test_decay_examples():
    assert decay_epsilon(1.0) == 0.9999
    assert decay_epsilon(0.001) == 0.001
    eps = 1.0
    for _ in range(10_000):
        eps = decay_epsilon(eps)
    assert eps == pytest.approx(0.9999 ** 10000, rel=1e-9)
    assert eps == pytest.approx(0.36786, abs=1e-5)


def batch_objective(trajs, weights, policy, target, gamma, loss):
    return batch_loss_and_gradient(trajs, weights, policy, target, gamma, loss=loss)[0].total


def fd_batch_gradient(trajs, weights, policy, target, gamma, loss, h=1e-4):
    flat = policy.flat
    out = np.empty_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        up = batch_objective(trajs, weights, policy, target, gamma, loss)
        flat[i] = saved - h
        down = batch_objective(trajs, weights, policy, target, gamma, loss)
        flat[i] = saved
        out[i] = (up - down) / (2 * h)
    return out


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("loss", ["matrix", "td"])
def test_batch_gradient_matches_finite_difference(variant, loss):
    rng = np.random.default_rng(5)
    policy, target = init_params(rng, variant), init_params(rng, variant)
    policy.pre_bias[...] = rng.normal(scale=0.3, size=8)
    trajs = [random_trajectory(rng, 3), random_trajectory(rng, 2, done=True)]
    weights = np.array([0.6, 1.0])
    breakdown, grad = batch_loss_and_gradient(trajs, weights, policy, target, 0.9, loss=loss)
    assert breakdown.total == float(np.dot(weights, breakdown.losses))
    assert np.all(breakdown.losses >= 0)
    numeric = fd_batch_gradient(trajs, weights, policy, target, 0.9, loss)
    assert np.max(np.abs(grad.flat - numeric)) < 1e-4


def test_targets_are_detached_even_when_networks_alias():
    rng = np.random.default_rng(6)
    policy = init_params(rng)
    trajs = [random_trajectory(rng, 3)]
    frozen = policy.copy()
    _, aliased = batch_loss_and_gradient(trajs, [1.0], policy, policy, 0.9)
    _, separate = batch_loss_and_gradient(trajs, [1.0], policy, frozen, 0.9)
    np.testing.assert_array_equal(aliased.flat, separate.flat)
    # finite differences that move the policy but hold the frozen copy fixed
    numeric = fd_batch_gradient(trajs, [1.0], policy, frozen, 0.9, "matrix")
    assert np.max(np.abs(aliased.flat - numeric)) < 1e-4


def test_zero_weight_removes_trajectory_contribution():
    rng = np.random.default_rng(7)
    policy, target = init_params(rng), init_params(rng)
    a, b = random_trajectory(rng, 3), random_trajectory(rng, 4)
    both, g_both = batch_loss_and_gradient([a, b], [0.0, 1.0], policy, target, 0.9)
    alone, g_alone = batch_loss_and_gradient([b], [1.0], policy, target, 0.9)
    np.testing.assert_allclose(g_both.flat, g_alone.flat, atol=1e-12)
    assert both.total == alone.total
    assert both.losses[0] > 0  # the priority still sees the unweighted loss


def test_single_trajectory_unit_weight():
    rng = np.random.default_rng(8)
    policy, target = init_params(rng), init_params(rng)
    t = random_trajectory(rng, 5)
    breakdown, _ = batch_loss_and_gradient([t], [1.0], policy, target, 0.9, debug=True)
    assert breakdown.total == breakdown.losses[0] == matrix_loss(t, policy, target, 0.9)
    assert breakdown.matrices[0].shape == (5, 5)


def test_unknown_loss_rejected():
    rng = np.random.default_rng(9)
    p = init_params(rng)
    with pytest.raises(ValueError):
        batch_loss_and_gradient([random_trajectory(rng, 2)], [1.0], p, p, 0.9, loss="huber")
