"""Q-learning pieces: epsilon-greedy acting, TD targets and the trajectory losses.

For a trajectory of ``n`` steps with targets ``v`` (from the frozen target
network) and predictions ``q`` (policy network, taken action), the matrix
loss is the mean over all ``n * n`` pairs of ``(v[p] - q[q'])**2``. Its
diagonal holds the ordinary one-step TD errors; the ``"td"`` loss keeps only
that diagonal.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import Gradient, backward, forward

LOSSES = ("matrix", "td")


@dataclass
class LossBreakdown:
    losses: np.ndarray
    total: float
    matrices: list = field(default=None, repr=False)


def select_action(params, observation, epsilon, rng):
    """Uniform random action with probability ``epsilon``, else the greedy one.

    Exactly one uniform draw decides exploration; exploring consumes one
    more draw for the action. Ties go to the lower action index.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(params.arch.n_actions))
    return int(np.argmax(forward(params, observation)))


def decay_epsilon(epsilon, rate=0.9999, floor=0.001):
    return max(epsilon * rate, floor)


def td_targets(trajectory, target_params, gamma):
    """``r + gamma * max_a Q(s', a; target)``, or just ``r`` at a terminal step."""
    next_q = forward(target_params, trajectory.next_states).max(axis=1)
    return np.where(trajectory.dones, trajectory.rewards, trajectory.rewards + gamma * next_q)


def loss_matrix(targets, predictions):
    """Entry ``[p, q]`` is ``targets[p] - predictions[q]``."""
    return np.subtract.outer(np.asarray(targets), np.asarray(predictions))


def matrix_loss_value(targets, predictions):
    return float(np.mean(loss_matrix(targets, predictions) ** 2))


def td_loss_value(targets, predictions):
    return float(np.mean((np.asarray(targets) - np.asarray(predictions)) ** 2))


def matrix_loss(trajectory, policy_params, target_params, gamma):
    targets = td_targets(trajectory, target_params, gamma)
    q = forward(policy_params, trajectory.states)[np.arange(len(trajectory)), trajectory.actions]
    return matrix_loss_value(targets, q)


def _loss_and_slope(targets, q, loss):
    """Scalar loss and its derivative with respect to each prediction."""
    n = q.shape[0]
    if loss == "matrix":
        # d/dq_j (1/n^2) sum_p sum_k (v_p - q_k)^2 = (2/n) (q_j - mean(v))
        return matrix_loss_value(targets, q), (2.0 / n) * (q - targets.mean())
    if loss == "td":
        return td_loss_value(targets, q), (2.0 / n) * (q - targets)
    raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def batch_loss_and_gradient(trajectories, weights, policy_params, target_params, gamma,
                            loss="matrix", debug=False):
    """Weighted batch loss ``L = sum_i w_i l_i`` and its gradient.

    Targets are constants: no gradient flows into ``target_params``. The
    returned ``losses`` are unweighted and feed the priority update.
    """
    weights = np.asarray(weights, dtype=np.float64)
    lengths = [len(t) for t in trajectories]
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    states = np.concatenate([t.states for t in trajectories])
    actions = np.concatenate([t.actions for t in trajectories])
    rewards = np.concatenate([t.rewards for t in trajectories])
    dones = np.concatenate([t.dones for t in trajectories])
    next_states = np.concatenate([t.next_states for t in trajectories])

    next_q = forward(target_params, next_states).max(axis=1)
    targets = np.where(dones, rewards, rewards + gamma * next_q)
    rows = np.arange(states.shape[0])
    q = forward(policy_params, states)[rows, actions]

    losses = np.empty(len(trajectories))
    upstream = np.zeros((states.shape[0], policy_params.arch.n_actions))
    matrices = [] if debug else None
    for i, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:])):
        losses[i], slope = _loss_and_slope(targets[lo:hi], q[lo:hi], loss)
        upstream[rows[lo:hi], actions[lo:hi]] = weights[i] * slope
        if debug:
            matrices.append(loss_matrix(targets[lo:hi], q[lo:hi]))

    total = float(np.dot(weights, losses))
    # rows with zero upstream contribute nothing; skip their circuit runs
    live = np.any(upstream != 0.0, axis=1)
    if live.any():
        grad = backward(policy_params, states[live], upstream[live])
    else:
        grad = Gradient(policy_params.arch)
    return LossBreakdown(losses, total, matrices), grad
