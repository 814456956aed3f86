"""Per-worker proportional prioritized replay over trajectory segments."""

from dataclasses import dataclass

import numpy as np

from .errors import StateError

PRIORITY_FLOOR = 1e-6


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class Trajectory:
    """A contiguous run of 1..S transitions from one episode, stored column-wise."""

    __slots__ = ("states", "actions", "rewards", "next_states", "dones")

    def __init__(self, states, actions, rewards, next_states, dones):
        self.states = np.asarray(states, dtype=np.float64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.next_states = np.asarray(next_states, dtype=np.float64)
        self.dones = np.asarray(dones, dtype=bool)
        n = self.actions.shape[0]
        if n == 0:
            raise ValueError("trajectory must contain at least one transition")
        if not (self.states.shape[0] == self.rewards.shape[0] == self.next_states.shape[0]
                == self.dones.shape[0] == n):
            raise ValueError("trajectory columns have different lengths")
        if self.dones[:-1].any():
            raise ValueError("only the last transition of a trajectory may be terminal")
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.next_states))
                and np.all(np.isfinite(self.rewards))):
            raise ValueError("trajectory contains non-finite values")

    @classmethod
    def from_transitions(cls, transitions):
        if not transitions:
            raise ValueError("trajectory must contain at least one transition")
        return cls(
            [t.state for t in transitions],
            [t.action for t in transitions],
            [t.reward for t in transitions],
            [t.next_state for t in transitions],
            [t.done for t in transitions],
        )

    def __len__(self):
        return self.actions.shape[0]

    def __repr__(self):
        return f"Trajectory(len={len(self)}, done={bool(self.dones[-1])})"


class SumTree:
    """Binary tree over ``capacity`` leaves where each node holds the sum of its children.

    Parents are recomputed from their children on every update, so the root
    never accumulates drift from incremental adds.
    """

    def __init__(self, capacity):
        self.capacity = capacity
        self.leaf_base = 1
        while self.leaf_base < capacity:
            self.leaf_base *= 2
        self.nodes = np.zeros(2 * self.leaf_base)

    @property
    def total(self):
        return float(self.nodes[1])

    def __getitem__(self, slot):
        return float(self.nodes[self.leaf_base + slot])

    def update(self, slot, value):
        i = self.leaf_base + slot
        self.nodes[i] = value
        i //= 2
        while i >= 1:
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1]
            i //= 2

    def find(self, mass):
        """Leaf slot whose cumulative interval contains ``mass``."""
        nodes = self.nodes
        i = 1
        while i < self.leaf_base:
            left = nodes[2 * i]
            if mass < left or nodes[2 * i + 1] <= 0.0:
                i = 2 * i
            else:
                mass -= left
                i = 2 * i + 1
        return i - self.leaf_base


@dataclass
class Sample:
    trajectories: list
    indices: np.ndarray
    weights: np.ndarray
    probabilities: np.ndarray


class PrioritizedMemory:
    """Fixed-capacity FIFO ring of trajectories sampled in proportion to ``p**per_alpha``.

    Indices handed out by :meth:`sample` are insertion serial numbers rather
    than ring slots, so an index whose trajectory has since been evicted is
    recognised as stale.
    """

    def __init__(self, capacity=10_000, per_alpha=0.6, per_beta=0.4, uniform_weights=False):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.per_alpha = per_alpha
        self.per_beta = per_beta
        self.uniform_weights = uniform_weights
        self._items = [None] * capacity
        self._priorities = np.zeros(capacity)
        self._tree = SumTree(capacity)
        self._pushed = 0
        self.max_priority = 1.0

    def __len__(self):
        return min(self._pushed, self.capacity)

    @property
    def total(self):
        """Cached sum of ``p_i**per_alpha`` over stored items."""
        return self._tree.total

    def priority(self, index):
        return float(self._priorities[self._slot(index)])

    def priorities(self):
        """Stored priorities, oldest first."""
        start = self._pushed - len(self)
        return np.array([self.priority(i) for i in range(start, self._pushed)])

    def probabilities(self):
        """Sampling probability of each stored item, oldest first."""
        start = self._pushed - len(self)
        masses = np.array([self._tree[(i % self.capacity)] for i in range(start, self._pushed)])
        return masses / masses.sum()

    def _slot(self, index):
        index = int(index)
        if not self._pushed - len(self) <= index < self._pushed:
            raise StateError(f"index {index} does not refer to a stored trajectory")
        return index % self.capacity

    def _set_priority(self, slot, priority):
        self._priorities[slot] = priority
        self._tree.update(slot, priority ** self.per_alpha)

    def push(self, trajectory):
        if len(trajectory) == 0:
            raise ValueError("cannot store an empty trajectory")
        slot = self._pushed % self.capacity
        self._items[slot] = trajectory
        self._set_priority(slot, self.max_priority)
        self._pushed += 1
        return self._pushed - 1

    def sample(self, batch_size, rng):
        """Draw ``batch_size`` items with replacement.

        Returns the trajectories, their indices, and importance-sampling
        weights ``(N * P(i)) ** -per_beta`` divided by the batch maximum.
        """
        size = len(self)
        if size == 0:
            raise StateError("cannot sample from an empty memory")
        total = self._tree.total
        oldest = self._pushed - size
        slots = np.array([self._tree.find(rng.random() * total) for _ in range(batch_size)])
        indices = oldest + (slots - oldest) % self.capacity
        probs = np.array([self._tree[s] for s in slots]) / total
        if self.uniform_weights:
            weights = np.ones(batch_size)
        else:
            weights = (size * probs) ** -self.per_beta
            weights /= weights.max()
        return Sample([self._items[s] for s in slots], indices, weights, probs)

    def update_priorities(self, indices, losses):
        losses = np.asarray(losses, dtype=np.float64)
        if np.any(losses < 0) or not np.all(np.isfinite(losses)):
            raise ValueError("losses must be finite and non-negative")
        slots = [self._slot(i) for i in indices]
        for slot, loss in zip(slots, losses):
            priority = float(loss) + PRIORITY_FLOOR
            self._set_priority(slot, priority)
            self.max_priority = max(self.max_priority, priority)
