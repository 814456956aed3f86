"""Asynchronous multi-worker training loop.

Every worker owns its environment, replay memory, epsilon and step counter
and runs the learner loop on its own thread. They share the policy and
target parameters, the RMSprop state and the episode/step counters held by
:class:`GlobalState`:

* policy, target, optimizer state and the target-sync register change only
  inside one exclusive section;
* the episode counter ``T`` and the step counter ``Y`` are atomic counters
  with their own lock;
* workers read parameters through copies taken inside the exclusive section.
"""

import hashlib
import logging
import queue
import threading
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import cartpole
from .agent import batch_loss_and_gradient, decay_epsilon, select_action
from .errors import StateError, TrainingError
from .model import copy_into, init_params
from .optim import RMSprop
from .replay import PrioritizedMemory, Trajectory, Transition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeRecord:
    global_episode: int
    worker_id: int
    score: float
    epsilon_at_end: float
    wall_clock_ms: float


@dataclass
class TrainingReport:
    config: object
    episodes: list
    params: object
    target: object
    wall_time: float
    total_steps: int
    worker_steps: list
    sync_log: list
    updates: int
    traces: list = field(default=None, repr=False)

    @property
    def scores(self):
        return np.array([r.score for r in self.episodes])


def worker_rngs(seed, n_workers):
    """``(init_rng, [(env_rng, action_rng, replay_rng), ...])`` for a run seed."""
    init_seq, *worker_seqs = np.random.SeedSequence(seed).spawn(n_workers + 1)
    per_worker = [tuple(np.random.default_rng(s) for s in seq.spawn(3)) for seq in worker_seqs]
    return np.random.default_rng(init_seq), per_worker


def _checksum(params):
    return hashlib.blake2b(params.flat.tobytes(), digest_size=16).digest()


class ExclusiveSection:
    """A lock that knows its owner and flags overlapping entries."""

    def __init__(self):
        self._lock = threading.Lock()
        self._owner = None
        self.entries = 0
        self.overlaps = 0

    def __enter__(self):
        self._lock.acquire()
        if self._owner is not None:
            self.overlaps += 1
        self._owner = threading.get_ident()
        self.entries += 1
        return self

    def __exit__(self, *exc):
        self._owner = None
        self._lock.release()

    def held(self):
        return self._owner == threading.get_ident()


class GlobalState:
    """Parameters, optimizer and counters shared by all workers."""

    def __init__(self, policy, optimizer, config, audit=False):
        self.config = config
        self.policy = policy
        self.target = policy.copy()
        self.optimizer = optimizer
        self.section = ExclusiveSection()
        self._counter_lock = threading.Lock()
        self.episodes = 0
        self.steps = 0
        self.version = 0
        self.updates = 0
        self.last_synced_multiple = 0
        self.sync_log = []
        self.abort = threading.Event()
        self.audit = {0: _checksum(policy)} if audit else None

    def _require_exclusive(self):
        if not self.section.held():
            raise StateError("shared parameters touched outside the exclusive section")

    def snapshot(self):
        """Copy of the policy and the update generation it belongs to."""
        with self.section:
            return self.policy.copy(), self.version

    def target_snapshot(self):
        with self.section:
            return self.target.copy()

    def apply_gradient(self, grad):
        with self.section:
            self._require_exclusive()
            self.optimizer.step(self.policy, grad)
            self.version += 1
            self.updates += 1
            if self.audit is not None:
                self.audit[self.version] = _checksum(self.policy)

    def add_step(self):
        with self._counter_lock:
            self.steps += 1
            return self.steps

    def maybe_sync_target(self, y):
        """Copy policy to target once for every newly crossed multiple of the sync period.

        ``y`` is the step count this worker just produced. Several workers can
        observe the same crossing, or a crossing can be seen late; the
        register of the last synced multiple makes each one fire exactly once.
        """
        multiple = y // self.config.target_update
        if multiple <= self.last_synced_multiple:
            return False
        with self.section:
            self._require_exclusive()
            if multiple <= self.last_synced_multiple:
                return False
            copy_into(self.policy, self.target)
            for m in range(self.last_synced_multiple + 1, multiple + 1):
                self.sync_log.append((m, y, self.version))
            self.last_synced_multiple = multiple
            return True

    def finish_episode(self, worker_id, score, epsilon, started, sink):
        """Count a completed episode unless the episode budget is already spent."""
        with self._counter_lock:
            if self.episodes >= self.config.episodes:
                return None
            self.episodes += 1
            record = EpisodeRecord(self.episodes - 1, worker_id, score, epsilon,
                                   1e3 * (time.perf_counter() - started))
            sink.put(record)
            return record

    def finished(self):
        limit = self.config.max_global_steps
        return (
            self.abort.is_set()
            or self.episodes >= self.config.episodes
            or (limit is not None and self.steps >= limit)
        )


@dataclass
class WorkerState:
    worker_id: int
    env: cartpole.CartPoleMod
    memory: PrioritizedMemory | None
    action_rng: np.random.Generator
    replay_rng: np.random.Generator
    epsilon: float
    steps: int = 0
    buffer: list = field(default_factory=list)
    trace: list | None = None


def make_worker(worker_id, config, rngs, trace=False):
    env_rng, action_rng, replay_rng = rngs
    memory = None
    if config.replay:
        memory = PrioritizedMemory(config.memory_capacity, config.effective_per_alpha, config.per_beta,
                                   uniform_weights=not config.per)
    env = cartpole.CartPoleMod(cartpole.EnvConfig(config.env), env_rng)
    return WorkerState(worker_id, env, memory, action_rng, replay_rng, config.epsilon_start,
                       trace=[] if trace else None)


def _learn(worker, glob, policy):
    """Flush the trajectory buffer, sample a batch and apply one gradient step."""
    config = glob.config
    trajectory = Trajectory.from_transitions(worker.buffer)
    worker.buffer = []
    if worker.memory is not None:
        worker.memory.push(trajectory)
        sample = worker.memory.sample(config.batch_size, worker.replay_rng)
        batch, weights = sample.trajectories, sample.weights
    else:
        batch, weights = [trajectory], np.ones(1)
    target = glob.target_snapshot()
    breakdown, grad = batch_loss_and_gradient(batch, weights, policy, target, config.gamma, config.loss)
    if worker.memory is not None:
        worker.memory.update_priorities(sample.indices, breakdown.losses)
    glob.apply_gradient(grad)
    if worker.trace is not None:
        indices = sample.indices.tolist() if worker.memory is not None else []
        worker.trace.append(("update", indices, breakdown.losses.tolist(), breakdown.total))


def worker_loop(worker, glob, sink, started):
    """Run episodes until the shared episode budget is used up."""
    config = glob.config
    audit = glob.audit
    while not glob.finished():
        obs = worker.env.reset()
        worker.buffer = []
        score = 0.0
        done = False
        while not done:
            if glob.finished():
                return
            policy, version = glob.snapshot()
            if audit is not None and _checksum(policy) != audit[version]:
                raise StateError(f"torn read of policy generation {version}")
            action = select_action(policy, obs, worker.epsilon, worker.action_rng)
            next_obs, reward, done = worker.env.step(action)
            worker.buffer.append(Transition(obs, action, reward, next_obs, done))
            worker.steps += 1
            y = glob.add_step()
            score += reward
            if worker.trace is not None:
                worker.trace.append(("step", action, reward, done))
            if worker.steps % config.trajectory_len == 0 or done:
                _learn(worker, glob, policy)
            if glob.maybe_sync_target(y) and worker.trace is not None:
                worker.trace.append(("sync", y))
            worker.epsilon = decay_epsilon(worker.epsilon, config.epsilon_decay, config.epsilon_min)
            obs = next_obs
        glob.finish_episode(worker.worker_id, score, worker.epsilon, started, sink)


def run_training(config, on_episode=None, trace=False, audit=False):
    """Train with ``config.workers`` threads until ``config.episodes`` episodes complete.

    Args:
        config: a :class:`~qdqn_dper.config.RunConfig`.
        on_episode: called on the calling thread with every recorded
            :class:`EpisodeRecord`, in global episode order.
        trace: keep a per-worker event trace (actions, losses, syncs).
        audit: verify every parameter snapshot against the checksum of its
            generation; slower, meant for concurrency tests.

    Raises:
        TrainingError: a worker failed; ``partial`` holds the report so far.
    """
    init_rng, rngs = worker_rngs(config.seed, config.workers)
    policy = init_params(init_rng, arch=config.architecture)
    optimizer = RMSprop(policy.flat.shape[0], config.lr, config.rms_alpha, config.rms_eps, config.clip_norm)
    glob = GlobalState(policy, optimizer, config, audit=audit)
    workers = [make_worker(i, config, rngs[i], trace) for i in range(config.workers)]
    sink = queue.SimpleQueue()
    failures = []
    started = time.perf_counter()

    def run(worker):
        try:
            worker_loop(worker, glob, sink, started)
        except BaseException as exc:  # noqa: BLE001 - reported to the caller
            failures.append((worker.worker_id, exc, traceback.format_exc()))
            glob.abort.set()

    threads = [threading.Thread(target=run, args=(w,), name=f"worker-{w.worker_id}", daemon=True)
               for w in workers]
    for t in threads:
        t.start()

    records = []

    def drain(timeout):
        try:
            record = sink.get(timeout=timeout)
        except queue.Empty:
            return
        records.append(record)
        if on_episode is not None:
            on_episode(record)

    while any(t.is_alive() for t in threads):
        drain(0.05)
    while not sink.empty():
        drain(0)
    for t in threads:
        t.join()

    report = TrainingReport(
        config=config,
        episodes=records,
        params=glob.policy.copy(),
        target=glob.target.copy(),
        wall_time=time.perf_counter() - started,
        total_steps=glob.steps,
        worker_steps=[w.steps for w in workers],
        sync_log=list(glob.sync_log),
        updates=glob.updates,
        traces=[w.trace for w in workers] if trace else None,
    )
    if glob.section.overlaps:
        failures.append((-1, StateError("exclusive section overlapped"), ""))
    if failures:
        worker_id, exc, tb = failures[0]
        log.error("worker %d failed:\n%s", worker_id, tb)
        raise TrainingError(f"worker {worker_id} failed: {exc!r}", partial=report) from exc
    return report
