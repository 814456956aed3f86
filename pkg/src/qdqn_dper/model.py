"""Dressed VQC Q-function and its classical same-size baseline.

Quantum variant::

    u      = pre_weights @ obs + pre_bias            (no activation)
    angles = (arctan(u), arctan(u**2))                per qubit, Ry then Rz
    e      = <Z_q> of the encoding + variational circuit
    Q      = post_weights @ e + post_bias

Classical variant replaces the circuit by ``tanh(mid_weights @ tanh(u) + mid_bias)``.

All parameters live in one flat float64 vector; the named fields are views
into it, so optimizers and gradient code can work on ``params.flat``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import circuit
from .errors import ConfigurationError, NumericError


class Variant(str, enum.Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


@dataclass(frozen=True)
class Architecture:
    """Shapes of the dressed model. Defaults are the 8-qubit, 2-block setup."""

    variant: Variant = Variant.QUANTUM
    obs_dim: int = 4
    n_qubits: int = 8
    n_layers: int = 2
    n_actions: int = 2
    entangler: str = "ring"

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("obs_dim", "n_qubits", "n_layers", "n_actions"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.entangler not in circuit.ENTANGLERS:
            raise ConfigurationError(f"unknown entangler {self.entangler!r}")
        if self.variant is Variant.QUANTUM and self.n_qubits > 16:
            raise ConfigurationError("dense simulation is capped at 16 qubits")

    @property
    def layout(self):
        """``(name, shape)`` pairs in flat-vector order."""
        n, k = self.n_qubits, self.obs_dim
        head = [("pre_weights", (n, k)), ("pre_bias", (n,))]
        if self.variant is Variant.QUANTUM:
            middle = [("quantum_params", (self.n_layers, n, 3))]
        else:
            middle = [("mid_weights", (n, n)), ("mid_bias", (n,))]
        tail = [("post_weights", (self.n_actions, n)), ("post_bias", (self.n_actions,))]
        return head + middle + tail

    @property
    def size(self):
        return sum(int(np.prod(shape)) for _, shape in self.layout)


DEFAULT_QUANTUM = Architecture(Variant.QUANTUM)
DEFAULT_CLASSICAL = Architecture(Variant.CLASSICAL)


class _FlatFields:
    """Named reshaped views over a flat float64 vector."""

    def __init__(self, arch, flat=None):
        self.arch = arch
        if flat is None:
            flat = np.zeros(arch.size)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (arch.size,):
            raise ConfigurationError(f"expected {arch.size} values for {arch.variant.value}, got {flat.shape}")
        self.flat = flat
        self._views = {}
        offset = 0
        for name, shape in arch.layout:
            size = int(np.prod(shape))
            self._views[name] = flat[offset:offset + size].reshape(shape)
            offset += size

    def __getattr__(self, name):
        views = self.__dict__.get("_views")
        if views is not None and name in views:
            return views[name]
        raise AttributeError(name)

    @property
    def variant(self):
        return self.arch.variant

    def fields(self):
        return dict(self._views)

    def copy(self):
        return type(self)(self.arch, self.flat.copy())

    def __len__(self):
        return self.flat.shape[0]


class ModelParams(_FlatFields):
    """Trainable parameters of one network (policy or target)."""

    def __repr__(self):
        return f"ModelParams({self.arch.variant.value}, {len(self)} values)"


class Gradient(_FlatFields):
    """d(loss)/d(parameter), laid out exactly like :class:`ModelParams`."""

    def __iadd__(self, other):
        self.flat += other.flat
        return self

    def __repr__(self):
        return f"Gradient({self.arch.variant.value}, |g|={np.linalg.norm(self.flat):.3g})"


def init_params(rng, variant=Variant.QUANTUM, arch=None):
    """Fresh parameters.

    Weights are uniform in +-1/sqrt(fan_in), rotation angles uniform in
    [-pi, pi), biases zero. Draws happen in layout order, so the same seed
    always gives the same parameters.
    """
    if arch is None:
        arch = Architecture(Variant(variant))
    params = ModelParams(arch)
    for name, shape in arch.layout:
        view = params.fields()[name]
        if name.endswith("bias"):
            view[...] = 0.0
        elif name == "quantum_params":
            view[...] = rng.uniform(-np.pi, np.pi, size=shape)
        else:
            bound = 1.0 / np.sqrt(shape[1])
            view[...] = rng.uniform(-bound, bound, size=shape)
    return params


def param_count(params_or_arch):
    arch = getattr(params_or_arch, "arch", params_or_arch)
    return arch.size


def quantum_param_count(params_or_arch):
    arch = getattr(params_or_arch, "arch", params_or_arch)
    if arch.variant is not Variant.QUANTUM:
        return 0
    return arch.n_layers * arch.n_qubits * 3


def copy_into(src, dst):
    """Deep-copy parameter values from ``src`` into ``dst``."""
    if src.arch != dst.arch:
        raise ConfigurationError("cannot copy between different architectures")
    np.copyto(dst.flat, src.flat)


def flat_view(params):
    return params.flat.copy()


def flat_assign(params, values):
    values = np.asarray(values, dtype=np.float64)
    if values.shape != params.flat.shape:
        raise ConfigurationError(f"expected {params.flat.shape[0]} values, got {values.shape}")
    np.copyto(params.flat, values)
    return params


def encode_angles(pre_out):
    """Map pre-layer outputs to (Ry, Rz) angles, shape ``pre_out.shape + (2,)``."""
    pre_out = np.asarray(pre_out, dtype=np.float64)
    return np.stack([np.arctan(pre_out), np.arctan(pre_out ** 2)], axis=-1)


_PERMUTATIONS = {}


def _permutation(arch):
    key = (arch.n_qubits, arch.entangler)
    perm = _PERMUTATIONS.get(key)
    if perm is None:
        perm = _PERMUTATIONS[key] = circuit.entangler_permutation(*key)
    return perm


def quantum_forward(quantum_params, angles, entangler="ring"):
    """<Z> readout of every qubit; ``angles`` is (n, 2) or (m, n, 2)."""
    angles = np.asarray(angles, dtype=np.float64)
    single = angles.ndim == 2
    batch = angles[None] if single else angles
    perm = _permutation(Architecture(n_qubits=batch.shape[1], entangler=entangler))
    out = circuit.circuit_expectations(batch, quantum_params, perm)
    return out[0] if single else out


def _as_batch(params, observations):
    obs = np.asarray(observations, dtype=np.float64)
    single = obs.ndim == 1
    obs = np.atleast_2d(obs)
    if obs.shape[1] != params.arch.obs_dim:
        raise ConfigurationError(f"observation must have {params.arch.obs_dim} entries, got {obs.shape[1]}")
    if not np.all(np.isfinite(obs)):
        raise NumericError("observation contains non-finite values")
    return obs, single


def _hidden(params, obs):
    pre = obs @ params.pre_weights.T + params.pre_bias
    if params.variant is Variant.QUANTUM:
        angles = encode_angles(pre)
        hidden = circuit.circuit_expectations(angles, params.quantum_params, _permutation(params.arch))
        return pre, hidden, None
    h1 = np.tanh(pre)
    return pre, np.tanh(h1 @ params.mid_weights.T + params.mid_bias), h1


def forward(params, observation):
    """Q-values for one observation (shape (A,)) or a batch (shape (m, A))."""
    obs, single = _as_batch(params, observation)
    _, hidden, _ = _hidden(params, obs)
    q = hidden @ params.post_weights.T + params.post_bias
    return q[0] if single else q


def backward(params, observation, upstream):
    """Gradient of ``sum(upstream * forward(params, observation))``.

    Batched inputs are accepted; the per-observation gradients are summed.
    Quantum rotation and encoding angles are differentiated with the
    parameter-shift rule, ``[f(phi + pi/2) - f(phi - pi/2)] / 2``, each term
    a full circuit evaluation. Classical layers and the arctan maps use
    analytic derivatives.
    """
    obs, _ = _as_batch(params, observation)
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if upstream.shape != (obs.shape[0], params.arch.n_actions):
        raise ConfigurationError(f"upstream shape {upstream.shape} does not match {obs.shape[0]} observations")
    grad = Gradient(params.arch)
    pre, hidden, h1 = _hidden(params, obs)
    grad.post_weights[...] = upstream.T @ hidden
    grad.post_bias[...] = upstream.sum(axis=0)
    d_hidden = upstream @ params.post_weights

    if params.variant is Variant.QUANTUM:
        arch = params.arch
        plus, minus = circuit.shifted_expectations(encode_angles(pre), params.quantum_params, _permutation(arch))
        d_angle = np.einsum("msq,mq->ms", 0.5 * (plus - minus), d_hidden)
        n_quantum = params.quantum_params.size
        grad.quantum_params[...] = d_angle[:, :n_quantum].sum(axis=0).reshape(params.quantum_params.shape)
        d_enc = d_angle[:, n_quantum:].reshape(obs.shape[0], arch.n_qubits, 2)
        d_pre = d_enc[..., 0] / (1.0 + pre ** 2) + d_enc[..., 1] * 2.0 * pre / (1.0 + pre ** 4)
    else:
        d_mid = d_hidden * (1.0 - hidden ** 2)
        grad.mid_weights[...] = d_mid.T @ h1
        grad.mid_bias[...] = d_mid.sum(axis=0)
        d_pre = (d_mid @ params.mid_weights) * (1.0 - h1 ** 2)

    grad.pre_weights[...] = d_pre.T @ obs
    grad.pre_bias[...] = d_pre.sum(axis=0)
    if not np.all(np.isfinite(grad.flat)):
        raise NumericError("gradient contains non-finite values")
    return grad
