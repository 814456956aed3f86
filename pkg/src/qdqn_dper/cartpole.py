"""CartPoleMod: cart-pole with cart/pole friction and actuator or sensor noise.

Variants:

====  ===============  ============
name  actuator noise   sensor noise
====  ===============  ============
v0    none             none
v1    5 %              none
v2    10 %             none
v3    none             5 %
====  ===============  ============

Noise is multiplicative and uniform: a value ``x`` becomes ``x * (1 + u)``
with ``u ~ U(-eta, eta)``. Sensor noise corrupts only what the agent
observes; termination is decided on the true state.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, StateError

VARIANTS = ("v0", "v1", "v2", "v3")

_NOISE = {
    "v0": (0.0, 0.0),
    "v1": (0.05, 0.0),
    "v2": (0.10, 0.0),
    "v3": (0.0, 0.05),
}


def variant_noise_levels(variant):
    """``(actuator_eta, sensor_eta)`` for a variant name."""
    try:
        return _NOISE[variant]
    except KeyError:
        raise ConfigurationError(f"unknown CartPoleMod variant {variant!r}; expected one of {VARIANTS}") from None


@dataclass(frozen=True)
class EnvConfig:
    variant: str = "v0"
    mu_cart: float = 5e-4
    mu_pole: float = 2e-6
    gravity: float = 9.8
    mass_cart: float = 1.0
    mass_pole: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    tau: float = 0.02
    theta_limit: float = math.radians(15.0)
    x_limit: float = 2.4
    max_steps: int = 200

    def __post_init__(self):
        variant_noise_levels(self.variant)
        for name in ("gravity", "mass_cart", "mass_pole", "half_length", "force_mag",
                     "tau", "theta_limit", "x_limit", "max_steps"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.mu_cart < 0 or self.mu_pole < 0:
            raise ConfigurationError("friction coefficients must be non-negative")

    @property
    def total_mass(self):
        return self.mass_cart + self.mass_pole

    def frictionless(self):
        return replace(self, mu_cart=0.0, mu_pole=0.0)


@dataclass(frozen=True)
class EnvState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    steps: int = 0
    done: bool = False

    def as_array(self):
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


def accelerations(config, x_dot, theta, theta_dot, force):
    """``(x_ddot, theta_ddot)`` of the frictional cart-pole."""
    m_p, l, total = config.mass_pole, config.half_length, config.total_mass
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    sign = (x_dot > 0) - (x_dot < 0)
    temp = (force + m_p * l * theta_dot * theta_dot * sin_t - config.mu_cart * sign) / total
    theta_acc = (config.gravity * sin_t - cos_t * temp - config.mu_pole * theta_dot / (m_p * l)) / (
        l * (4.0 / 3.0 - m_p * cos_t * cos_t / total)
    )
    x_acc = temp - m_p * l * theta_acc * cos_t / total
    return x_acc, theta_acc


def integrate(config, state, force):
    """One explicit Euler step of the dynamics, ignoring limits and noise."""
    x_acc, theta_acc = accelerations(config, state.x_dot, state.theta, state.theta_dot, force)
    tau = config.tau
    return EnvState(
        state.x + tau * state.x_dot,
        state.x_dot + tau * x_acc,
        state.theta + tau * state.theta_dot,
        state.theta_dot + tau * theta_acc,
        state.steps + 1,
    )


def observe(config, state, rng):
    obs = state.as_array()
    sensor = variant_noise_levels(config.variant)[1]
    if sensor > 0:
        obs = obs * (1.0 + rng.uniform(-sensor, sensor, size=4))
    return obs


def reset(config, rng):
    x, x_dot, theta, theta_dot = rng.uniform(-0.05, 0.05, size=4)
    return EnvState(float(x), float(x_dot), float(theta), float(theta_dot))


def step(config, state, action, rng):
    """Advance one control step.

    Returns:
        ``(next_state, observation, reward, done)``. Every step, the failing
        one included, earns reward 1.
    """
    if state.done:
        raise StateError("episode is over; call reset()")
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action!r}")
    force = config.force_mag if action == 1 else -config.force_mag
    actuator = variant_noise_levels(config.variant)[0]
    if actuator > 0:
        force *= 1.0 + rng.uniform(-actuator, actuator)
    nxt = integrate(config, state, force)
    done = (
        abs(nxt.theta) > config.theta_limit
        or abs(nxt.x) > config.x_limit
        or nxt.steps >= config.max_steps
    )
    nxt = replace(nxt, done=done)
    return nxt, observe(config, nxt, rng), 1.0, done


class CartPoleMod:
    """Stateful wrapper around :func:`reset` and :func:`step` for one worker."""

    def __init__(self, config=None, rng=None):
        self.config = config or EnvConfig()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = None

    def reset(self):
        self.state = reset(self.config, self.rng)
        return observe(self.config, self.state, self.rng)

    def step(self, action):
        if self.state is None:
            raise StateError("call reset() before step()")
        self.state, obs, reward, done = step(self.config, self.state, action, self.rng)
        return obs, reward, done
