"""Dense statevector simulator for the gate set used by the dressed VQC.

Basis ordering: qubit 0 is the least significant bit of a basis-state index,
so ``|q1 q0> = |10>`` is index 2.

The public functions mutate the state in place and return it, so calls can
be chained. The ``*_kernel`` functions are numba-compiled and operate on raw
complex128 arrays; the circuit runner in :mod:`qdqn_dper.circuit` calls them
directly.
"""

import math

import numba
import numpy as np

from .errors import ConfigurationError, NumericError

MAX_QUBITS = 16

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@numba.njit(cache=True, nogil=True)
def apply_1q_kernel(amps, qubit, m00, m01, m10, m11):
    """Apply the 2x2 matrix ``[[m00, m01], [m10, m11]]`` to ``qubit``."""
    step = 1 << qubit
    n = amps.shape[0]
    for base in range(0, n, 2 * step):
        for lo in range(base, base + step):
            hi = lo + step
            a0 = amps[lo]
            a1 = amps[hi]
            amps[lo] = m00 * a0 + m01 * a1
            amps[hi] = m10 * a0 + m11 * a1


@numba.njit(cache=True, nogil=True)
def apply_cnot_kernel(amps, control, target):
    cmask = 1 << control
    tmask = 1 << target
    for i in range(amps.shape[0]):
        if (i & cmask) != 0 and (i & tmask) == 0:
            j = i | tmask
            tmp = amps[i]
            amps[i] = amps[j]
            amps[j] = tmp


@numba.njit(cache=True, nogil=True)
def expect_z_kernel(amps, n_qubits, out):
    """Write <Z_q> for every qubit into ``out``."""
    for q in range(n_qubits):
        out[q] = 0.0
    for i in range(amps.shape[0]):
        a = amps[i]
        p = a.real * a.real + a.imag * a.imag
        for q in range(n_qubits):
            if (i >> q) & 1:
                out[q] -= p
            else:
                out[q] += p


def rz_matrix(angle):
    half = 0.5 * angle
    return np.array(
        [[complex(math.cos(half), -math.sin(half)), 0.0],
         [0.0, complex(math.cos(half), math.sin(half))]],
        dtype=np.complex128,
    )


def ry_matrix(angle):
    c, s = math.cos(0.5 * angle), math.sin(0.5 * angle)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rot_matrix(alpha, beta, gamma):
    """Matrix of Rz(gamma) @ Ry(beta) @ Rz(alpha)."""
    c, s = math.cos(0.5 * beta), math.sin(0.5 * beta)
    plus = complex(math.cos(0.5 * (alpha + gamma)), -math.sin(0.5 * (alpha + gamma)))
    minus = complex(math.cos(0.5 * (alpha - gamma)), math.sin(0.5 * (alpha - gamma)))
    return np.array(
        [[plus * c, -minus * s],
         [minus.conjugate() * s, plus.conjugate() * c]],
        dtype=np.complex128,
    )


H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) * _INV_SQRT2


class StateVector:
    """Amplitudes of an ``n_qubits`` register."""

    __slots__ = ("amplitudes", "n_qubits")

    def __init__(self, amplitudes):
        amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        n = amplitudes.shape[0].bit_length() - 1
        if amplitudes.ndim != 1 or amplitudes.shape[0] != 1 << n or not 1 <= n <= MAX_QUBITS:
            raise ConfigurationError(
                f"amplitude vector of length {amplitudes.shape[0]} is not 2**n for 1 <= n <= {MAX_QUBITS}"
            )
        self.amplitudes = amplitudes
        self.n_qubits = n

    def copy(self):
        return StateVector(self.amplitudes.copy())

    def norm_squared(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def init_zero(n_qubits):
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    if isinstance(n_qubits, bool) or not isinstance(n_qubits, (int, np.integer)):
        raise ConfigurationError(f"n_qubits must be an integer, got {n_qubits!r}")
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << int(n_qubits), dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps)


def _check_qubit(state, qubit):
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")


def _check_angle(angle):
    if not math.isfinite(angle):
        raise NumericError(f"rotation angle must be finite, got {angle}")


def apply_matrix(state, qubit, matrix):
    """Apply an arbitrary 2x2 matrix to one qubit."""
    _check_qubit(state, qubit)
    m = np.asarray(matrix, dtype=np.complex128)
    apply_1q_kernel(state.amplitudes, qubit, m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    return state


def apply_h(state, qubit):
    return apply_matrix(state, qubit, H_MATRIX)


def apply_ry(state, qubit, angle):
    _check_angle(angle)
    return apply_matrix(state, qubit, ry_matrix(angle))


def apply_rz(state, qubit, angle):
    _check_angle(angle)
    return apply_matrix(state, qubit, rz_matrix(angle))


def apply_rot(state, qubit, alpha, beta, gamma):
    """General rotation: Rz(alpha) first, then Ry(beta), then Rz(gamma)."""
    for angle in (alpha, beta, gamma):
        _check_angle(angle)
    return apply_matrix(state, qubit, rot_matrix(alpha, beta, gamma))


def apply_cnot(state, control, target):
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError(f"CNOT control and target must differ, both are {control}")
    apply_cnot_kernel(state.amplitudes, control, target)
    return state


def pauli_z_expectations(state):
    """Exact <Z> of every qubit, indexed by qubit."""
    out = np.empty(state.n_qubits)
    expect_z_kernel(state.amplitudes, state.n_qubits, out)
    return out


def pauli_z_expectation(state, qubit):
    _check_qubit(state, qubit)
    probs = np.abs(state.amplitudes) ** 2
    bits = (np.arange(probs.shape[0]) >> qubit) & 1
    return float(np.sum(probs[bits == 0]) - np.sum(probs[bits == 1]))
