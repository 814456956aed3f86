"""Compiled runner for the encoding + variational circuit.

Circuit per observation, on ``n`` qubits:

* encoding: for every qubit H, then Ry(theta_y), then Rz(theta_z);
* ``L`` variational blocks, each a CNOT entangler followed by
  Rot(alpha, beta, gamma) = Rz(gamma) Ry(beta) Rz(alpha) on every qubit;
* readout: exact <Z> on every qubit.

The entangler is a fixed sequence of CNOTs, i.e. a permutation of basis
states, so it is applied as a single gather. :func:`entangler_pairs` lists
the CNOTs and :func:`entangler_permutation` composes them with the same
bit convention as :mod:`qdqn_dper.statevector`.

:func:`shifted_expectations` evaluates every circuit needed by the
parameter-shift rule: for each rotation angle, the full circuit with that
angle moved by +pi/2 and by -pi/2. Gates on distinct qubits commute, so the
unshifted part of a block is applied before the shifted gate and the common
prefix is computed once per block; each returned value is still the exact
expectation of the complete shifted circuit.
"""

import math

import numba
import numpy as np

from .statevector import apply_1q_kernel, expect_z_kernel

HALF_PI = 0.5 * math.pi
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

ENTANGLERS = ("ring", "chain", "none")


def entangler_pairs(n_qubits, kind="ring"):
    """(control, target) pairs of one entangling stage, in application order."""
    if kind not in ENTANGLERS:
        raise ValueError(f"unknown entangler {kind!r}; expected one of {ENTANGLERS}")
    if kind == "none" or n_qubits < 2:
        return []
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    if kind == "ring":
        pairs.append((n_qubits - 1, 0))
    return pairs


def entangler_permutation(n_qubits, kind="ring"):
    """Gather indices ``src`` with ``new[j] = old[src[j]]`` for the entangler."""
    dim = 1 << n_qubits
    src = np.empty(dim, dtype=np.int64)
    pairs = entangler_pairs(n_qubits, kind)
    for i in range(dim):
        j = i
        for control, target in pairs:
            if (j >> control) & 1:
                j ^= 1 << target
        src[j] = i
    return src


@numba.njit(cache=True, nogil=True)
def _encoding_matrix(theta_y, theta_z):
    # Rz(theta_z) @ Ry(theta_y) @ H
    c = math.cos(0.5 * theta_y)
    s = math.sin(0.5 * theta_y)
    e0 = complex(math.cos(0.5 * theta_z), -math.sin(0.5 * theta_z)) * _INV_SQRT2
    e1 = e0.conjugate()
    return e0 * (c - s), e0 * (c + s), e1 * (s + c), e1 * (s - c)


@numba.njit(cache=True, nogil=True)
def _rot(amps, qubit, alpha, beta, gamma):
    c = math.cos(0.5 * beta)
    s = math.sin(0.5 * beta)
    plus = complex(math.cos(0.5 * (alpha + gamma)), -math.sin(0.5 * (alpha + gamma)))
    minus = complex(math.cos(0.5 * (alpha - gamma)), math.sin(0.5 * (alpha - gamma)))
    apply_1q_kernel(amps, qubit, plus * c, -minus * s, minus.conjugate() * s, plus.conjugate() * c)


@numba.njit(cache=True, nogil=True)
def _encode(amps, angles, skip):
    amps[:] = 0.0
    amps[0] = 1.0
    for q in range(angles.shape[0]):
        if q != skip:
            m00, m01, m10, m11 = _encoding_matrix(angles[q, 0], angles[q, 1])
            apply_1q_kernel(amps, q, m00, m01, m10, m11)


@numba.njit(cache=True, nogil=True)
def _entangle(amps, scratch, perm):
    for j in range(amps.shape[0]):
        scratch[j] = amps[perm[j]]
    amps[:] = scratch


@numba.njit(cache=True, nogil=True)
def _rotations(amps, layer_params, skip):
    for q in range(layer_params.shape[0]):
        if q != skip:
            _rot(amps, q, layer_params[q, 0], layer_params[q, 1], layer_params[q, 2])


@numba.njit(cache=True, nogil=True)
def _blocks(amps, scratch, weights, perm, first):
    for layer in range(first, weights.shape[0]):
        _entangle(amps, scratch, perm)
        _rotations(amps, weights[layer], -1)


@numba.njit(cache=True, nogil=True)
def _expectations(angles, weights, perm, out):
    n = angles.shape[1]
    amps = np.empty(1 << n, dtype=np.complex128)
    scratch = np.empty_like(amps)
    for k in range(angles.shape[0]):
        _encode(amps, angles[k], -1)
        _blocks(amps, scratch, weights, perm, 0)
        expect_z_kernel(amps, n, out[k])


@numba.njit(cache=True, nogil=True)
def _shifted(angles, weights, perm, plus, minus):
    n_layers = weights.shape[0]
    n = angles.shape[1]
    dim = 1 << n
    n_quantum = n_layers * n * 3
    before_block = np.empty((n_layers, dim), dtype=np.complex128)
    amps = np.empty(dim, dtype=np.complex128)
    prefix = np.empty(dim, dtype=np.complex128)
    scratch = np.empty(dim, dtype=np.complex128)
    shifted = np.empty(3)
    enc = np.empty(2)
    for k in range(angles.shape[0]):
        # states just before each block's rotations
        _encode(amps, angles[k], -1)
        for layer in range(n_layers):
            _entangle(amps, scratch, perm)
            before_block[layer] = amps
            _rotations(amps, weights[layer], -1)

        for layer in range(n_layers):
            for q in range(n):
                prefix[:] = before_block[layer]
                _rotations(prefix, weights[layer], q)
                for j in range(3):
                    idx = (layer * n + q) * 3 + j
                    for sign in range(2):
                        shifted[:] = weights[layer, q]
                        shifted[j] += HALF_PI if sign == 0 else -HALF_PI
                        amps[:] = prefix
                        _rot(amps, q, shifted[0], shifted[1], shifted[2])
                        _blocks(amps, scratch, weights, perm, layer + 1)
                        if sign == 0:
                            expect_z_kernel(amps, n, plus[k, idx])
                        else:
                            expect_z_kernel(amps, n, minus[k, idx])

        for q in range(n):
            _encode(prefix, angles[k], q)
            for j in range(2):
                idx = n_quantum + q * 2 + j
                for sign in range(2):
                    enc[:] = angles[k, q]
                    enc[j] += HALF_PI if sign == 0 else -HALF_PI
                    amps[:] = prefix
                    m00, m01, m10, m11 = _encoding_matrix(enc[0], enc[1])
                    apply_1q_kernel(amps, q, m00, m01, m10, m11)
                    _blocks(amps, scratch, weights, perm, 0)
                    if sign == 0:
                        expect_z_kernel(amps, n, plus[k, idx])
                    else:
                        expect_z_kernel(amps, n, minus[k, idx])


def circuit_expectations(angles, weights, perm):
    """<Z> of every qubit for a batch of encodings.

    Args:
        angles: (m, n, 2) encoding angles, ``[..., 0]`` for Ry and ``[..., 1]`` for Rz.
        weights: (L, n, 3) rotation angles (alpha, beta, gamma).
        perm: entangler gather indices from :func:`entangler_permutation`.

    Returns:
        (m, n) array of expectations.
    """
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty(angles.shape[:2])
    _expectations(angles, weights, perm, out)
    return out


def shifted_expectations(angles, weights, perm):
    """Expectations of every +/- pi/2 shifted circuit.

    The shift axis has length ``3 * L * n + 2 * n``: first every rotation
    angle in ``weights`` in C order, then the (Ry, Rz) encoding angles of
    each qubit.

    Returns:
        ``(plus, minus)``, each of shape (m, 3 L n + 2 n, n).
    """
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    m, n = angles.shape[:2]
    n_shifts = weights.size + 2 * n
    plus = np.empty((m, n_shifts, n))
    minus = np.empty((m, n_shifts, n))
    _shifted(angles, weights, perm, plus, minus)
    return plus, minus
