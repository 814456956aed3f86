import math
import struct

import numpy as np
import pytest

from qdqn_dper import checkpoint, statevector as sv
from qdqn_dper.circuit import entangler_pairs, entangler_permutation, shifted_expectations
from qdqn_dper.errors import NumericError
from qdqn_dper.model import (
    DEFAULT_CLASSICAL,
    DEFAULT_QUANTUM,
    Architecture,
    ModelParams,
    Variant,
    backward,
    copy_into,
    encode_angles,
    flat_assign,
    flat_view,
    forward,
    init_params,
    param_count,
    quantum_forward,
    quantum_param_count,
)


def reference_circuit(angles, weights, entangler="ring", shift=None):
    """Gate-by-gate circuit on the public statevector API.

    ``shift`` is ``(flat_index, delta)`` using the same index convention as
    :func:`shifted_expectations`.
    """
    angles = np.array(angles, dtype=float)
    weights = np.array(weights, dtype=float)
    n = angles.shape[0]
    if shift is not None:
        index, delta = shift
        if index < weights.size:
            weights.reshape(-1)[index] += delta
        else:
            angles.reshape(-1)[index - weights.size] += delta
    state = sv.init_zero(n)
    for q in range(n):
        sv.apply_h(state, q)
        sv.apply_ry(state, q, angles[q, 0])
        sv.apply_rz(state, q, angles[q, 1])
    for layer in weights:
        for control, target in entangler_pairs(n, entangler):
            sv.apply_cnot(state, control, target)
        for q in range(n):
            sv.apply_rot(state, q, *layer[q])
    return sv.pauli_z_expectations(state)


def reference_forward(params, obs):
    pre = params.pre_weights @ obs + params.pre_bias
    angles = np.stack([np.arctan(pre), np.arctan(pre ** 2)], axis=1)
    expz = reference_circuit(angles, params.quantum_params)
    return params.post_weights @ expz + params.post_bias


def fd_gradient(params, obs, upstream, h=1e-4):
    flat = params.flat
    grad = np.empty_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        up = np.dot(upstream, forward(params, obs))
        flat[i] = saved - h
        down = np.dot(upstream, forward(params, obs))
        flat[i] = saved
        grad[i] = (up - down) / (2 * h)
    return grad


def test_init_is_deterministic():
    a = init_params(np.random.default_rng(42), Variant.QUANTUM)
    b = init_params(np.random.default_rng(42), Variant.QUANTUM)
    assert a.flat.tobytes() == b.flat.tobytes()


def test_init_ranges():
    p = init_params(np.random.default_rng(0), Variant.QUANTUM)
    assert np.all(np.abs(p.pre_weights) <= 0.5)
    assert np.all(np.abs(p.post_weights) <= 1 / math.sqrt(8))
    assert np.all(np.abs(p.quantum_params) <= math.pi)
    assert not p.pre_bias.any() and not p.post_bias.any()


def test_parameter_counts():
    assert param_count(DEFAULT_QUANTUM) == 4 * 8 + 8 + 48 + 8 * 2 + 2 == 106
    assert quantum_param_count(DEFAULT_QUANTUM) == 48
    assert param_count(DEFAULT_CLASSICAL) == 40 + 8 * 8 + 8 + 18 == 130
    assert abs(130 - 106) / 106 <= 0.25
    assert len(init_params(np.random.default_rng(0), Variant.CLASSICAL)) == 130


def test_flat_view_round_trip_and_views_share_memory():
    p = init_params(np.random.default_rng(1))
    before = flat_view(p)
    flat_assign(p, flat_view(p))
    np.testing.assert_array_equal(p.flat, before)
    p.quantum_params[1, 7, 2] = 99.0
    assert p.flat[32 + 8 + 47] == 99.0


def test_copy_into_is_deep():
    src = init_params(np.random.default_rng(1))
    dst = ModelParams(src.arch)
    copy_into(src, dst)
    src.flat[:] = 0.0
    assert np.any(dst.flat != 0.0)


def test_encode_angles():
    np.testing.assert_array_equal(encode_angles(np.zeros(8)), np.zeros((8, 2)))
    np.testing.assert_allclose(encode_angles([1.0]), [[math.pi / 4, math.pi / 4]])
    y, z = encode_angles([-3.0])[0]
    assert y == pytest.approx(-1.2490457723982544, abs=1e-12)
    assert z == pytest.approx(1.4601391056210009, abs=1e-12)


def test_entangler_permutation_matches_cnot_sequence():
    rng = np.random.default_rng(2)
    for kind in ("ring", "chain"):
        amps = rng.normal(size=256) + 1j * rng.normal(size=256)
        state = sv.StateVector(amps.copy())
        for c, t in entangler_pairs(8, kind):
            sv.apply_cnot(state, c, t)
        np.testing.assert_array_equal(amps[entangler_permutation(8, kind)], state.amplitudes)


def test_zero_circuit_reads_zero():
    out = quantum_forward(np.zeros((2, 8, 3)), np.zeros((8, 2)))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)
    np.testing.assert_allclose(reference_circuit(np.zeros((8, 2)), np.zeros((2, 8, 3))), 0.0, atol=1e-12)


def test_circuit_matches_gate_by_gate_reference():
    rng = np.random.default_rng(3)
    for _ in range(5):
        angles = rng.uniform(-1.5, 1.5, (8, 2))
        weights = rng.uniform(-math.pi, math.pi, (2, 8, 3))
        np.testing.assert_allclose(quantum_forward(weights, angles), reference_circuit(angles, weights), atol=1e-12)
        assert np.all(np.abs(quantum_forward(weights, angles)) <= 1 + 1e-12)


def test_single_qubit_circuit_against_dense_matrices():
    theta_y, beta = 0.7, -1.3
    weights = np.array([[[0.0, beta, 0.0]]])
    angles = np.array([[theta_y, 0.0]])
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    ry = lambda t: np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]])
    psi = ry(beta) @ ry(theta_y) @ h @ np.array([1.0, 0.0])
    expected = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
    assert quantum_forward(weights, angles, entangler="none")[0] == pytest.approx(expected, abs=1e-12)


def test_shifted_kernel_matches_literal_shifted_circuits():
    rng = np.random.default_rng(4)
    angles = rng.uniform(-1.5, 1.5, (8, 2))
    weights = rng.uniform(-math.pi, math.pi, (2, 8, 3))
    plus, minus = shifted_expectations(angles[None], weights, entangler_permutation(8))
    assert plus.shape == (1, 64, 8)
    for index in [0, 5, 23, 24, 30, 47, 48, 49, 55, 63]:
        np.testing.assert_allclose(plus[0, index], reference_circuit(angles, weights, shift=(index, math.pi / 2)),
                                   atol=1e-12)
        np.testing.assert_allclose(minus[0, index], reference_circuit(angles, weights, shift=(index, -math.pi / 2)),
                                   atol=1e-12)


def test_forward_returns_bias_when_weights_are_zero():
    p = init_params(np.random.default_rng(5))
    p.pre_weights[...] = 0
    p.post_weights[...] = 0
    p.post_bias[...] = [0.25, -1.5]
    for obs in np.random.default_rng(6).normal(size=(4, 4)):
        np.testing.assert_array_equal(forward(p, obs), [0.25, -1.5])


def test_forward_is_pure_and_matches_composition():
    rng = np.random.default_rng(7)
    p = init_params(rng)
    p.pre_bias[...] = rng.normal(size=8)
    p.post_bias[...] = rng.normal(size=2)
    obs = rng.normal(size=4)
    first = forward(p, obs)
    np.testing.assert_array_equal(first, forward(p, obs))
    np.testing.assert_allclose(first, reference_forward(p, obs), atol=1e-12)


def test_forward_rejects_non_finite_observation():
    p = init_params(np.random.default_rng(0))
    with pytest.raises(NumericError):
        forward(p, [0.0, np.nan, 0.0, 0.0])


@pytest.mark.parametrize("variant", list(Variant))
def test_zero_upstream_gives_zero_gradient(variant):
    p = init_params(np.random.default_rng(8), variant)
    assert not backward(p, np.ones(4), np.zeros(2)).flat.any()


def _random_triple(rng, variant=Variant.QUANTUM):
    p = init_params(rng, variant)
    p.pre_bias[...] = rng.normal(scale=0.5, size=8)
    p.post_bias[...] = rng.normal(size=2)
    if variant is Variant.CLASSICAL:
        p.mid_bias[...] = rng.normal(scale=0.5, size=8)
    return p, rng.normal(size=4), rng.normal(size=2)


def test_quantum_parameter_shift_matches_finite_difference():
    rng = np.random.default_rng(9)
    p, obs, up = _random_triple(rng)
    analytic = backward(p, obs, up)
    numeric = fd_gradient(p, obs, up)
    sl = slice(40, 88)
    assert np.max(np.abs(analytic.flat[sl] - numeric[sl])) < 1e-5


def test_pre_layer_gradient_matches_finite_difference():
    rng = np.random.default_rng(10)
    p, obs, up = _random_triple(rng)
    analytic = backward(p, obs, up)
    numeric = fd_gradient(p, obs, up)
    assert np.max(np.abs(analytic.pre_weights.ravel() - numeric[:32])) < 1e-4
    assert np.max(np.abs(analytic.pre_bias - numeric[32:40])) < 1e-4


@pytest.mark.parametrize("variant", list(Variant))
def test_full_gradient_matches_finite_difference(variant):
    rng = np.random.default_rng(11)
    for _ in range(3):
        p, obs, up = _random_triple(rng, variant)
        assert np.max(np.abs(backward(p, obs, up).flat - fd_gradient(p, obs, up))) < 1e-4


def test_batched_backward_is_sum_of_singles():
    rng = np.random.default_rng(12)
    p = init_params(rng)
    obs = rng.normal(size=(3, 4))
    up = rng.normal(size=(3, 2))
    total = sum(backward(p, o, u).flat for o, u in zip(obs, up))
    np.testing.assert_allclose(backward(p, obs, up).flat, total, atol=1e-12)


def test_backward_is_deterministic():
    rng = np.random.default_rng(13)
    p, obs, up = _random_triple(rng)
    assert backward(p, obs, up).flat.tobytes() == backward(p, obs, up).flat.tobytes()


@pytest.mark.parametrize("arch", [DEFAULT_QUANTUM, DEFAULT_CLASSICAL, Architecture(n_qubits=3, n_layers=1,
                                                                                   entangler="chain")])
def test_checkpoint_round_trip(tmp_path, arch):
    p = init_params(np.random.default_rng(14), arch=arch)
    path = tmp_path / "checkpoint.bin"
    checkpoint.save(path, p, seed=7)
    loaded, seed = checkpoint.load(path)
    assert seed == 7
    assert loaded.arch == arch
    assert loaded.flat.tobytes() == p.flat.tobytes()


def test_checkpoint_byte_layout():
    p = init_params(np.random.default_rng(15))
    blob = checkpoint.dumps(p, seed=3)
    assert blob[:8] == b"QDQNCKPT"
    assert struct.unpack_from("<IIq", blob, 8) == (1, 0, 3)
    assert struct.unpack_from("<5I", blob, 24) == (8, 2, 4, 2, 0)
    assert struct.unpack_from("<I", blob, 44) == (5,)
    values = np.frombuffer(blob[-106 * 8:], dtype="<f8")
    np.testing.assert_array_equal(values, p.flat)
    assert struct.unpack_from("<Q", blob, len(blob) - 106 * 8 - 8) == (106,)
