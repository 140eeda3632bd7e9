import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locstate.channels import (
    KrausSet,
    LocalChannel,
    PostSelectionError,
    Selector,
    apply_channel,
    apply_local_channel,
    apply_postselected,
    build_sigma,
    kraus_from_json,
    kraus_to_json,
    kraus_to_stiefel,
    local_channel_from_json,
    local_channel_to_json,
    sigma_matrix,
    stiefel_to_kraus,
)
from locstate.optimizer import random_local_channel
from locstate.qinfo import random_density_matrix
from locstate.stiefel import random_point, stiefel_error

SINK = [np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])]


def flattened_kraus_apply(c: LocalChannel, rho):
    """Oracle: sum over explicit K_i^A (x) K_j^B in a double loop."""
    out = np.zeros_like(rho, dtype=complex)
    for ka in c.kraus_a():
        for kb in c.kraus_b():
            k = np.kron(ka, kb)
            out += k @ rho @ k.conj().T
    return out


def test_kraus_stacking_roundtrip_and_padding():
    s = kraus_to_stiefel(SINK)
    assert s.shape == (8, 2)
    assert stiefel_error(s) < 1e-15
    k = stiefel_to_kraus(s)
    assert k.operators.shape == (4, 2, 2)
    assert np.allclose(k.operators[:2], SINK) and np.allclose(k.operators[2:], 0)


def test_non_trace_preserving_rejected():
    with pytest.raises(ValueError):
        kraus_to_stiefel([np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        kraus_to_stiefel([np.eye(2) / 2] * 5)  # more than N^2 operators


def test_sink_channel_maps_everything_to_zero(rng):
    for _ in range(5):
        rho = random_density_matrix(2, rng)
        assert np.allclose(apply_channel(KrausSet(SINK), rho), np.diag([1, 0]), atol=1e-15)


def test_sigma_is_a_permutation_for_two_qubits():
    sigma = build_sigma(8, 2, 8, 2)
    assert sorted(sigma.tolist()) == list(range(64))
    p = sigma_matrix(LocalChannel.identity())
    assert np.allclose(p @ p.conj().T, np.eye(64))


def test_stacked_equals_permuted_tensor_and_product_kraus(rng):
    c = random_local_channel((2, 2), rng)
    assert np.allclose(c.stacked(), sigma_matrix(c) @ c.tilde())
    blocks = c.product_kraus()
    ka, kb = c.kraus_a(), c.kraus_b()
    for i in range(4):
        for j in range(4):
            assert np.allclose(blocks[i * 4 + j], np.kron(ka[i], kb[j]))


def test_stacked_is_on_the_manifold(rng):
    c = random_local_channel((2, 2), rng)
    assert stiefel_error(c.stacked()) < 1e-12
    assert c.feasibility_error() < 1e-12


def test_apply_local_channel_matches_flattened_kraus(rng):
    worst = 0.0
    for _ in range(100):
        c = random_local_channel((2, 2), rng)
        rho = random_density_matrix(4, rng)
        worst = max(worst, np.abs(apply_local_channel(c, rho) - flattened_kraus_apply(c, rho)).max())
    assert worst <= 1e-12


def test_mixed_dimensions(rng):
    c = LocalChannel(random_point(8, 2, rng), random_point(27, 3, rng))
    assert c.dims == (2, 3) and c.stacked().shape == (6**3, 6)
    rho = random_density_matrix(6, rng)
    out = apply_local_channel(c, rho)
    assert np.allclose(out, flattened_kraus_apply(c, rho), atol=1e-12)
    assert abs(np.trace(out) - 1) < 1e-12


def test_identity_channel(rng):
    rho = random_density_matrix(4, rng)
    assert np.allclose(apply_local_channel(LocalChannel.identity(), rho), rho, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_channel_output_is_a_state(seed):
    rng = np.random.default_rng(seed)
    out = apply_local_channel(random_local_channel((2, 2), rng), random_density_matrix(4, rng))
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.allclose(out, out.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_selector_and_postselection(rng):
    c = random_local_channel((2, 2), rng)
    rho = random_density_matrix(4, rng)
    omega = Selector.keep(c, [0])
    assert omega.mask.sum() == 1 and omega.matrix.shape == (64, 64)
    state, prob = apply_postselected(c, omega, rho)
    k0 = c.product_kraus()[0]
    tau = k0 @ rho @ k0.conj().T
    assert prob == pytest.approx(np.trace(tau).real, abs=1e-14)
    assert np.allclose(state, tau / prob, atol=1e-12)
    full, p_all = apply_postselected(c, Selector.keep(c, range(16)), rho)
    assert p_all == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(full, apply_local_channel(c, rho), atol=1e-12)


def test_selector_matrix_projects_kept_blocks(rng):
    c = random_local_channel((2, 2), rng)
    omega = Selector.keep(c, [0, 5])
    kept = omega.matrix @ c.stacked()
    blocks = kept.reshape(16, 4, 4)
    for b in range(16):
        assert np.allclose(blocks[b], c.product_kraus()[b] if b in (0, 5) else 0)


def test_postselection_measure_zero(rng):
    c = LocalChannel.from_kraus(SINK, SINK)
    rho = np.diag([0, 0, 0, 1.0]).astype(complex)  # |11>: block 0 (|0><0| (x) |0><0|) never fires
    with pytest.raises(PostSelectionError):
        apply_postselected(c, Selector.keep(c, [0]), rho)


def test_local_channel_json_roundtrip(rng):
    c = random_local_channel((2, 2), rng)
    text = json.dumps(local_channel_to_json(c))
    back = local_channel_from_json(text)
    assert np.array_equal(back.s_a, c.s_a) and np.array_equal(back.s_b, c.s_b)
    doc = local_channel_to_json(c)
    doc["s_a"][0][0] = [5.0, 0.0]
    with pytest.raises(ValueError):
        local_channel_from_json(doc)


def test_kraus_json_roundtrip(rng):
    k = KrausSet(random_local_channel((2, 2), rng).kraus_a())
    back = kraus_from_json(json.dumps(kraus_to_json(k)))
    assert np.array_equal(back.operators, k.operators)
    assert back.completeness_error() < 1e-12
