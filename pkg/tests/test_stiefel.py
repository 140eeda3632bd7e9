import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locstate.stiefel import (
    is_stiefel,
    project_to_tangent,
    random_point,
    real_hs_inner,
    retract,
    stiefel_error,
    tangency_error,
)

from conftest import cgauss

seeds = st.integers(0, 2**32 - 1)
shapes = st.sampled_from([(2, 1), (4, 2), (8, 2), (16, 4), (64, 4)])


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_projection_identities(seed, shape):
    rng = np.random.default_rng(seed)
    s = random_point(*shape, rng)
    x = cgauss(rng, shape)
    t = project_to_tangent(s, x)
    assert np.max(np.abs(project_to_tangent(s, s))) <= 1e-12
    assert tangency_error(s, t) <= 1e-10
    assert np.max(np.abs(project_to_tangent(s, t) - t)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, shapes, st.floats(1e-4, 1.0))
def test_retraction_stays_feasible(seed, shape, scale):
    rng = np.random.default_rng(seed)
    s = random_point(*shape, rng)
    t = project_to_tangent(s, cgauss(rng, shape))
    assert stiefel_error(retract(s, scale * t)) <= 1e-12


def test_retraction_first_order(rng):
    s = random_point(16, 4, rng)
    t = project_to_tangent(s, cgauss(rng, (16, 4)))
    eps = 1e-6
    assert np.max(np.abs(retract(s, eps * t) - (s + eps * t))) <= 1e-10


def test_retract_zero_step_is_identity(rng):
    s = random_point(8, 2, rng)
    assert np.allclose(retract(s, np.zeros_like(s)), s, atol=1e-14)


def test_projection_is_orthogonal(rng):
    # x - pi(x) is normal: orthogonal to every tangent vector in the real inner product
    s = random_point(8, 2, rng)
    x = cgauss(rng, (8, 2))
    normal = x - project_to_tangent(s, x)
    for _ in range(5):
        t = project_to_tangent(s, cgauss(rng, (8, 2)))
        assert abs(real_hs_inner(normal, t)) < 1e-12


def test_random_point_and_membership(rng):
    s = random_point(8, 2, rng)
    assert is_stiefel(s)
    assert not is_stiefel(2 * s)
    with pytest.raises(ValueError):
        random_point(1, 2, rng)


def test_shape_mismatch_raises(rng):
    s = random_point(4, 2, rng)
    with pytest.raises(ValueError):
        project_to_tangent(s, np.zeros((4, 1)))
    with pytest.raises(ValueError):
        retract(s, np.zeros((2, 2)))
