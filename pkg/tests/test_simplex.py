import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pnsreg.simplex import (
    CompositionError,
    inverse_power_transform,
    normalize,
    orthant_truncate,
    power_transform,
    project_to_orthant,
)

ALPHAS = (0.25, 0.5, 1.0)


def test_normalize_examples():
    np.testing.assert_allclose(normalize([2, 2, 4]), [0.25, 0.25, 0.5])
    np.testing.assert_allclose(normalize([1, 0, 0]), [1, 0, 0])
    with pytest.raises(CompositionError):
        normalize([0, 0, 0])
    with pytest.raises(CompositionError):
        normalize([1, -1, 2])


@pytest.mark.parametrize("alpha", ALPHAS)
def test_centre_maps_to_centre(alpha):
    c = np.full(3, 1 / 3)
    np.testing.assert_allclose(power_transform(c, alpha), np.full(3, 1 / np.sqrt(3)), atol=1e-15)
    np.testing.assert_allclose(inverse_power_transform(np.full(3, 1 / np.sqrt(3)), alpha), c,
                               atol=1e-15)


def test_square_root_example():
    q = power_transform([0.25, 0.25, 0.5], 0.5)
    np.testing.assert_allclose(q, [0.5, 0.5, np.sqrt(0.5)], atol=1e-15)
    np.testing.assert_allclose(inverse_power_transform([0.5, 0.5, 0.70710678], 0.5),
                               [0.25, 0.25, 0.5], atol=1e-8)


def test_vertex_fixed():
    np.testing.assert_array_equal(power_transform([1.0, 0.0, 0.0], 1.0), [1, 0, 0])


def test_bad_alpha():
    with pytest.raises(CompositionError):
        power_transform([0.5, 0.5], 0.0)


def test_truncate_examples():
    q = np.array([0.6, 0.8, 0.0])
    np.testing.assert_array_equal(orthant_truncate(q), q)
    np.testing.assert_allclose(orthant_truncate([-0.6, 0.8, 0.0]), [0, 1, 0])
    with pytest.raises(CompositionError):
        orthant_truncate([-1.0, 0.0, 0.0])


def test_project_to_orthant_never_fails():
    out = project_to_orthant(np.array([[-1.0, 0.0, 0.0], [-0.2, -0.9, -0.1]]))
    # rows without a positive part go to the vertex of their largest coordinate
    np.testing.assert_allclose(out, [[0, 1, 0], [0, 0, 1]])


compositions = st.integers(2, 12).flatmap(
    lambda D: arrays(np.float64, D, elements=st.floats(0, 1)).filter(lambda a: a.sum() > 1e-3))


@settings(max_examples=200, deadline=None)
@given(compositions, st.sampled_from(ALPHAS))
def test_round_trip(raw, alpha):
    x = normalize(raw)
    q = power_transform(x, alpha)
    assert np.all(q >= 0)
    assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(inverse_power_transform(q, alpha), x, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(compositions, st.sampled_from(ALPHAS), st.randoms(use_true_random=False))
def test_permutation_equivariance(raw, alpha, rnd):
    x = normalize(raw)
    perm = list(range(x.size))
    rnd.shuffle(perm)
    np.testing.assert_allclose(power_transform(x[perm], alpha), power_transform(x, alpha)[perm],
                               atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8).flatmap(
    lambda D: arrays(np.float64, D, elements=st.floats(-1, 1)).filter(lambda a: a.max() > 1e-3)))
def test_truncate_idempotent(q):
    once = orthant_truncate(q)
    assert np.all(once >= 0)
    np.testing.assert_allclose(orthant_truncate(once), once, atol=1e-15)


def test_batch_rows():
    rng = np.random.default_rng(0)
    X = normalize(rng.dirichlet(np.ones(5), size=50))
    Q = power_transform(X, 0.5)
    np.testing.assert_allclose(np.linalg.norm(Q, axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(inverse_power_transform(Q, 0.5), X, atol=1e-12)
