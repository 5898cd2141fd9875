import numpy as np
import pytest

from pnsreg.baselines import (
    BaselineKind,
    arcsine,
    arcsine_inverse,
    clamp_to_simplex,
    first_principal_axis,
    fit_linear_simplex,
    fit_pca_score1,
    fit_quadratic_simplex,
    quadratic_design,
)
from pnsreg.regress import RegressionError, design_matrix


def assert_valid(P):
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)


@pytest.fixture
def noisy(rng):
    x = rng.uniform(-1, 1, (60, 2))
    Y = rng.dirichlet([2, 3, 4, 1], size=60)
    return x, Y


def test_clamp_to_simplex():
    out = clamp_to_simplex([[0.5, -0.1, 0.6], [-1.0, -2.0, 0.0]])
    np.testing.assert_allclose(out, [[0.5 / 1.1, 0, 0.6 / 1.1], [1 / 3, 1 / 3, 1 / 3]])


class TestLinear:
    def test_constant_response(self, rng):
        x = rng.normal(size=(20, 2))
        comp = np.array([0.2, 0.3, 0.5])
        m = fit_linear_simplex(np.tile(comp, (20, 1)), design_matrix(x))
        np.testing.assert_allclose(m.coef[0], comp, atol=1e-12)
        np.testing.assert_allclose(m.coef[1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(m.predict(design_matrix(x)), np.tile(comp, (20, 1)),
                                   atol=1e-12)

    def test_exact_linear_trend(self):
        x = np.linspace(-1, 1, 30)
        Y = np.column_stack([0.3 + 0.1 * x, 0.3 - 0.05 * x, 0.4 - 0.05 * x])
        m = fit_linear_simplex(Y, design_matrix(x))
        assert np.max(np.abs(m.fitted_targets(design_matrix(x)) - Y)) < 1e-10

    def test_predictions_clamped(self):
        x = np.linspace(-1, 1, 30)
        Y = np.column_stack([0.3 + 0.1 * x, 0.3 - 0.05 * x, 0.4 - 0.05 * x])
        m = fit_linear_simplex(Y, design_matrix(x))
        assert_valid(m.predict(design_matrix([-100.0, 100.0, 1e9])))


class TestQuadratic:
    def test_design(self):
        X = design_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(quadratic_design(X),
                                      [[1, 1, 2, 1, 4], [1, 3, 4, 9, 16]])

    def test_linear_data_gives_null_squares(self):
        x = np.linspace(-1, 1, 30)
        Y = np.column_stack([0.3 + 0.1 * x, 0.3 - 0.05 * x, 0.4 - 0.05 * x])
        m = fit_quadratic_simplex(Y, design_matrix(x))
        np.testing.assert_allclose(m.coef[2], 0.0, atol=1e-12)

    def test_exact_quadratic(self):
        x = np.linspace(-1, 1, 30)
        Y = np.column_stack([0.3 + 0.1 * x ** 2, 0.3 - 0.1 * x ** 2 + 0.05 * x,
                             0.4 - 0.05 * x])
        m = fit_quadratic_simplex(Y, design_matrix(x))
        assert np.max(np.abs(m.fitted_targets(design_matrix(x)) - Y)) < 1e-10

    def test_nests_linear(self, noisy):
        x, Y = noisy
        X = design_matrix(x)
        rss_lin = np.sum((fit_linear_simplex(Y, X).fitted_targets(X) - Y) ** 2)
        rss_quad = np.sum((fit_quadratic_simplex(Y, X).fitted_targets(X) - Y) ** 2)
        assert rss_quad <= rss_lin + 1e-12


class TestPca:
    def test_one_dimensional_variation(self):
        x = np.linspace(-1, 1, 40)
        direction = np.array([1.0, -0.5, -0.5])
        Y = np.array([0.3, 0.35, 0.35]) + 0.2 * np.outer(x, direction)
        m = fit_pca_score1(Y, design_matrix(x))
        assert m.kind is BaselineKind.PCA
        np.testing.assert_allclose(m.predict(design_matrix(x)), Y, atol=1e-12)

    def test_reconstruction_identity(self, noisy):
        _, Y = noisy
        center, axis = first_principal_axis(Y)
        score = (Y - center) @ axis
        recon = center + np.outer(score, axis)
        resid = np.sum((Y - recon) ** 2)
        ev = np.linalg.eigvalsh(np.cov(Y.T, bias=True))
        # discarded variance: all eigenvalues except the largest
        assert resid == pytest.approx(Y.shape[0] * ev[:-1].sum(), rel=1e-10)

    def test_axis_sign_fixed(self, noisy):
        _, Y = noisy
        _, a = first_principal_axis(Y)
        _, b = first_principal_axis(Y[::-1])
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert a[np.argmax(np.abs(a))] > 0

    def test_zero_variance(self):
        Y = np.tile([0.2, 0.3, 0.5], (10, 1))
        with pytest.raises(RegressionError):
            fit_pca_score1(Y, design_matrix(np.arange(10.0)))

    def test_arcsine_round_trip(self, noisy):
        _, Y = noisy
        np.testing.assert_allclose(arcsine_inverse(arcsine(Y)), Y, atol=1e-12)

    def test_arcsine_observed_score_on_rank_one_data(self):
        # (sin^2 t, cos^2 t) is a straight line after the arcsine transform
        t = np.linspace(0.3, 1.2, 30)
        Y = np.column_stack([np.sin(t) ** 2, np.cos(t) ** 2])
        m = fit_pca_score1(Y, design_matrix(t), transform="arcsine")
        assert m.kind is BaselineKind.PCA_ARCSINE
        assert np.max(np.abs(m.predict(design_matrix(t)) - Y)) < 1e-8

    @pytest.mark.parametrize("transform", [None, "arcsine"])
    def test_predictions_valid(self, noisy, transform):
        x, Y = noisy
        m = fit_pca_score1(Y, design_matrix(x), transform=transform)
        assert_valid(m.predict(design_matrix(np.array([[1e6, -1e6], [0, 0], [-50, 3]]))))

    def test_unknown_transform(self, noisy):
        x, Y = noisy
        with pytest.raises(ValueError):
            fit_pca_score1(Y, design_matrix(x), transform="logit")


def test_boundary_compositions_with_zeros(rng):
    x = rng.uniform(-1, 1, 40)
    Y = rng.dirichlet([1, 1, 1], size=40)
    Y[::4, 0] = 0.0
    Y[1::4, :2] = 0.0
    Y /= Y.sum(axis=1, keepdims=True)
    X = design_matrix(x)
    for m in (fit_linear_simplex(Y, X), fit_quadratic_simplex(Y, X), fit_pca_score1(Y, X),
              fit_pca_score1(Y, X, transform="arcsine")):
        assert_valid(m.predict(design_matrix(np.linspace(-5, 5, 21))))
