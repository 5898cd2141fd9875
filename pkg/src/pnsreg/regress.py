"""Regression in the PNS score space.

Score 1 is an angle and is fitted with wrapped least squares (or a von
Mises model); the remaining scores are fitted by ordinary least squares.
Predictions are mapped back through the fitted PNS model to the simplex.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, special

from .geom import circular_frechet_mean, wrap
from .pns import PnsModel, fit_pns, scores_to_sphere
from .simplex import inverse_power_transform, power_transform, project_to_orthant

log = logging.getLogger(__name__)

INTERCEPT_OFFSETS = (0.0, np.pi / 2, -np.pi / 2, np.pi)
KAPPA_CAP = 1e6
LIFT_MARGIN = 1e-6


class RegressionError(ValueError):
    pass


class CircularFit(NamedTuple):
    beta: np.ndarray
    converged: bool
    rss: float


class VonMisesFit(NamedTuple):
    mu0: float
    gamma: np.ndarray
    kappa: float
    converged: bool
    kappa_capped: bool


def design_matrix(x) -> np.ndarray:
    """Prepend an intercept column to predictors (rows are observations)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def _check_design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise RegressionError("design must be 2-d")
    n, m = X.shape
    if n <= m:
        raise RegressionError(f"need more observations than coefficients (n={n}, m={m})")
    if not np.all(np.isfinite(X)):
        raise RegressionError("design contains non-finite entries")
    if np.linalg.matrix_rank(X) < m:
        raise RegressionError("design matrix is rank deficient")
    return X


def _ols(X, y):
    return np.linalg.lstsq(X, y, rcond=None)[0]


def wrapped_rss(y, X, beta) -> float:
    r = wrap(np.asarray(y) - np.asarray(X) @ beta)
    return float(np.sum(np.square(r)))


def _circular_starts(y, X):
    """Starting coefficients: ordinary least squares with shifted
    intercepts, plus fits to ``y`` unwrapped along each predictor."""
    start = _ols(X, y)
    starts = []
    for offset in INTERCEPT_OFFSETS:
        beta = start.copy()
        beta[0] += offset
        starts.append(beta)
    for j in range(1, X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        yu = np.empty_like(y)
        yu[order] = np.unwrap(y[order])
        starts.append(_ols(X, yu))
    return starts


def fit_circular_ls(y, X, max_iter: int = 100, tol: float = 1e-10) -> CircularFit:
    """Wrapped least squares for an angular response.

    Minimizes ``sum wrap(y_i - X_i @ beta)**2``. Starting values come from
    ordinary least squares (shifted by four intercept offsets) and from
    the response unwrapped along each predictor in turn. From each start
    the targets are repeatedly unwrapped around the current fit and
    refitted until the coefficients stop changing; the candidate with the
    smallest wrapped residual sum of squares wins. The first column of
    ``X`` must be the intercept; the returned intercept is wrapped to
    ``[-pi, pi)``.
    """
    X = _check_design(X)
    y = wrap(np.asarray(y, dtype=float))
    best = None
    for beta in _circular_starts(y, X):
        converged = False
        for _ in range(max_iter):
            fitted = X @ beta
            new = _ols(X, fitted + wrap(y - fitted))
            change = np.max(np.abs(new - beta))
            beta = new
            if change < tol:
                converged = True
                break
        rss = wrapped_rss(y, X, beta)
        if best is None or rss < best.rss:
            best = CircularFit(beta, converged, rss)
    beta = best.beta.copy()
    beta[0] = wrap(beta[0])
    if not best.converged:
        log.warning("wrapped least squares hit %d iterations", max_iter)
    return CircularFit(beta, best.converged, best.rss)


def _a1(kappa):
    return special.i1e(kappa) / special.i0e(kappa)


def _a1_inverse(rbar):
    if rbar <= 0:
        return 0.0, False
    if rbar >= _a1(KAPPA_CAP):
        return KAPPA_CAP, True
    return optimize.brentq(lambda k: _a1(k) - rbar, 1e-12, KAPPA_CAP, xtol=1e-12), False


def vonmises_mean(mu0, gamma, Z):
    """Mean direction ``mu0 + 2 arctan(Z @ gamma)``."""
    return mu0 + 2.0 * np.arctan(np.asarray(Z) @ gamma)


def fit_circular_vonmises(y, X, max_iter: int = 200, tol: float = 1e-12) -> VonMisesFit:
    """Circular-linear regression with a von Mises response.

    The mean direction is ``mu0 + 2 arctan(x @ gamma)`` where ``x`` are
    the predictor columns of ``X`` (the intercept column is dropped).
    ``(mu0, gamma)`` maximize ``sum cos(y - mu)`` by scoring steps with
    backtracking, and ``kappa`` then solves ``A1(kappa) = mean cos(y - mu)``.
    """
    X = _check_design(X)
    y = wrap(np.asarray(y, dtype=float))
    Z = X[:, 1:]
    p = Z.shape[1]

    def loglik(theta):
        return float(np.sum(np.cos(y - vonmises_mean(theta[0], theta[1:], Z))))

    mu_start = circular_frechet_mean(y)
    slope = _ols(X, mu_start + wrap(y - mu_start))[1:] / 2.0
    starts = [np.concatenate([[mu_start], np.zeros(p)]),
              np.concatenate([[mu_start], slope])]

    best = None
    for theta in starts:
        ll = loglik(theta)
        converged = False
        for _ in range(max_iter):
            eta = Z @ theta[1:]
            G = np.column_stack([np.ones(len(y)), 2.0 * Z / (1.0 + eta ** 2)[:, None]])
            resid = y - theta[0] - 2.0 * np.arctan(eta)
            step = _ols(G, np.sin(resid))
            t, improved = 1.0, False
            for _ in range(40):
                cand = theta + t * step
                ll_new = loglik(cand)
                if ll_new > ll:
                    improved = True
                    break
                t *= 0.5
            if not improved:
                converged = True
                break
            gain = ll_new - ll
            theta, ll = cand, ll_new
            if gain < tol:
                converged = True
                break
        if best is None or ll > best[1]:
            best = (theta, ll, converged)

    theta, ll, converged = best
    rbar = ll / len(y)
    kappa, capped = _a1_inverse(rbar)
    if capped:
        warnings.warn("von Mises concentration capped; data are nearly noiseless",
                      RuntimeWarning, stacklevel=2)
    return VonMisesFit(float(wrap(theta[0])), theta[1:].copy(), float(kappa),
                       converged, capped)


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Coefficients mapping a design row to the first ``k_used`` scores.

    ``beta_circular`` holds the score-1 coefficients. For the least
    squares link the fitted angle is ``x @ beta``; for the von Mises link
    it is ``beta[0] + 2 arctan(x[1:] @ beta[1:])``.
    """

    pns: PnsModel
    beta_circular: np.ndarray
    B_linear: np.ndarray
    k_used: int
    residual_variances: np.ndarray
    circular_link: str = "ls"
    kappa: Optional[float] = None
    converged: bool = True

    @property
    def n_coef(self) -> int:
        return self.beta_circular.size

    @property
    def alpha(self) -> float:
        return self.pns.alpha


def fit_score_regression(scores, X, pns: PnsModel, k_used: Optional[int] = None,
                         circular: str = "ls") -> RegressionModel:
    """Second stage of the two-stage fit: regress PNS scores on ``X``.

    Score 1 is rescaled to an angle ``s_1 / radius`` and fitted with
    :func:`fit_circular_ls` (``circular="ls"``) or
    :func:`fit_circular_vonmises` (``circular="vonmises"``). Scores
    ``2..k_used`` get ordinary least squares.
    """
    s = np.asarray(scores, dtype=float)
    X = _check_design(X)
    d = pns.dim
    if s.shape != (X.shape[0], d):
        raise RegressionError(f"scores shape {s.shape} does not match ({X.shape[0]}, {d})")
    k = d if k_used is None else int(k_used)
    if not 1 <= k <= d:
        raise RegressionError(f"k_used must be in 1..{d}")
    n, m = X.shape

    y = wrap(s[:, 0] / pns.radius)
    if circular == "ls":
        fit = fit_circular_ls(y, X)
        beta, converged, kappa = fit.beta, fit.converged, None
        circ_res = wrap(y - X @ beta)
    elif circular == "vonmises":
        fit = fit_circular_vonmises(y, X)
        beta = np.concatenate([[fit.mu0], fit.gamma])
        converged, kappa = fit.converged, fit.kappa
        circ_res = wrap(y - vonmises_mean(fit.mu0, fit.gamma, X[:, 1:]))
    else:
        raise ValueError(f"unknown circular method {circular!r}")

    if k > 1:
        B = _ols(X, s[:, 1:k]).T
        lin_res = s[:, 1:k] - X @ B.T
    else:
        B = np.zeros((0, m))
        lin_res = np.zeros((n, 0))
    dof = n - m
    resvar = np.concatenate([[np.sum(circ_res ** 2) / dof],
                             np.sum(lin_res ** 2, axis=0) / dof])
    return RegressionModel(pns=pns, beta_circular=np.asarray(beta, dtype=float),
                           B_linear=B, k_used=k, residual_variances=resvar,
                           circular_link=circular, kappa=kappa, converged=converged)


def predicted_angle(model: RegressionModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    b = model.beta_circular
    if model.circular_link == "vonmises":
        return wrap(vonmises_mean(b[0], b[1:], X[:, 1:]))
    return wrap(X @ b)


def predict_scores(model: RegressionModel, X) -> np.ndarray:
    """Predicted score vectors (zeros beyond ``k_used``).

    Level scores that would lift past an axis are clamped just inside the
    valid range, with a warning.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_coef:
        raise RegressionError(
            f"design has {X.shape[1]} columns, model expects {model.n_coef}")
    pns = model.pns
    s = np.zeros((X.shape[0], pns.dim))
    s[:, 0] = pns.radius * predicted_angle(model, X)
    if model.k_used > 1:
        s[:, 1:model.k_used] = X @ model.B_linear.T
    clamped = False
    for j in range(1, model.k_used):
        lo, hi = pns.score_range(j + 1)
        if lo == hi:
            s[:, j] = 0.0
            continue
        margin = LIFT_MARGIN * pns.scales[pns.dim - 1 - j]
        col = np.clip(s[:, j], lo + margin, hi - margin)
        clamped |= bool(np.any(col != s[:, j]))
        s[:, j] = col
    if clamped:
        warnings.warn("predicted scores clamped to the valid lift range",
                      RuntimeWarning, stacklevel=2)
    return s


def predict_composition(model: RegressionModel, X) -> np.ndarray:
    """Fitted compositions for design rows ``X`` (one composition per row)."""
    q = scores_to_sphere(predict_scores(model, X), model.pns)
    return inverse_power_transform(project_to_orthant(q), model.alpha)


def fit_compositional_regression(Y, x, alpha: float = 0.5, selection: str = "bic",
                                 k_used: Optional[int] = None,
                                 circular: str = "ls") -> RegressionModel:
    """Two-stage fit: PNS on the transformed responses, then score regression.

    ``x`` holds raw predictors (no intercept column).
    """
    q = power_transform(Y, alpha)
    pns, scores = fit_pns(q, method=selection, alpha=alpha)
    return fit_score_regression(scores, design_matrix(x), pns, k_used, circular)
