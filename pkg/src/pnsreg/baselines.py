"""Euclidean comparison methods for compositional regression.

Each fit takes compositions ``Y`` (rows) and a design matrix ``X`` whose
first column is the intercept, and returns a :class:`BaselineModel` whose
``predict`` yields valid compositions. Fitted values leaving the simplex
are clamped at zero and renormalized.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .regress import RegressionError, _check_design, _ols


class BaselineKind(str, enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    PCA = "pca"
    PCA_ARCSINE = "pca_arcsine"


def clamp_to_simplex(Y) -> np.ndarray:
    """Zero out negative parts and close each row to unit sum.

    Rows with no positive part fall back to the uniform composition.
    """
    Y = np.clip(np.atleast_2d(np.asarray(Y, dtype=float)), 0.0, None)
    total = Y.sum(axis=1, keepdims=True)
    dead = total[:, 0] <= 0
    Y[dead] = 1.0
    total[dead] = Y.shape[1]
    return Y / total


def arcsine(Y):
    return np.arcsin(np.sqrt(np.clip(Y, 0.0, 1.0)))


def arcsine_inverse(T):
    """Map arcsine-square-root values back to the simplex."""
    T = np.clip(np.asarray(T, dtype=float), 0.0, np.pi / 2)
    return clamp_to_simplex(np.sin(T) ** 2)


def quadratic_design(X) -> np.ndarray:
    """Expand ``(1, x_1..x_p)`` into ``(1, x_1..x_p, x_1^2..x_p^2)``."""
    X = np.asarray(X, dtype=float)
    return np.column_stack([X, X[:, 1:] ** 2])


@dataclass(frozen=True, eq=False)
class BaselineModel:
    kind: BaselineKind
    coef: np.ndarray                 # (n_design, n_targets)
    center: Optional[np.ndarray] = None
    axis: Optional[np.ndarray] = None

    def expand(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return quadratic_design(X) if self.kind is BaselineKind.QUADRATIC else X

    def fitted_targets(self, X) -> np.ndarray:
        """Unclamped fitted values in the space the model was fitted in."""
        Xe = self.expand(X)
        if Xe.shape[1] != self.coef.shape[0]:
            raise RegressionError(
                f"design has {Xe.shape[1]} columns, model expects {self.coef.shape[0]}")
        out = Xe @ self.coef
        if self.axis is not None:
            out = self.center + out * self.axis
        return out

    def predict(self, X) -> np.ndarray:
        out = self.fitted_targets(X)
        if self.kind is BaselineKind.PCA_ARCSINE:
            return arcsine_inverse(out)
        return clamp_to_simplex(out)


def fit_linear_simplex(Y, X) -> BaselineModel:
    """Separate ordinary least squares for every part."""
    X = _check_design(X)
    return BaselineModel(BaselineKind.LINEAR, _ols(X, np.asarray(Y, dtype=float)))


def fit_quadratic_simplex(Y, X) -> BaselineModel:
    """Per-part least squares on the intercept, linear and squared terms."""
    Xq = _check_design(quadratic_design(_check_design(X)))
    return BaselineModel(BaselineKind.QUADRATIC, _ols(Xq, np.asarray(Y, dtype=float)))


def first_principal_axis(Y):
    """Column means and leading principal direction of rows of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    center = Y.mean(axis=0)
    _, sv, vt = np.linalg.svd(Y - center, full_matrices=False)
    if sv[0] <= 1e-14 * max(1.0, np.abs(Y).max()):
        raise RegressionError("responses have zero variance")
    axis = vt[0]
    # fix the sign so the largest loading is positive
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    return center, axis


def fit_pca_score1(Y, X, transform: Optional[str] = None) -> BaselineModel:
    """Regress the first principal component score on ``X``.

    With ``transform="arcsine"`` the PCA is carried out on
    ``arcsin(sqrt(y))`` and reconstructions are mapped back with
    ``sin(t)**2`` (after clipping ``t`` to ``[0, pi/2]``).
    """
    X = _check_design(X)
    Y = np.asarray(Y, dtype=float)
    if transform not in (None, "none", "arcsine"):
        raise ValueError(f"unknown transform {transform!r}")
    arc = transform == "arcsine"
    T = arcsine(Y) if arc else Y
    if T.shape[0] <= T.shape[1]:
        raise RegressionError("PCA baseline needs more observations than parts")
    center, axis = first_principal_axis(T)
    score = (T - center) @ axis
    coef = _ols(X, score)[:, None]
    kind = BaselineKind.PCA_ARCSINE if arc else BaselineKind.PCA
    return BaselineModel(kind, coef, center=center, axis=axis)
