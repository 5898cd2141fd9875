"""Sphere geometry primitives.

Points on ``S^m`` are plain numpy vectors of length ``m + 1`` with unit
norm. The "north pole" of ``S^m`` is the last basis vector ``e_{m+1}``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

HALF_PI = np.pi / 2


class GeometryError(ValueError):
    """Raised for degenerate or out-of-domain geometric input."""


class Kind(str, enum.Enum):
    GREAT = "great"
    SMALL = "small"


@dataclass(frozen=True, eq=False)
class Subsphere:
    """Subsphere ``{x : d(x, axis) = angle}`` of ``S^m``."""

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.ndim != 1 or axis.size < 2:
            raise GeometryError("axis must be a vector of length >= 2")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise GeometryError("axis must have unit norm")
        if not (0.0 < self.angle <= HALF_PI):
            raise GeometryError(f"angle {self.angle!r} outside (0, pi/2]")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def kind(self) -> Kind:
        return Kind.GREAT if self.angle == HALF_PI else Kind.SMALL

    @property
    def dim(self) -> int:
        """Dimension ``m`` of the sphere the subsphere lives in."""
        return self.axis.size - 1


def wrap(theta):
    """Wrap angles to ``[-pi, pi)``."""
    theta = np.asarray(theta, dtype=float)
    out = theta - 2 * np.pi * np.floor((theta + np.pi) / (2 * np.pi))
    # floating point can land exactly on +pi
    out = np.where(out >= np.pi, out - 2 * np.pi, out)
    return out if out.ndim else float(out)


def unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def geodesic_dist(a, b):
    """Arc length between unit vectors.

    Works row-wise when either argument is a 2-d array of points.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise GeometryError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.arccos(np.clip(np.sum(a * b, axis=-1), -1.0, 1.0))


def _plane_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation taking unit ``a`` to unit ``b`` in ``span{a, b}``."""
    n = a.size
    cos_t = float(np.clip(a @ b, -1.0, 1.0))
    c = a - b * cos_t
    norm_c = np.linalg.norm(c)
    if norm_c < 1e-15:
        return np.eye(n)
    c = c / norm_c
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    bc = np.outer(b, c)
    return (np.eye(n) + (bc - bc.T) * sin_t
            + (np.outer(b, b) + np.outer(c, c)) * (cos_t - 1.0))


def rotation_to_pole(v) -> np.ndarray:
    """Rotation matrix ``R`` with ``R @ v = e_{m+1}``.

    The rotation acts in the plane spanned by ``v`` and the pole and is
    the identity on its orthogonal complement. For ``v`` near the south
    pole it is composed of two quarter turns through ``e_1``.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    pole = np.zeros(n)
    pole[-1] = 1.0
    if v[-1] < -1.0 + 1e-9:
        mid = np.zeros(n)
        mid[0] = 1.0
        return _plane_rotation(mid, pole) @ _plane_rotation(v, mid)
    return _plane_rotation(v, pole)


def project_to_subsphere(x, s: Subsphere) -> np.ndarray:
    """Closest point of the subsphere ``s`` to ``x`` along the geodesic
    from the axis through ``x``."""
    x = np.asarray(x, dtype=float)
    rho = geodesic_dist(x, s.axis)
    sin_rho = np.sin(rho)
    if np.any(sin_rho < 1e-12):
        raise GeometryError("point coincides with the subsphere axis or its antipode")
    sin_rho = np.asarray(sin_rho)[..., None]
    rho = np.asarray(rho)[..., None]
    return (np.sin(s.angle) * x + np.sin(rho - s.angle) * s.axis) / sin_rho


def drop_dimension(x, s: Subsphere, tol: float = 1e-6) -> np.ndarray:
    """Coordinates on ``S^{m-1}`` of a point lying on ``s``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(geodesic_dist(x, s.axis) - s.angle) > tol):
        raise GeometryError("point does not lie on the subsphere")
    rot = rotation_to_pole(s.axis)
    y = x @ rot.T
    return y[..., :-1] / np.sin(s.angle)


def lift_dimension(p, s: Subsphere, residual=0.0) -> np.ndarray:
    """Inverse of :func:`drop_dimension`, displaced off ``s`` by ``residual``.

    The result lies at distance ``s.angle + residual`` from the axis.
    """
    p = np.asarray(p, dtype=float)
    ang = s.angle + np.asarray(residual, dtype=float)
    if np.any(ang <= 0.0) or np.any(ang >= np.pi):
        raise GeometryError("lifted angle outside (0, pi)")
    return _lift(p, s, ang)


def _lift(p, s: Subsphere, ang) -> np.ndarray:
    ang = np.asarray(ang, dtype=float)
    y = np.concatenate([np.sin(ang)[..., None] * p, np.cos(ang)[..., None]
                        * np.ones(p.shape[:-1] + (1,))], axis=-1)
    return y @ rotation_to_pole(s.axis)


def circular_frechet_mean(angles) -> float:
    """Intrinsic mean on the circle, minimizing ``sum wrap(theta - mu)**2``.

    Every local minimizer has the form ``mean(theta) + 2*pi*j/n``, so all
    ``n`` such candidates are scored together with the extrinsic mean
    direction. Ties go to the smallest wrapped value.
    """
    theta = wrap(np.atleast_1d(np.asarray(angles, dtype=float)))
    n = theta.size
    if n == 0:
        raise ValueError("circular_frechet_mean of empty input")
    extrinsic = np.arctan2(np.sin(theta).sum(), np.cos(theta).sum())
    cands = np.concatenate([theta.mean() + 2 * np.pi * np.arange(n) / n,
                            [extrinsic]])
    cands = np.atleast_1d(wrap(cands))
    obj = (wrap(theta[None, :] - cands[:, None]) ** 2).sum(axis=1)
    best = obj.min()
    tied = cands[obj <= best + 1e-12 * max(1.0, best)]
    return float(tied.min())
