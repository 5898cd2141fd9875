"""Backward Principal Nested Spheres.

Data on ``S^d`` are reduced through a sequence of fitted subspheres
``S^d > A_1 > ... > A_{d-1} ~ S^1`` and finally summarized by a circular
mean. Each observation gets ``d`` scores ``(s_1, ..., s_d)``: ``s_1`` is
the (scaled) angle on the final circle and ``s_k`` for ``k >= 2`` is the
scaled signed residual from the level fitted on ``S^k``.

Residual signs follow ``d(x, axis) - angle``: positive means farther from
the axis than the subsphere. Level residuals are multiplied by the
product of ``sin(angle)`` over earlier levels so that every score is an
arc length on the original sphere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .geom import (
    HALF_PI,
    GeometryError,
    Kind,
    Subsphere,
    circular_frechet_mean,
    geodesic_dist,
    rotation_to_pole,
    unit,
    wrap,
)

log = logging.getLogger(__name__)

METHODS = ("bic", "variance", "great", "small")


class PnsError(ValueError):
    pass


class SubsphereFit(NamedTuple):
    subsphere: Subsphere
    residuals: np.ndarray
    converged: bool


@dataclass(frozen=True, eq=False)
class PnsModel:
    """Fitted nested-sphere parameters.

    ``levels[k]`` is the subsphere fitted at step ``k`` (on ``S^{d-k}``,
    zero based). When every point coincided before reaching the circle,
    the descent stops early and ``anchor`` holds that common point; the
    remaining scores are then identically zero.
    """

    dim: int
    levels: tuple
    mean_angle: float
    alpha: float = 0.5
    selection: str = "bic"
    anchor: Optional[np.ndarray] = None
    level_stats: tuple = field(default=(), compare=False)

    @property
    def scales(self) -> np.ndarray:
        """Cumulative ``prod sin(angle)`` per level, followed by the circle
        radius. Entry ``k`` multiplies the residuals of level ``k``."""
        sines = np.array([lev.angle for lev in self.levels], dtype=float)
        return np.concatenate([[1.0], np.cumprod(np.sin(sines))])

    @property
    def radius(self) -> float:
        """Radius of the final nested circle."""
        return float(self.scales[-1])

    @property
    def kinds(self) -> list:
        return [lev.kind for lev in self.levels]

    def score_column(self, level: int) -> int:
        """Column of the score array holding residuals of ``level``."""
        return self.dim - 1 - level

    def score_range(self, score_index: int):
        """Open interval of valid values for score ``score_index`` (1-based)."""
        if not 1 <= score_index <= self.dim:
            raise PnsError(f"score index {score_index} outside 1..{self.dim}")
        if score_index == 1:
            rad = self.radius
            return -np.pi * rad, np.pi * rad
        lev = self.dim - score_index
        if lev >= len(self.levels):
            return 0.0, 0.0
        c = self.scales[lev]
        r = self.levels[lev].angle
        return -r * c, (np.pi - r) * c


# ---------------------------------------------------------------------------
# single-level fit

def _initial_axes(X: np.ndarray, kind: Kind) -> list:
    w, vecs = np.linalg.eigh(X.T @ X)
    starts = [vecs[:, 0]]
    if kind is Kind.SMALL:
        mean = X.mean(axis=0)
        if np.linalg.norm(mean) > 1e-10:
            starts.append(unit(mean))
        cov = np.cov(X.T, bias=True)
        w, vecs = np.linalg.eigh(cov)
        normal = vecs[:, 0]
        if (X @ normal).mean() < 0:
            normal = -normal
        starts.append(normal)
    return starts


def _objective(X, v, great):
    rho = np.arccos(np.clip(X @ v, -1.0, 1.0))
    r = HALF_PI if great else rho.mean()
    f = rho - r
    return float(f @ f), rho, r


def _refine(X, v, great, max_iter, tol):
    obj, rho, r = _objective(X, v, great)
    converged = False
    for _ in range(max_iter):
        basis = rotation_to_pole(v)[:-1]
        sin_rho = np.maximum(np.sin(rho), 1e-12)
        jac = -(X @ basis.T) / sin_rho[:, None]
        if not great:
            # r is profiled out: r = mean(rho)
            jac = jac - jac.mean(axis=0)
        step = np.linalg.lstsq(jac, -(rho - r), rcond=None)[0]
        t = 1.0
        improved = False
        for _ in range(40):
            tangent = basis.T @ (t * step)
            ang = np.linalg.norm(tangent)
            if ang == 0.0:
                break
            v_new = np.cos(ang) * v + np.sin(ang) * tangent / ang
            v_new /= np.linalg.norm(v_new)
            obj_new, rho_new, r_new = _objective(X, v_new, great)
            if obj_new < obj:
                improved = True
                break
            t *= 0.5
        if not improved:
            converged = True
            break
        decrease = obj - obj_new
        v, obj, rho, r = v_new, obj_new, rho_new, r_new
        if decrease < tol:
            converged = True
            break
    return v, obj, converged


def fit_subsphere(points, kind=Kind.SMALL, max_iter: int = 200,
                  tol: float = 1e-12) -> SubsphereFit:
    """Least-squares subsphere fit on ``S^m``.

    Minimizes ``sum (d(x_i, v) - r)**2`` over the axis ``v`` (and ``r``
    unless ``kind`` is great, in which case ``r = pi/2``). Several
    deterministic starts are refined by damped Gauss-Newton steps on the
    axis with ``r`` profiled out; the best one is returned with the axis
    oriented so that ``r <= pi/2``.
    """
    kind = Kind(kind)
    X = np.asarray(points, dtype=float)
    n, D = X.shape
    m = D - 1
    if m < 1:
        raise PnsError("points must live on S^m with m >= 1")
    if n <= m:
        raise PnsError(f"need more than {m} points to fit a subsphere of S^{m}, got {n}")
    great = kind is Kind.GREAT

    best = None
    for v0 in _initial_axes(X, kind):
        v, obj, conv = _refine(X, unit(v0), great, max_iter, tol)
        if best is None or obj < best[1]:
            best = (v, obj, conv)
    v, obj, converged = best
    if not converged:
        log.warning("subsphere fit did not converge in %d iterations", max_iter)

    rho = geodesic_dist(X, v)
    r = HALF_PI if great else float(rho.mean())
    if r > HALF_PI:
        v, rho, r = -v, np.pi - rho, np.pi - r
    r = min(max(r, 1e-15), HALF_PI)
    return SubsphereFit(Subsphere(v, r), rho - r, converged)


def select_sphere_kind(residuals_great, residuals_small, n: int, m: int,
                       method: str = "bic") -> Kind:
    """Choose between a great and a small subsphere on ``S^m``.

    ``bic`` compares ``n log(RSS/n) + k log n`` with ``k = m`` parameters
    for a great and ``m + 1`` for a small subsphere. ``variance`` is a
    one-sided F test of the residual variance ratio (great over small,
    ``n - m`` and ``n - m - 1`` degrees of freedom) at level 0.05.
    """
    rg = np.asarray(residuals_great, dtype=float)
    rs = np.asarray(residuals_small, dtype=float)
    rss_g = float(rg @ rg)
    rss_s = float(rs @ rs)
    tiny = np.finfo(float).tiny * n
    if rss_g <= tiny:
        return Kind.GREAT
    if rss_s <= tiny:
        return Kind.SMALL
    if method == "bic":
        bic_g = n * np.log(rss_g / n) + m * np.log(n)
        bic_s = n * np.log(rss_s / n) + (m + 1) * np.log(n)
        return Kind.SMALL if bic_s < bic_g else Kind.GREAT
    if method == "variance":
        df_g, df_s = n - m, n - m - 1
        if df_s < 1:
            raise PnsError("variance test needs n > m + 1")
        ratio = (rss_g / df_g) / (rss_s / df_s)
        p = stats.f.sf(ratio, df_g, df_s)
        return Kind.SMALL if p < 0.05 else Kind.GREAT
    raise ValueError(f"unknown selection method {method!r}")


# ---------------------------------------------------------------------------
# descent / ascent through the levels

def _drop_projected(X, lev: Subsphere):
    """Project each row onto ``lev`` and return its ``S^{m-1}`` coordinates.

    Points on the axis (or its antipode) have no preferred direction and
    are sent to the first basis vector.
    """
    y = X @ rotation_to_pole(lev.axis).T
    p = y[:, :-1]
    norm = np.linalg.norm(p, axis=1)
    out = np.zeros_like(p)
    ok = norm > 1e-15
    out[ok] = p[ok] / norm[ok, None]
    out[~ok, 0] = 1.0
    return out


def _spread(X):
    return float(np.max(geodesic_dist(X, unit(X.mean(axis=0))))) \
        if np.linalg.norm(X.mean(axis=0)) > 0 else np.pi


def fit_pns(data, method: str = "bic", alpha: float = 0.5):
    """Fit backward PNS to rows of ``data`` on ``S^d``.

    Parameters
    ----------
    data : array_like (n, d+1)
        Unit vectors.
    method : {"bic", "variance", "great", "small"}
        Subsphere selection rule; ``great``/``small`` force the kind at
        every level.
    alpha : float
        Power used to map compositions to the sphere; stored on the model.

    Returns
    -------
    model : PnsModel
    scores : ndarray (n, d)
        Columns ordered ``s_1, ..., s_d``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown selection method {method!r}")
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise PnsError("data must be a 2-d array of points on S^d, d >= 1")
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1) > 1e-8):
        raise PnsError("data rows must have unit norm")
    n, D = X.shape
    d = D - 1
    if n <= d:
        raise PnsError(f"PNS needs n > d (n={n}, d={d})")

    levels, stats_ = [], []
    anchor = None
    cur = X
    while cur.shape[1] > 2:
        m = cur.shape[1] - 1
        if _spread(cur) < 1e-9:
            anchor = unit(cur.mean(axis=0))
            log.info("data collapsed to a point on S^%d; stopping descent", m)
            break
        fits = {}
        if method != "small":
            fits[Kind.GREAT] = fit_subsphere(cur, Kind.GREAT)
        if method != "great":
            fits[Kind.SMALL] = fit_subsphere(cur, Kind.SMALL)
        if method in ("great", "small"):
            kind = Kind(method)
        else:
            kind = select_sphere_kind(fits[Kind.GREAT].residuals,
                                      fits[Kind.SMALL].residuals, n, m, method)
        chosen = fits[kind].subsphere
        stats_.append({
            "sphere_dim": m,
            "kind": kind.value,
            "angle": chosen.angle,
            "rss_great": float(np.sum(fits[Kind.GREAT].residuals ** 2))
            if Kind.GREAT in fits else None,
            "rss_small": float(np.sum(fits[Kind.SMALL].residuals ** 2))
            if Kind.SMALL in fits else None,
        })
        levels.append(chosen)
        cur = _drop_projected(cur, chosen)

    if anchor is None:
        theta = np.arctan2(cur[:, 1], cur[:, 0])
        mean_angle = circular_frechet_mean(theta)
    else:
        mean_angle = 0.0
    model = PnsModel(dim=d, levels=tuple(levels), mean_angle=mean_angle,
                     alpha=alpha, selection=method, anchor=anchor,
                     level_stats=tuple(stats_))
    return model, pns_scores(model, X)


def pns_scores(model: PnsModel, points) -> np.ndarray:
    """Scores of (possibly new) points under a fitted model."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[1] != model.dim + 1:
        raise PnsError(f"points have {X.shape[1]} coordinates, model expects {model.dim + 1}")
    scores = np.zeros((X.shape[0], model.dim))
    scales = model.scales
    cur = X
    for k, lev in enumerate(model.levels):
        res = geodesic_dist(cur, lev.axis) - lev.angle
        scores[:, model.score_column(k)] = scales[k] * res
        cur = _drop_projected(cur, lev)
    if model.anchor is None:
        theta = np.arctan2(cur[:, 1], cur[:, 0])
        scores[:, 0] = model.radius * wrap(theta - model.mean_angle)
    return scores


def scores_to_sphere(scores, model: PnsModel, use_first_k: Optional[int] = None):
    """Map scores back to ``S^d`` (the inverse of :func:`pns_scores`).

    Scores past ``use_first_k`` are treated as zero. Raises
    :class:`~pnsreg.geom.GeometryError` when a level score would lift a
    point beyond the axis or its antipode.
    """
    s = np.asarray(scores, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s).copy()
    d = model.dim
    if s.shape[1] != d:
        raise PnsError(f"expected {d} scores per row, got {s.shape[1]}")
    k = d if use_first_k is None else int(use_first_k)
    if not 1 <= k <= d:
        raise PnsError(f"use_first_k must be in 1..{d}")
    s[:, k:] = 0.0
    scales = model.scales

    if model.anchor is None:
        theta = model.mean_angle + s[:, 0] / model.radius
        p = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        p = np.tile(model.anchor, (s.shape[0], 1))
    for lev_idx in range(len(model.levels) - 1, -1, -1):
        lev = model.levels[lev_idx]
        ang = lev.angle + s[:, model.score_column(lev_idx)] / scales[lev_idx]
        if np.any(ang <= 0.0) or np.any(ang >= np.pi):
            raise GeometryError(
                f"score {model.score_column(lev_idx) + 1} outside the valid range")
        rot = rotation_to_pole(lev.axis)
        p = np.column_stack([np.sin(ang)[:, None] * p, np.cos(ang)]) @ rot
    return p[0] if single else p


def pns_mean(model: PnsModel) -> np.ndarray:
    """Point with all scores zero; lies on every fitted subsphere."""
    return scores_to_sphere(np.zeros(model.dim), model)


def variance_explained(scores) -> np.ndarray:
    """Share of total score variance carried by each score.

    The circular score enters through the sample variance of its wrapped
    values.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        raise PnsError("need at least two score vectors")
    var = s.var(axis=0, ddof=1)
    total = var.sum()
    if total <= 0:
        raise PnsError("scores have zero total variance")
    return var / total


def biplot_paths(model: PnsModel, score_index: int, grid) -> np.ndarray:
    """Sphere coordinates traced as one score sweeps ``grid``.

    Returns an array of shape ``(len(grid), d+1)``; column ``j`` is the
    path of coordinate ``j``.
    """
    t = np.asarray(grid, dtype=float)
    lo, hi = model.score_range(score_index)
    bad = (t < lo) | (t >= hi) if score_index == 1 else (t <= lo) | (t >= hi)
    if np.any(bad):
        raise PnsError(
            f"grid values outside the range [{lo:.4g}, {hi:.4g}) of score {score_index}")
    s = np.zeros((t.size, model.dim))
    s[:, score_index - 1] = t
    return scores_to_sphere(s, model)


def rotate_model(model: PnsModel, Q) -> PnsModel:
    """Model whose scores map to ``Q @ x`` wherever ``model`` maps to ``x``.

    ``Q`` must be a proper rotation of the ambient space.
    """
    Q = np.asarray(Q, dtype=float)
    if np.linalg.det(Q) < 0:
        raise GeometryError("rotate_model needs a rotation with determinant +1")
    levels = []
    U = Q
    for lev in model.levels:
        axis = U @ lev.axis
        T = rotation_to_pole(axis) @ U @ rotation_to_pole(lev.axis).T
        levels.append(Subsphere(axis, lev.angle))
        U = T[:-1, :-1]
    if model.anchor is not None:
        return replace(model, levels=tuple(levels), anchor=U @ model.anchor)
    phi = np.arctan2(U[1, 0], U[0, 0])
    return replace(model, levels=tuple(levels),
                   mean_angle=float(wrap(model.mean_angle + phi)))


def make_model(axes: Sequence, angles: Sequence[float], mean_angle: float = 0.0,
               alpha: float = 0.5) -> PnsModel:
    """Build a model from explicit parameters (e.g. a simulation truth)."""
    if len(axes) != len(angles):
        raise PnsError("axes and angles differ in length")
    levels = tuple(Subsphere(np.asarray(a, dtype=float), r)
                   for a, r in zip(axes, angles))
    for k, lev in enumerate(levels[1:], start=1):
        if lev.axis.size != levels[k - 1].axis.size - 1:
            raise PnsError("axis dimensions must decrease by one per level")
    if levels and levels[-1].axis.size != 3:
        raise PnsError("last level must be fitted on S^2")
    dim = levels[0].axis.size - 1 if levels else 1
    return PnsModel(dim=dim, levels=levels, mean_angle=float(wrap(mean_angle)),
                    alpha=alpha, selection="fixed")
