"""Simulation study and cross-validated prediction error.

The simulated scores are

    s_1 = a0 + a1 * x1 + a2 * x2 + e_1,   s_k = e_k  (k >= 2)

with ``x1 = (i - 51) / 100`` and ``x2 = sin(2 pi x1)``, mapped through a
generating PNS model and squared into compositions.
"""
from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .baselines import fit_linear_simplex, fit_pca_score1, fit_quadratic_simplex
from .geom import wrap
from .pns import PnsModel, make_model, pns_mean, rotate_model, scores_to_sphere
from .regress import design_matrix, fit_compositional_regression, predict_composition

log = logging.getLogger(__name__)

DEFAULT_COEFFICIENTS = (0.1, 1.6, 0.4)
DEFAULT_LEVEL_ANGLES = (0.7, 0.9, 1.1)


def default_generator() -> PnsModel:
    """Synthetic generating model on ``S^4`` (five-part compositions).

    Three small-sphere levels with angles 0.7, 0.9 and 1.1 radians. The
    final circle is centred on the orthant's central direction and lies
    in the plane of the first two Fourier vectors, so that sweeping score
    1 passes every part in turn while staying inside the orthant.
    """
    dim = 4
    axes = []
    for m in range(dim, 1, -1):
        pole = np.zeros(m + 1)
        pole[-1] = 1.0
        axes.append(pole)
    base = make_model(axes, DEFAULT_LEVEL_ANGLES, mean_angle=0.0)

    D = dim + 1
    centre = pns_mean(base).copy()
    centre[:2] = 0.0
    centre /= np.linalg.norm(centre)
    src = np.column_stack([np.eye(D)[:, 0], np.eye(D)[:, 1], centre])
    src = np.column_stack([src, null_space(src.T)])

    j = np.arange(D)
    a = np.sqrt(2.0 / D) * np.cos(2 * np.pi * j / D)
    b = np.sqrt(2.0 / D) * np.sin(2 * np.pi * j / D)
    u = np.full(D, 1.0 / np.sqrt(D))
    dst = np.column_stack([a, b, u])
    dst = np.column_stack([dst, null_space(dst.T)])
    Q = dst @ src.T
    if np.linalg.det(Q) < 0:
        dst[:, -1] = -dst[:, -1]
        Q = dst @ src.T
    return rotate_model(base, Q)


@dataclass
class SimulationConfig:
    n: int = 100
    sigma: float = 0.05
    seed: int = 0
    phi_star: Optional[PnsModel] = None
    coefficients: Sequence[float] = DEFAULT_COEFFICIENTS

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("simulation needs n >= 10")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if len(self.coefficients) != 3:
            raise ValueError("coefficients must be (a0, a1, a2)")


def simulation_predictors(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    x1 = (i - 51) / 100.0
    return np.column_stack([x1, np.sin(2 * np.pi * x1)])


def simulate_scores(cfg: SimulationConfig, phi: PnsModel):
    x = simulation_predictors(cfg.n)
    rng = np.random.default_rng(cfg.seed)
    eps = rng.normal(0.0, cfg.sigma, size=(cfg.n, phi.dim))
    a0, a1, a2 = cfg.coefficients
    s = eps.copy()
    s[:, 0] += a0 + a1 * x[:, 0] + a2 * x[:, 1]
    rad = phi.radius
    s[:, 0] = rad * wrap(s[:, 0] / rad)
    clamped = False
    for j in range(1, phi.dim):
        lo, hi = phi.score_range(j + 1)
        margin = 1e-6 * (hi - lo)
        col = np.clip(s[:, j], lo + margin, hi - margin)
        clamped |= bool(np.any(col != s[:, j]))
        s[:, j] = col
    if clamped:
        warnings.warn("simulated scores clamped to the cylinder range",
                      RuntimeWarning, stacklevel=2)
    return x, s


def simulate_dataset(cfg: SimulationConfig):
    """Predictors ``(n, 2)`` and compositions ``(n, d+1)``."""
    phi = cfg.phi_star if cfg.phi_star is not None else default_generator()
    x, s = simulate_scores(cfg, phi)
    q = scores_to_sphere(s, phi)
    Y = q ** 2
    return x, Y / Y.sum(axis=1, keepdims=True)


def pmse(predicted, observed) -> float:
    """100 times the mean over rows of the summed squared part errors."""
    P = np.atleast_2d(np.asarray(predicted, dtype=float))
    O = np.atleast_2d(np.asarray(observed, dtype=float))
    if P.shape != O.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {O.shape}")
    return float(100.0 * np.mean(np.sum((P - O) ** 2, axis=1)))


# ---------------------------------------------------------------------------
# methods: fn(x_train, Y_train, x_test) -> predicted compositions

def _pns_method(x_tr, Y_tr, x_te, k_used=None, circular="ls", alpha=0.5,
                selection="bic"):
    model = fit_compositional_regression(Y_tr, x_tr, alpha=alpha, selection=selection,
                                         k_used=k_used, circular=circular)
    return predict_composition(model, design_matrix(x_te))


def _linear_method(x_tr, Y_tr, x_te):
    return fit_linear_simplex(Y_tr, design_matrix(x_tr)).predict(design_matrix(x_te))


def _quadratic_method(x_tr, Y_tr, x_te):
    return fit_quadratic_simplex(Y_tr, design_matrix(x_tr)).predict(design_matrix(x_te))


def _pca_method(x_tr, Y_tr, x_te, transform=None):
    model = fit_pca_score1(Y_tr, design_matrix(x_tr), transform=transform)
    return model.predict(design_matrix(x_te))


METHODS: Dict[str, Callable] = {
    "pns_score1": partial(_pns_method, k_used=1, circular="ls"),
    "pns_all": partial(_pns_method, k_used=None, circular="ls"),
    "pns_vonmises": partial(_pns_method, k_used=1, circular="vonmises"),
    "linear": _linear_method,
    "quadratic": _quadratic_method,
    "pca": _pca_method,
    "pca_arcsine": partial(_pca_method, transform="arcsine"),
}

METHOD_LABELS = {
    "pns_score1": "PNS score 1 circular-linear regression",
    "pns_all": "PNS all scores circular-linear regression",
    "pns_vonmises": "PNS von Mises circular-linear regression",
    "linear": "Linear regression on simplex",
    "quadratic": "Quadratic regression on simplex",
    "pca": "PCA score 1 linear regression",
    "pca_arcsine": "PCA score 1 after arcsine linear regression",
}


def resolve_methods(names, alpha=0.5, selection="bic") -> Dict[str, Callable]:
    if names is None or names == "all" or names == ["all"]:
        names = list(METHODS)
    out = {}
    for name in names:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
        fn = METHODS[name]
        if name.startswith("pns"):
            fn = partial(fn, alpha=alpha, selection=selection)
        out[name] = fn
    return out


@dataclass
class BenchmarkConfig:
    train_fraction: float = 0.8
    n_splits: int = 100
    seed: int = 0
    methods: Optional[Sequence[str]] = None
    alpha: float = 0.5
    selection: str = "bic"
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")


@dataclass
class MethodResult:
    method: str
    pmse: np.ndarray = field(repr=False)    # one entry per split, nan on failure
    errors: list = field(default_factory=list, repr=False)

    @property
    def failures(self) -> int:
        return int(np.sum(np.isnan(self.pmse)))

    @property
    def n_splits(self) -> int:
        return self.pmse.size

    @property
    def mean_pmse(self) -> float:
        ok = self.pmse[~np.isnan(self.pmse)]
        return float(ok.mean()) if ok.size else float("nan")

    @property
    def sd_pmse(self) -> float:
        ok = self.pmse[~np.isnan(self.pmse)]
        return float(ok.std(ddof=1)) if ok.size > 1 else float("nan")


def split_indices(n: int, cfg: BenchmarkConfig):
    """Deterministic list of (train, test) index arrays."""
    rng = np.random.default_rng(cfg.seed)
    n_train = int(round(cfg.train_fraction * n))
    if not 0 < n_train < n:
        raise ValueError("train fraction leaves an empty train or test set")
    splits = []
    for _ in range(cfg.n_splits):
        perm = rng.permutation(n)
        splits.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return splits


def _run_split(methods, x, Y, split):
    train, test = split
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name, fn in methods.items():
            try:
                pred = fn(x[train], Y[train], x[test])
                out[name] = (pmse(pred, Y[test]), None)
            except Exception as exc:  # recorded per split, never fatal
                out[name] = (float("nan"), f"{type(exc).__name__}: {exc}")
    return out


def cross_validate(x, Y, cfg: BenchmarkConfig,
                   methods: Optional[Dict[str, Callable]] = None):
    """Random train/test splits; every method is refitted on each split.

    PNS-based methods refit the nested spheres on the training responses
    only. ``methods`` maps names to ``fn(x_train, Y_train, x_test)``;
    by default the configured subset of :data:`METHODS` is used.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if n < 20:
        raise ValueError("cross-validation needs n >= 20")
    if x.shape[0] != n:
        raise ValueError("predictor and response row counts differ")
    if methods is None:
        methods = resolve_methods(cfg.methods, cfg.alpha, cfg.selection)
    splits = split_indices(n, cfg)
    run = partial(_run_split, methods, x, Y)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_split = list(pool.map(run, splits))
    else:
        per_split = [run(sp) for sp in splits]

    results = []
    for name in methods:
        vals = np.array([ps[name][0] for ps in per_split])
        errs = [(i, ps[name][1]) for i, ps in enumerate(per_split) if ps[name][1]]
        for i, msg in errs[:3]:
            log.warning("method %s failed on split %d: %s", name, i, msg)
        results.append(MethodResult(name, vals, errs))
    return results


def write_benchmark_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "mean_pmse", "sd_pmse", "n_splits", "failures"])
        for r in results:
            w.writerow([r.method, repr(r.mean_pmse), repr(r.sd_pmse), r.n_splits, r.failures])
