"""Command line interface: ``pnsreg <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from functools import partial

import numpy as np

from . import __version__
from .evaluation import (
    METHOD_LABELS,
    BenchmarkConfig,
    SimulationConfig,
    _pns_method,
    cross_validate,
    resolve_methods,
    simulate_dataset,
    write_benchmark_csv,
)
from .geom import GeometryError
from .io import DataError, ModelFile, ModelFileError, read_model, read_table, write_csv, write_model
from .plots import FigureError, render_biplot, render_ternary, ternary_from_data
from .pns import PnsError, fit_pns, variance_explained
from .regress import RegressionError, design_matrix, fit_score_regression, predict_composition
from .simplex import CompositionError, power_transform

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("pnsreg")


class UsageError(Exception):
    pass


def _cols(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else []


def _selection(args):
    return args.force_kind or args.selection


def _print_levels(model, out=None):
    out = out or sys.stdout
    for k, st in enumerate(model.level_stats):
        rg = "-" if st.get("rss_great") is None else f"{st['rss_great']:.6g}"
        rs = "-" if st.get("rss_small") is None else f"{st['rss_small']:.6g}"
        print(f"level {k + 1} on S^{st['sphere_dim']}: {st['kind']:5s} "
              f"angle={st['angle']:.6f} rss_great={rg} rss_small={rs}", file=out)
    if model.anchor is not None:
        print("descent stopped: data collapsed to a single point", file=out)


def _print_variance(scores, out=None):
    out = out or sys.stdout
    if scores.shape[0] < 2:
        return
    try:
        frac = variance_explained(scores)
    except PnsError:
        return
    print("score  variance_explained  cumulative", file=out)
    for k, (f, c) in enumerate(zip(frac, np.cumsum(frac)), start=1):
        print(f"{k:5d}  {100 * f:17.2f}%  {100 * c:9.2f}%", file=out)


def _choose_k(choice, scores, x, Y, args):
    d = scores.shape[1]
    if choice in (None, "", "all"):
        return d
    if choice.startswith("var:"):
        target = float(choice[4:])
        if not 0 < target <= 1:
            raise UsageError("--scores var:F needs 0 < F <= 1")
        cum = np.cumsum(variance_explained(scores))
        return int(min(d, np.searchsorted(cum, target - 1e-12) + 1))
    if choice == "cv":
        cfg = BenchmarkConfig(n_splits=args.cv_splits, seed=args.seed, alpha=args.alpha,
                              selection=_selection(args))
        methods = {k: partial(_pns_method, k_used=k, alpha=args.alpha,
                              selection=_selection(args)) for k in range(1, d + 1)}
        res = cross_validate(x, Y, cfg, methods)
        means = [r.mean_pmse for r in res]
        return int(np.nanargmin(means)) + 1
    try:
        k = int(choice)
    except ValueError:
        raise UsageError(f"--scores must be all, K, var:F or cv (got {choice!r})") from None
    if not 1 <= k <= d:
        raise UsageError(f"--scores {k} outside 1..{d}")
    return k


# ---------------------------------------------------------------------------
# commands

def cmd_pns(args):
    tab = read_table(args.data, _cols(args.response_cols))
    q = power_transform(tab.responses, args.alpha)
    model, scores = fit_pns(q, method=_selection(args), alpha=args.alpha)
    if tab.dropped:
        print(f"dropped {tab.dropped} row(s) with missing values")
    _print_levels(model)
    _print_variance(scores)
    if args.out:
        write_model(ModelFile(model, response_cols=tab.response_cols,
                              provenance={"selection": _selection(args), "seed": args.seed}),
                    args.out)
    if args.scores_out:
        write_csv(args.scores_out, [f"s{k + 1}" for k in range(model.dim)], scores)
    return 0


def cmd_fit(args):
    tab = read_table(args.data, _cols(args.response_cols), _cols(args.predictor_cols))
    if not tab.predictor_cols:
        raise UsageError("fit needs --predictor-cols")
    q = power_transform(tab.responses, args.alpha)
    model, scores = fit_pns(q, method=_selection(args), alpha=args.alpha)
    k = _choose_k(args.scores, scores, tab.predictors, tab.responses, args)
    reg = fit_score_regression(scores, design_matrix(tab.predictors), model, k,
                               circular=args.circular)
    if tab.dropped:
        print(f"dropped {tab.dropped} row(s) with missing values")
    _print_levels(model)
    _print_variance(scores)
    print(f"scores modelled: {k} of {model.dim}; circular link: {args.circular}")
    print("score-1 coefficients: " + " ".join(f"{b:.6g}" for b in reg.beta_circular))
    write_model(ModelFile(model, reg, tab.response_cols, tab.predictor_cols,
                          provenance={"selection": _selection(args), "seed": args.seed,
                                      "scores": args.scores}),
                args.out)
    return 0


def cmd_predict(args):
    mf = read_model(args.model)
    if mf.regression is None:
        raise DataError(f"{args.model} holds no regression (fit it with 'pnsreg fit')")
    tab = read_table(args.data, [], mf.predictor_cols)
    header = mf.response_cols or [f"x{j + 1}" for j in range(mf.pns.dim + 1)]
    if tab.predictors.shape[0] == 0:
        write_csv(args.out, header, [])
        return 0
    pred = predict_composition(mf.regression, design_matrix(tab.predictors))
    write_csv(args.out, header, pred)
    return 0


def cmd_simulate(args):
    phi = read_model(args.phi).pns if args.phi else None
    coef = tuple(float(c) for c in _cols(args.coefficients))
    cfg = SimulationConfig(n=args.n, sigma=args.sigma, seed=args.seed, phi_star=phi,
                           coefficients=coef)
    x, Y = simulate_dataset(cfg)
    header = ["x1", "x2"] + [f"p{j + 1}" for j in range(Y.shape[1])]
    write_csv(args.out, header, np.column_stack([x, Y]))
    return 0


def cmd_benchmark(args):
    if args.data:
        tab = read_table(args.data, _cols(args.response_cols), _cols(args.predictor_cols))
        x, Y = tab.predictors, tab.responses
    else:
        x, Y = simulate_dataset(SimulationConfig(n=args.n, sigma=args.sigma,
                                                 seed=args.sim_seed))
    names = None if args.methods == "all" else _cols(args.methods)
    cfg = BenchmarkConfig(train_fraction=args.train_fraction, n_splits=args.n_splits,
                          seed=args.seed, methods=names, alpha=args.alpha,
                          selection=_selection(args), jobs=args.jobs)
    resolve_methods(names)  # validate names before the long run
    results = cross_validate(x, Y, cfg)
    print(f"{'method':45s} {'mean_pmse':>10s} {'sd_pmse':>10s} failures")
    for r in results:
        print(f"{METHOD_LABELS.get(r.method, r.method):45s} {r.mean_pmse:10.4f} "
              f"{r.sd_pmse:10.4f} {r.failures}")
    if args.out:
        write_benchmark_csv(results, args.out)
    return 0


def cmd_plot_ternary(args):
    cols = _cols(args.response_cols)
    if len(cols) != 3:
        raise DataError("plot-ternary needs exactly 3 response columns")
    tab = read_table(args.data, cols)
    alphas = [float(a) for a in _cols(args.alphas)] if args.alphas else [args.alpha]
    kinds = _cols(args.kinds)
    bad = [k for k in kinds if k not in ("great", "small")]
    if bad:
        raise UsageError(f"unknown kind(s) {bad}")
    fig = ternary_from_data(tab.responses, alphas, kinds, cols, n_grid=args.grid)
    svg, header, rows = render_ternary(fig)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    if args.curves_out:
        write_csv(args.curves_out, header, rows)
    for label, mean, _ in fig.means:
        print(f"PNS mean ({label}): " + ", ".join(f"{c}={v:.3f}" for c, v in zip(cols, mean)))
    return 0


def cmd_plot_biplot(args):
    mf = read_model(args.model)
    svg, header, rows = render_biplot(mf.pns, mf.response_cols, n_grid=args.grid,
                                      extent=args.extent)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    if args.paths_out:
        write_csv(args.paths_out, header, rows)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="pnsreg", description=
                                "Compositional regression through principal nested spheres.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--alpha", type=float, default=0.5,
                        help="power of the transform to the sphere (default 0.5)")
    shared.add_argument("--selection", choices=("bic", "variance"), default="bic")
    shared.add_argument("--force-kind", choices=("great", "small"), default=None)
    shared.add_argument("--seed", type=int, default=0)

    q = sub.add_parser("fit", parents=[shared], help="two-stage PNS regression fit")
    q.add_argument("--data", required=True)
    q.add_argument("--response-cols", required=True)
    q.add_argument("--predictor-cols", required=True)
    q.add_argument("--scores", default="all", help="all, K, var:F or cv")
    q.add_argument("--circular", choices=("ls", "vonmises"), default="ls")
    q.add_argument("--cv-splits", type=int, default=20)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("pns", parents=[shared], help="fit PNS only")
    q.add_argument("--data", required=True)
    q.add_argument("--response-cols", required=True)
    q.add_argument("--out")
    q.add_argument("--scores-out")
    q.set_defaults(func=cmd_pns)

    q = sub.add_parser("predict", help="predict compositions from a fitted model")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("simulate", help="simulate a dataset from a PNS generator")
    q.add_argument("--n", type=int, default=100)
    q.add_argument("--sigma", type=float, default=0.05)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--phi", help="model file whose PNS part is the generator")
    q.add_argument("--coefficients", default="0.1,1.6,0.4")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("benchmark", parents=[shared], help="cross-validated PMSE table")
    q.add_argument("--data")
    q.add_argument("--response-cols")
    q.add_argument("--predictor-cols")
    q.add_argument("--n", type=int, default=100)
    q.add_argument("--sigma", type=float, default=0.05)
    q.add_argument("--sim-seed", type=int, default=0)
    q.add_argument("--methods", default="all")
    q.add_argument("--n-splits", type=int, default=100)
    q.add_argument("--train-fraction", type=float, default=0.8)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--out")
    q.set_defaults(func=cmd_benchmark)

    q = sub.add_parser("plot-ternary", parents=[shared], help="ternary diagram SVG")
    q.add_argument("--data", required=True)
    q.add_argument("--response-cols", required=True)
    q.add_argument("--alphas", help="comma list of powers (overrides --alpha)")
    q.add_argument("--kinds", default="great,small")
    q.add_argument("--grid", type=int, default=200)
    q.add_argument("--out", required=True)
    q.add_argument("--curves-out")
    q.set_defaults(func=cmd_plot_ternary)

    q = sub.add_parser("plot-biplot", help="PNS biplot paths SVG")
    q.add_argument("--model", required=True)
    q.add_argument("--grid", type=int, default=101)
    q.add_argument("--extent", type=float, default=0.9)
    q.add_argument("--out", required=True)
    q.add_argument("--paths-out")
    q.set_defaults(func=cmd_plot_biplot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pnsreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFileError, CompositionError, FigureError, OSError) as exc:
        print(f"pnsreg {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PnsError, RegressionError, GeometryError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"pnsreg {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"pnsreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
