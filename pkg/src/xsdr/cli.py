"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 estimator error, 4 config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (
    METRICS,
    MODELS,
    SWEEP_AXES,
    SimConfig,
    loocv_delta_tau,
    run_simulation,
    run_sweep,
    table_to_csv,
    table_to_json,
)
from .exceptions import InvalidOptions, InvalidP, TauOutOfRange, XsdrError
from .expectile import KernelExpectileRegressor, check_levels, default_levels
from .order import estimate_order
from .sdr import SdrOptions, fit_sdr, parse_label

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATOR, EXIT_CONFIG = 0, 2, 3, 4

log = logging.getLogger("xsdr")


class InputError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors, not input errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class Dataset:
    predictors: np.ndarray
    response: np.ndarray
    names: list
    response_name: str
    digest: str


def _cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        value = None
    if text.strip() == "":
        raise InputError(f"missing value in row {row}, column {col!r}")
    if value is None:
        raise InputError(f"non-numeric value {text!r} in row {row}, column {col!r}")
    if not np.isfinite(value):
        raise InputError(f"non-finite value {text!r} in row {row}, column {col!r}")
    return value


def read_dataset(path, response, predictors=None) -> Dataset:
    """Read a headed numeric CSV. Rows are numbered from 1 after the header."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise InputError(f"{path} is not valid UTF-8") from None
    reader = csv.reader(text.splitlines())
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{path} is empty") from None
    if response in header:
        yi = header.index(response)
    else:
        try:
            yi = int(response)
        except ValueError:
            raise InputError(f"response column {response!r} not in header") from None
        if not 0 <= yi < len(header):
            raise InputError(f"response column index {yi} out of range")
    if predictors:
        missing = [c for c in predictors if c not in header]
        if missing:
            raise InputError(f"predictor columns not in header: {', '.join(missing)}")
        xi = [header.index(c) for c in predictors]
    else:
        xi = [j for j in range(len(header)) if j != yi]
    if not xi:
        raise InputError("no predictor columns")
    rows = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"row {row_no} has {len(row)} fields, header has {len(header)}")
        rows.append([_cell(row[j], row_no, header[j]) for j in xi + [yi]])
    if len(rows) < 2:
        raise InputError("need at least two data rows")
    data = np.array(rows)
    return Dataset(data[:, :-1], data[:, -1], [header[j] for j in xi], header[yi],
                   hashlib.sha256(raw).hexdigest())


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lam(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"lambda must be a number or 'auto', got {text!r}") from None


def _resolve_seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get("XSDR_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"XSDR_SEED must be an integer, got {env!r}") from None


def _levels(args):
    try:
        if args.levels:
            return tuple(check_levels(args.levels))
        return tuple(default_levels(args.k))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _options(args, d):
    try:
        parse_label(args.method)
    except XsdrError as exc:
        raise ConfigError(str(exc)) from None
    return SdrOptions.from_label(
        args.method, d=d, H=args.H, N=args.N, levels=_levels(args), r=args.r,
        r_multiplier=args.r_multiplier, lam=args.lam, seed=_resolve_seed(args.seed),
    )


def _fmt(v):
    return format(float(v), ".17g")


def _write_matrix(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def manifest(options: dict, ds: Dataset | None = None, command=None):
    out = {"software": "xsdr", "version": __version__, "command": command, "options": options}
    if ds is not None:
        out["input"] = {"sha256": ds.digest, "n": int(ds.predictors.shape[0]),
                        "predictors": ds.names, "response": ds.response_name}
    return out


def _resolved(est):
    opts = dict(est.options)
    opts["k"] = len(opts["levels"])
    if opts.get("lam_selection") == "auto":
        sel = est.extras["lambda_selection"]
        opts["lam_scores"] = {f"{g:g}": float(s) for g, s in zip(sel.grid, sel.scores)}
    return opts


def _add_data_args(p):
    p.add_argument("csv", help="input CSV with a header row")
    p.add_argument("--response", required=True, help="response column name or 0-based index")
    p.add_argument("--predictors", type=lambda s: s.split(","), default=None,
                   help="comma-separated predictor columns (default: all others)")


def _add_estimator_args(p, method):
    p.add_argument("--method", default=method,
                   help="estimator label: sir|save|dr, ea-<m>, mea-<m> (default %(default)s)")
    p.add_argument("--H", type=int, default=5, help="number of slices")
    p.add_argument("--N", type=int, default=1000, help="number of random projections")
    p.add_argument("--k", type=int, default=9, help="number of expectile levels l/(k+1)")
    p.add_argument("--levels", type=_floats, default=None, help="explicit expectile levels")
    p.add_argument("--lambda", dest="lam", type=_lam, default="auto", help="ridge weight or 'auto'")
    p.add_argument("--r", type=float, default=None, help="kernel scale (default: heuristic)")
    p.add_argument("--r-multiplier", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $XSDR_SEED or 0)")


def cmd_fit(args):
    ds = read_dataset(args.csv, args.response, args.predictors)
    if args.d == "auto":
        order = estimate_order(ds.predictors, ds.response, _options(args, None),
                               alpha=args.alpha, B=args.B, rng=_resolve_seed(args.seed))
        d = max(order.d_hat, 1)
    else:
        d = int(args.d)
    est = fit_sdr(ds.predictors, ds.response, _options(args, d))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = [f"b{j + 1}" for j in range(est.d)]
    _write_matrix(out / "basis.csv", ["predictor"] + cols,
                  [[name, *row] for name, row in zip(ds.names, est.basis)])
    _write_matrix(out / "eigenvalues.csv", ["index", "eigenvalue"],
                  [[i + 1, v] for i, v in enumerate(est.eigenvalues)])
    _write_matrix(out / "reduced.csv", ["row"] + cols,
                  [[i + 1, *row] for i, row in enumerate(ds.predictors @ est.basis)])
    opts = _resolved(est)
    if args.d == "auto":
        opts["d_selection"] = order.to_dict()
    _write_json(out / "manifest.json", manifest(opts, ds, "fit"))
    print(f"wrote {out}/basis.csv ({ds.predictors.shape[1]}x{est.d}), chosen lambda: {opts['lam']}")
    return EXIT_OK


def _sim_config(args):
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    try:
        return SimConfig(
            model=args.model, n=args.n, p=args.p, H=args.H, N=args.N, k=args.k, d=args.d,
            reps=args.reps, seed=_resolve_seed(args.seed), methods=methods, sigma=args.sigma,
            lam=args.lam, r_multiplier=args.r_multiplier, metric=args.metric,
            n_jobs=args.threads,
        )
    except (XsdrError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args):
    config = _sim_config(args)
    if args.sweep:
        if not args.values:
            raise ConfigError("--sweep needs --values")
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        try:
            pairs = run_sweep(config, args.sweep, values)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        text = _sweep_text(args.sweep, pairs, args.format, args.timing)
    else:
        rows = run_simulation(config)
        text = (table_to_json if args.format == "json" else table_to_csv)(rows, args.timing)
    if args.out:
        Path(args.out).write_text(text)
        opts = {k: getattr(config, k) for k in config.__dataclass_fields__}
        opts["methods"] = list(config.methods)
        opts.pop("n_jobs")
        if args.sweep:
            opts["sweep"] = {"axis": args.sweep, "values": args.values}
        _write_json(args.out + ".manifest.json", manifest(opts, command="simulate"))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sweep_text(axis, pairs, fmt, timing):
    if fmt == "json":
        recs = [{"axis": axis, "value": v, **row.as_record(timing)} for v, row in pairs]
        return json.dumps(recs, indent=2, sort_keys=True) + "\n"
    lines = table_to_csv([row for _, row in pairs], timing).splitlines()
    out = ["axis,value," + lines[0]]
    out += [f"{axis},{v},{line}" for (v, _), line in zip(pairs, lines[1:])]
    return "\n".join(out) + "\n"


def cmd_order(args):
    ds = read_dataset(args.csv, args.response, args.predictors)
    if not 0 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0, 1)")
    if args.B < 1:
        raise ConfigError("--B must be at least 1")
    opts = _options(args, None)
    result = estimate_order(ds.predictors, ds.response, opts, alpha=args.alpha, B=args.B,
                            rng=opts.seed, refit_expectiles=args.refit_expectiles)
    resolved = opts.to_dict()
    resolved["k"] = len(opts.levels)
    report = {**result.to_dict(), "manifest": manifest(resolved, ds, "order")}
    _write_json(args.out, report)
    if args.out and args.out != "-":
        print(f"d_hat = {result.d_hat}")
    return EXIT_OK


def cmd_loocv(args):
    ds = read_dataset(args.csv, args.response, args.predictors)
    opts = _options(args, args.d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        losses = loocv_delta_tau(ds.predictors, ds.response, opts, taus=args.taus,
                                 lam=args.eval_lambda)
    resolved = opts.to_dict()
    resolved["eval_lambda"] = args.eval_lambda
    report = {"delta": {f"{t:g}": v for t, v in losses.items()},
              "manifest": manifest(resolved, ds, "loocv")}
    _write_json(args.out, report)
    return EXIT_OK


def expectile_curves(ds: Dataset, direction, taus, lam=0.01):
    """Rows ``(index, b'x, y, f_tau...)`` sorted by ``b'x``."""
    proj = ds.predictors @ direction
    order = np.argsort(proj, kind="stable")
    fits = []
    for tau in taus:
        reg = KernelExpectileRegressor(tau=tau, alpha=lam).fit(proj[:, None], ds.response)
        fits.append(reg.predict(proj[:, None]))
    return [[int(i) + 1, proj[i], ds.response[i], *(f[i] for f in fits)] for i in order]


def _render_svg(path, rows, taus, xlabel):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "xsdr"
    arr = np.array([r[1:] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(arr[:, 0], arr[:, 1], s=8, color="0.5")
    for j, tau in enumerate(taus):
        ax.plot(arr[:, 0], arr[:, 2 + j], label=f"tau={tau:g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("y")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_plot_expectiles(args):
    ds = read_dataset(args.csv, args.response, args.predictors)
    try:
        taus = [float(t) for t in args.taus]
        for t in taus:
            if not 0 < t < 1:
                raise ConfigError(f"tau must lie in (0, 1), got {t}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.direction:
        b = np.asarray(args.direction, dtype=float)
        if b.size != ds.predictors.shape[1]:
            raise ConfigError(f"--direction has {b.size} entries, data has {ds.predictors.shape[1]} predictors")
        opts = {"direction": b.tolist()}
    else:
        est = fit_sdr(ds.predictors, ds.response, _options(args, 1))
        b = est.basis[:, 0]
        opts = _resolved(est)
    rows = expectile_curves(ds, b, taus, args.curve_lambda)
    header = ["index", "bx", "y"] + [f"f_{t:g}" for t in taus]
    _write_matrix(args.out, header, rows)
    opts["taus"] = taus
    opts["curve_lambda"] = args.curve_lambda
    _write_json(args.out + ".manifest.json", manifest(opts, ds, "plot-expectiles"))
    if args.svg:
        _render_svg(args.svg, rows, taus, "first direction")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="xsdr", description="Expectile-assisted sufficient dimension reduction.")
    parser.add_argument("--version", action="version", version=f"xsdr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="estimate a central-subspace basis from CSV data")
    _add_data_args(p)
    _add_estimator_args(p, "ea-sir")
    p.add_argument("--d", default=None, required=True, help="structural dimension or 'auto'")
    p.add_argument("--alpha", type=float, default=0.1, help="test level when --d auto")
    p.add_argument("--B", type=int, default=200, help="permutations when --d auto")
    p.add_argument("--out-dir", default="xsdr-fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte-Carlo table for a simulation model")
    p.add_argument("--model", default="I", choices=MODELS)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--H", type=int, default=5)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--d", type=int, default=None, help="basis dimension (default: true d)")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--methods", default="sir,save,dr")
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--lambda", dest="lam", type=_lam, default="auto")
    p.add_argument("--r-multiplier", type=float, default=1.0)
    p.add_argument("--metric", default="squared", choices=METRICS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sweep", choices=SWEEP_AXES, default=None)
    p.add_argument("--values", default=None, help="comma-separated sweep values")
    p.add_argument("--threads", type=int, default=1, help="worker processes; results do not depend on it")
    p.add_argument("--timing", action="store_true", help="fill the seconds column")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("order", help="permutation test for the structural dimension")
    _add_data_args(p)
    _add_estimator_args(p, "mea-dr")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--refit-expectiles", action="store_true",
                   help="refit expectiles on every permuted data set (slow)")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("loocv", help="leave-one-out expectile loss on reduced predictors")
    _add_data_args(p)
    _add_estimator_args(p, "ea-sir")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--taus", type=_floats, default=[0.2, 0.5, 0.8])
    p.add_argument("--eval-lambda", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_loocv)

    p = sub.add_parser("plot-expectiles", help="expectile curves along the first direction")
    _add_data_args(p)
    _add_estimator_args(p, "ea-sir")
    p.add_argument("--taus", type=_floats, default=[0.2, 0.5, 0.8])
    p.add_argument("--direction", type=_floats, default=None,
                   help="use this direction instead of fitting one")
    p.add_argument("--curve-lambda", type=float, default=0.01)
    p.add_argument("--out", default="expectiles.csv")
    p.add_argument("--svg", default=None, help="also render an SVG")
    p.set_defaults(func=cmd_plot_expectiles)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"xsdr: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, InvalidOptions, InvalidP, TauOutOfRange) as exc:
        print(f"xsdr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (XsdrError, np.linalg.LinAlgError) as exc:
        print(f"xsdr: estimator error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
