"""Simulation models, Monte-Carlo tables, parameter sweeps and LOOCV loss."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .exceptions import InvalidOptions, InvalidP, XsdrError
from .expectile import (
    KernelConfig,
    bandwidth_heuristic,
    default_levels,
    fit_ker,
    phi_tau,
)
from .linalg import subspace_distance
from .sdr import SdrOptions, fit_sdr, parse_label

log = logging.getLogger(__name__)

MODELS = ("I", "II", "III", "IV", "V")
METRICS = ("squared", "frobenius")
SWEEP_AXES = ("H", "N", "k", "r-multiplier", "lambda")
TABLE_COLUMNS = (
    "model", "method", "flavor", "n", "p", "H", "N", "k", "d",
    "mean_delta", "se_delta", "reps", "seconds",
)


@dataclass(frozen=True)
class SimModel:
    id: str
    p: int = 6
    sigma: float = 0.2

    def __post_init__(self):
        if self.id not in MODELS:
            raise InvalidOptions(f"model must be one of {MODELS}, got {self.id!r}")
        if self.p < 6:
            raise InvalidP(f"simulation models need p >= 6, got {self.p}")

    @property
    def beta1(self):
        b = np.zeros(self.p)
        b[:3] = 1.0
        return b

    @property
    def beta2(self):
        b = np.zeros(self.p)
        b[0], b[4], b[5] = 1.0, 1.0, 3.0
        return b

    @property
    def true_basis(self):
        if self.id == "V":
            return self.beta1[:, None]
        return np.column_stack([self.beta1, self.beta2])


def response(model: SimModel, X, eps):
    """Model response for predictors ``X`` and standard-normal noise ``eps``."""
    u = X @ model.beta1
    v = X @ model.beta2
    s = model.sigma
    if model.id == "I":
        return 0.4 * u**2 + 3 * np.sin(v / 4) + s * eps
    if model.id == "II":
        return 3 * np.sin(u / 4) + 3 * np.sin(v / 4) + s * eps
    if model.id == "III":
        return 0.4 * u**2 + np.sqrt(np.abs(v)) + s * eps
    if model.id == "IV":
        return 3 * np.sin(v / 4) + (1 + u**2) * s * eps
    return u * eps


def gen_model(model, n, p=None, rng=None):
    """Draw ``(X, y)`` with ``X`` standard normal and ``y`` from ``model``."""
    if isinstance(model, str):
        model = SimModel(model, p=6 if p is None else p)
    elif p is not None and p != model.p:
        model = replace(model, p=p)
    rng = np.random.default_rng(rng)
    X = rng.standard_normal((n, model.p))
    eps = rng.standard_normal(n)
    return X, response(model, X, eps)


@dataclass(frozen=True)
class SimConfig:
    """One Monte-Carlo table: a model, a design, and the estimators to compare.

    ``options`` holds estimator defaults (lambda, r multiplier, levels ...)
    applied to every method label in ``methods``.
    """

    model: str = "I"
    n: int = 100
    p: int = 6
    H: int = 5
    N: int = 1000
    k: int = 9
    d: int | None = None
    reps: int = 100
    seed: int = 0
    methods: tuple = ("sir", "save", "dr")
    sigma: float = 0.2
    lam: float | str = "auto"
    r_multiplier: float = 1.0
    metric: str = "squared"
    n_jobs: int = 1

    def __post_init__(self):
        model = SimModel(self.model, self.p, self.sigma)
        if self.d is None:
            object.__setattr__(self, "d", model.true_basis.shape[1])
        if self.metric not in METRICS:
            raise InvalidOptions(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.reps < 1:
            raise InvalidOptions("reps must be at least 1")
        if self.n < max(self.H, 2):
            raise InvalidOptions("n must be at least max(H, 2)")
        if not 1 <= self.d <= self.p:
            raise InvalidOptions(f"d must lie in 1..{self.p}")
        object.__setattr__(self, "methods", tuple(self.methods))
        for m in self.methods:
            parse_label(m)

    def options_for(self, label, seed=None):
        return SdrOptions.from_label(
            label,
            d=self.d,
            H=self.H,
            N=self.N,
            levels=tuple(default_levels(self.k)),
            lam=self.lam,
            r_multiplier=self.r_multiplier,
            seed=seed,
        )


@dataclass
class BenchRow:
    model: str
    method: str
    flavor: str
    n: int
    p: int
    H: int
    N: int
    k: int
    d: int
    mean_delta: float
    se_delta: float
    reps: int
    seconds: float | None = None
    failures: int = 0
    deltas: list = field(default_factory=list, repr=False)

    def as_record(self, timing=False):
        rec = {c: getattr(self, c) for c in TABLE_COLUMNS}
        if not timing:
            rec["seconds"] = None
        return rec


def _rep_streams(seed, rep):
    data_ss, proj_ss = np.random.SeedSequence([seed, rep]).spawn(2)
    return np.random.default_rng(data_ss), int(proj_ss.generate_state(1, np.uint64)[0] >> 1)


def _run_rep(config: SimConfig, rep):
    """Fit every method on one simulated data set; returns {label: delta or None}."""
    model = SimModel(config.model, config.p, config.sigma)
    data_rng, proj_seed = _rep_streams(config.seed, rep)
    X, y = gen_model(model, config.n, rng=data_rng)
    B = model.true_basis
    out = {}
    for label in config.methods:
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est = fit_sdr(X, y, config.options_for(label, proj_seed))
            delta = subspace_distance(B, est.basis)
            if config.metric == "squared":
                delta = delta**2
            out[label] = (delta, time.perf_counter() - t0)
        except (XsdrError, np.linalg.LinAlgError) as exc:
            log.warning("rep %d, %s failed: %s", rep, label, exc)
            out[label] = (None, time.perf_counter() - t0)
    return out


def run_simulation(config: SimConfig):
    """Monte-Carlo mean and standard error of the subspace distance per method.

    Replicate ``rep`` draws its data and projections from
    ``SeedSequence([seed, rep])``, so results do not depend on ``n_jobs``.
    """
    if config.n_jobs == 1:
        results = [_run_rep(config, rep) for rep in range(config.reps)]
    else:
        results = Parallel(n_jobs=config.n_jobs)(
            delayed(_run_rep)(config, rep) for rep in range(config.reps)
        )
    rows = []
    for label in config.methods:
        method, flavor = parse_label(label)
        deltas = [r[label][0] for r in results if r[label][0] is not None]
        seconds = float(sum(r[label][1] for r in results))
        failures = config.reps - len(deltas)
        if failures:
            log.warning("%s: %d of %d reps failed and were dropped", label, failures, config.reps)
        arr = np.asarray(deltas)
        mean = float(arr.mean()) if arr.size else float("nan")
        se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else float("nan")
        rows.append(BenchRow(
            model=config.model, method=label, flavor=flavor, n=config.n, p=config.p,
            H=config.H, N=config.N if flavor == "ea" else 1,
            k=config.k if flavor != "classical" else 0, d=config.d,
            mean_delta=mean, se_delta=se, reps=len(deltas), seconds=seconds,
            failures=failures, deltas=deltas,
        ))
    return rows


_AXIS_FIELD = {"H": "H", "N": "N", "k": "k", "r-multiplier": "r_multiplier", "lambda": "lam"}


def run_sweep(config: SimConfig, axis, values):
    """Re-run ``config`` once per value of one setting; rows carry an ``axis_value``."""
    if axis not in SWEEP_AXES:
        raise InvalidOptions(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    out = []
    for value in values:
        if axis in ("H", "N", "k"):
            value = int(value)
        elif not (axis == "lambda" and value == "auto"):
            value = float(value)
        cfg = replace(config, **{_AXIS_FIELD[axis]: value})
        for row in run_simulation(cfg):
            out.append((value, row))
    return out


def loocv_delta_tau(X, y, options, taus=(0.2, 0.5, 0.8), lam=0.01):
    """Leave-one-out average asymmetric loss of expectile fits on reduced predictors.

    For each held-out row the estimator in ``options`` is refit on the
    remaining rows, a kernel expectile regression of ``y`` on ``X @ B`` is
    fit at each ``tau`` (ridge weight ``lam``, heuristic kernel scale), and
    the loss of the held-out prediction is recorded.

    Returns
    -------
    dict mapping tau to the average loss
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 3:
        raise ValueError("leave-one-out evaluation needs at least three rows")
    losses = {float(t): np.zeros(n) for t in taus}
    for i in range(n):
        keep = np.arange(n) != i
        est = fit_sdr(X[keep], y[keep], options)
        R = X[keep] @ est.basis
        Ri = X[i:i + 1] @ est.basis
        try:
            r = bandwidth_heuristic(R)
        except XsdrError:
            r = 1.0
        config = KernelConfig(r=r, lam=lam)
        for tau in losses:
            fit = fit_ker(R, y[keep], tau, config)
            losses[tau][i] = phi_tau(y[i] - fit.predict(Ri)[0], tau)
    return {tau: float(v.mean()) for tau, v in losses.items()}


def table_to_csv(rows, timing=False):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        rec = row.as_record(timing)
        rec = {k: ("" if v is None else (f"{v:.6f}" if isinstance(v, float) else v))
               for k, v in rec.items()}
        writer.writerow(rec)
    return buf.getvalue()


def table_to_json(rows, timing=False):
    return json.dumps([row.as_record(timing) for row in rows], indent=2, sort_keys=True) + "\n"
