"""Permutation sequential test for the structural dimension.

For each hypothesized dimension ``m`` the whitened predictors are split
into the leading ``m`` principal predictors and the rest; permuting the
rows of the trailing block breaks any dependence it carries with ``y``
while keeping the leading block intact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .expectile import KernelConfig, expectile_matrix
from .inverse import averaged_candidate, pooled_from_labels, projection_labels, slice_labels
from .sdr import PreparedFit, resolve_options


@dataclass(frozen=True)
class SequentialTestStep:
    m: int
    statistic: float
    pvalue: float
    rejected: bool
    permuted: np.ndarray = field(default=None, repr=False)


@dataclass
class OrderEstimate:
    d_hat: int
    steps: list
    alpha: float
    B: int

    def to_dict(self):
        return {
            "d_hat": self.d_hat,
            "alpha": self.alpha,
            "B": self.B,
            "steps": [
                {"m": s.m, "statistic": s.statistic, "pvalue": s.pvalue, "rejected": s.rejected}
                for s in self.steps
            ],
        }


@dataclass(frozen=True)
class PermutationWorkspace:
    U1: np.ndarray
    U2: np.ndarray
    W1: np.ndarray
    W2: np.ndarray

    @classmethod
    def split(cls, Z, vectors, m):
        U1, U2 = vectors[:, :m], vectors[:, m:]
        return cls(U1, U2, Z @ U1, Z @ U2)

    def reassemble(self, perm):
        """Whitened-frame predictors with the trailing block's rows permuted."""
        return self.W1 @ self.U1.T + self.W2[perm] @ self.U2.T


def lambda_stat(eigenvalues, m, n):
    """``n`` times the sum of the eigenvalues after the first ``m``."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if not 0 <= m <= eigenvalues.size:
        raise ValueError(f"m must lie in 0..{eigenvalues.size}, got {m}")
    return float(n * eigenvalues[m:].sum())


class _Spectrum:
    """Recomputes the candidate spectrum of a fitted estimator on new ``Z``.

    Slice labels come from ``y`` or the fitted expectiles and stay fixed
    unless ``refit_expectiles`` is set, in which case the expectiles are
    refit on the reassembled predictors.
    """

    def __init__(self, est, refit_expectiles=False):
        opts = est.options
        self.method = opts["method"]
        self.flavor = opts["flavor"]
        self.H = opts["H"]
        self.labels = est.extras["labels"]
        self.sample = est.extras["sample"]
        self.refit = refit_expectiles and self.flavor != "classical"
        if self.refit:
            self.levels = opts["levels"]
            self.config = KernelConfig(r=opts["r"], lam=opts["lam"], jitter=opts["jitter"])
            self.N = opts["N"]
            self.seed = opts["seed"]

    def _labels_for(self, Z, y):
        if not self.refit:
            return self.labels
        X = Z @ np.linalg.pinv(self.sample.whitener) + self.sample.mean
        xi = expectile_matrix(X, y, self.levels, self.config).values
        if self.flavor == "pooled":
            return slice_labels(xi, self.H)
        return projection_labels(xi, self.H, self.N, np.random.default_rng(self.seed))[0]

    def __call__(self, Z, y=None):
        labels = self._labels_for(Z, y)
        if self.flavor == "pooled":
            return np.linalg.svd(pooled_from_labels(Z, labels, self.H, self.method),
                                 compute_uv=False)
        C = averaged_candidate(Z, labels, self.H, self.method)
        return np.sort(np.linalg.eigvalsh(C))[::-1]


def _estimate_at(prep, m):
    """Fit under the hypothesis ``d = m``.

    When ``d`` is not fixed in the options, lambda is scored with
    ``d = max(m, 1)``: the dimension under test.
    """
    opts = prep.options
    d = opts.d if opts.d is not None else max(m, 1)
    if opts.flavor == "classical":
        return prep.estimate(None, d)
    if opts.lam == "auto":
        sel = prep.select_lambda(d=d)
        return sel.estimates[sel.chosen]
    return prep.estimate(opts.lam, d)


def permutation_test(X, y, options, m, B=200, rng=None, prepared=None,
                     refit_expectiles=False):
    """Permutation p-value for ``d = m`` against ``d > m``.

    ``prepared`` may carry a ``PreparedFit`` of ``(X, y, options)`` so
    that expectile fits are shared across calls. Replicate ``b`` permutes
    with the substream ``(base, b)`` where ``base`` is drawn once from
    ``rng``.
    """
    if prepared is None:
        prepared = PreparedFit(X, y, resolve_options(options))
    est = _estimate_at(prepared, m)
    Z = est.extras["sample"].whitened
    n, p = Z.shape
    if not 0 <= m <= p - 1:
        raise ValueError(f"m must lie in 0..{p - 1}, got {m}")
    if B < 1:
        raise ValueError("B must be at least 1")
    spectrum = _Spectrum(est, refit_expectiles)
    y = np.asarray(y, dtype=float).ravel()
    observed = lambda_stat(spectrum(Z, y), m, n)
    work = PermutationWorkspace.split(Z, est.vectors, m)
    base = int(np.random.default_rng(rng).integers(2**63 - 1))
    permuted = np.empty(B)
    for b in range(B):
        perm = np.random.default_rng([base, b]).permutation(n)
        permuted[b] = lambda_stat(spectrum(work.reassemble(perm), y), m, n)
    pvalue = float(np.mean(permuted > observed))
    return SequentialTestStep(m, observed, pvalue, False, permuted)


def estimate_order(X, y, options, alpha=0.1, B=200, rng=None, refit_expectiles=False):
    """Smallest ``m`` whose null hypothesis ``d = m`` is not rejected at level ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    prepared = PreparedFit(X, y, resolve_options(options))
    p = prepared.sample.p
    rng = np.random.default_rng(rng)
    steps = []
    for m in range(p):
        step = permutation_test(X, y, options, m, B, rng, prepared=prepared,
                                refit_expectiles=refit_expectiles)
        step = replace(step, rejected=step.pvalue < alpha)
        steps.append(step)
        if not step.rejected:
            return OrderEstimate(m, steps, alpha, B)
    return OrderEstimate(p, steps, alpha, B)
