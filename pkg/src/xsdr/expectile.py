"""Asymmetric least squares and kernel expectile regression.

The RKHS expectile estimator minimizes::

    sum_i phi_tau(y_i - a0 - sum_j a_j K(x_i, x_j)) + lam * a' K a

with a Gaussian RBF kernel ``K(x, x') = exp(-r ||x - x'||^2)``. The loss is
convex and piecewise quadratic, so we solve it by iteratively reweighted
least squares: fix the residual signs, solve the weighted ridge problem
exactly, repeat until the sign pattern stops changing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DegenerateSample,
    EmptyInput,
    NoConvergence,
    NonFiniteInput,
    SolveFailure,
    TauOutOfRange,
)
from .linalg import as_finite_2d

DEFAULT_LEVELS = tuple(np.round(np.arange(1, 10) / 10, 10))


def check_tau(tau):
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise TauOutOfRange(f"tau must lie in (0, 1), got {tau}")
    return tau


def phi_tau(c, tau):
    """Asymmetric squared loss: ``(1 - tau) c^2`` for ``c <= 0``, ``tau c^2`` otherwise."""
    tau = check_tau(tau)
    c = np.asarray(c, dtype=float)
    out = np.where(c > 0, tau, 1.0 - tau) * c * c
    return out if out.ndim else float(out)


def _as_finite_1d(v, name="y"):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    return v


def sample_expectile(values, tau):
    """Empirical tau-expectile, the minimizer of ``sum phi_tau(v - a)``.

    The first-order condition is piecewise linear in ``a``, so the root is
    found exactly by scanning the intervals between order statistics.
    """
    tau = check_tau(tau)
    v = np.sort(_as_finite_1d(values, "values"))
    n = v.size
    if v[0] == v[-1]:
        return float(v[0])
    csum = np.concatenate(([0.0], np.cumsum(v)))
    k = np.arange(n + 1)
    # k = number of values lying at or below the root
    num = (1.0 - tau) * csum + tau * (csum[-1] - csum)
    den = (1.0 - tau) * k + tau * (n - k)
    cand = num / den
    lo = np.concatenate(([-np.inf], v))
    hi = np.concatenate((v, [np.inf]))
    ok = (lo <= cand) & (cand <= hi)
    if np.any(ok):
        return float(cand[np.argmax(ok)])
    # rounding can push the root just outside its interval
    viol = np.maximum(lo - cand, 0) + np.maximum(cand - hi, 0)
    return float(np.clip(cand[np.argmin(viol)], v[0], v[-1]))


def rbf_kernel(A, B, r):
    """Cross Gram matrix ``exp(-r ||a_i - b_j||^2)``."""
    d2 = cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean")
    return np.exp(-r * d2)


def gram_matrix(X, r):
    X = as_finite_2d(X)
    if not r > 0:
        raise ValueError(f"kernel scale r must be positive, got {r}")
    K = rbf_kernel(X, X, r)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def bandwidth_heuristic(X):
    """Return ``r = 1 / gamma^2`` where gamma is the mean pairwise distance."""
    X = as_finite_2d(X)
    if X.shape[0] < 2:
        raise DegenerateSample("need at least two rows")
    gamma = pdist(X).mean()
    if gamma == 0:
        raise DegenerateSample("all rows are identical")
    return float(1.0 / gamma**2)


@dataclass(frozen=True)
class KernelConfig:
    r: float
    lam: float = 0.01
    jitter: float = 1e-8

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")


@dataclass
class ExpectileFit:
    intercept: float
    coefficients: np.ndarray
    train_points: np.ndarray
    tau: float
    config: KernelConfig
    final_objective: float
    iterations: int
    converged: bool = True
    fitted: np.ndarray = field(default=None, repr=False)
    objective_path: list = field(default_factory=list, repr=False)

    def predict(self, X):
        X = as_finite_2d(X)
        K = rbf_kernel(X, self.train_points, self.config.r)
        return self.intercept + K @ self.coefficients


def _objective(resid, alpha, Kj, tau, lam):
    loss = np.sum(np.where(resid > 0, tau, 1.0 - tau) * resid * resid)
    return float(loss + lam * alpha @ (Kj @ alpha))


def _weighted_solve(Kj, y, w, lam):
    """Solve the bordered system for fixed weights.

    Stationarity of ``sum w_i r_i^2 + lam a'Ka`` with an unpenalized
    intercept reduces to ``(K + lam W^-1) a + 1 a0 = y`` and ``1'a = 0``.
    """
    n = y.size
    A = Kj + np.diag(lam / w)
    ones = np.ones(n)
    try:
        cf = sla.cho_factor(A, lower=True, check_finite=False)
        u = sla.cho_solve(cf, y, check_finite=False)
        v = sla.cho_solve(cf, ones, check_finite=False)
        a0 = u.sum() / v.sum()
        alpha = u - a0 * v
    except (np.linalg.LinAlgError, sla.LinAlgError):
        border = np.zeros((n + 1, n + 1))
        border[:n, :n] = A
        border[:n, n] = 1.0
        border[n, :n] = 1.0
        rhs = np.concatenate((y, [0.0]))
        try:
            sol = np.linalg.solve(border, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(f"weighted kernel system is singular: {exc}") from None
        alpha, a0 = sol[:n], sol[n]
    if not (np.all(np.isfinite(alpha)) and np.isfinite(a0)):
        raise SolveFailure("weighted kernel system produced non-finite coefficients")
    return float(a0), alpha


def fit_ker(X, y, tau, config, K=None, max_iter=200, tol=1e-10):
    """Fit kernel expectile regression at level ``tau`` by IRLS.

    Parameters
    ----------
    X : array of shape (n, p)
    y : array of shape (n,)
    tau : float in (0, 1)
    config : KernelConfig
    K : array of shape (n, n), optional
        Precomputed Gram matrix for ``X`` at ``config.r``.

    Returns
    -------
    ExpectileFit
    """
    tau = check_tau(tau)
    X = as_finite_2d(X)
    y = _as_finite_1d(y)
    n = y.size
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows but y has {n} entries")
    if n < 2:
        raise ValueError("fit_ker needs at least two observations")
    if K is None:
        K = gram_matrix(X, config.r)
    Kj = K + config.jitter * np.eye(n) if config.jitter else K
    lam = config.lam

    a0 = sample_expectile(y, tau)
    alpha = np.zeros(n)
    resid = y - a0
    obj = _objective(resid, alpha, Kj, tau, lam)
    path = [obj]
    converged = False
    it = 0
    rel = np.inf
    while it < max_iter:
        it += 1
        if obj == 0.0:
            converged = True
            break
        pos = resid > 0
        w = np.where(pos, tau, 1.0 - tau)
        new_a0, new_alpha = _weighted_solve(Kj, y, w, lam)
        new_resid = y - new_a0 - Kj @ new_alpha
        new_obj = _objective(new_resid, new_alpha, Kj, tau, lam)
        step = 1.0
        d_a0, d_alpha = new_a0 - a0, new_alpha - alpha
        # Newton steps on a piecewise quadratic can overshoot; backtrack.
        while new_obj > obj and step > 1e-9:
            step *= 0.5
            new_a0 = a0 + step * d_a0
            new_alpha = alpha + step * d_alpha
            new_resid = y - new_a0 - Kj @ new_alpha
            new_obj = _objective(new_resid, new_alpha, Kj, tau, lam)
        if new_obj > obj:
            converged = True
            break
        rel = (obj - new_obj) / max(obj, np.finfo(float).tiny)
        a0, alpha, resid, obj = new_a0, new_alpha, new_resid, new_obj
        path.append(obj)
        if step == 1.0 and np.array_equal(resid > 0, pos):
            converged = True
            break
        if rel < tol:
            converged = True
            break
    if not converged and rel >= 1e-8:
        warnings.warn(
            f"kernel expectile IRLS did not converge in {max_iter} iterations "
            f"(tau={tau}, last relative change {rel:.2e})",
            NoConvergence,
            stacklevel=2,
        )
    else:
        converged = True
    return ExpectileFit(
        intercept=a0,
        coefficients=alpha,
        train_points=X,
        tau=tau,
        config=config,
        final_objective=obj,
        iterations=it,
        converged=converged,
        fitted=y - resid,
        objective_path=path,
    )


@dataclass(frozen=True)
class ExpectileMatrix:
    """Fitted expectiles at the training rows, one column per level."""

    values: np.ndarray
    levels: np.ndarray
    fits: tuple = field(default=(), repr=False)

    @property
    def k(self):
        return self.values.shape[1]

    def crossings(self, tol=1e-10):
        """Number of (row, adjacent level pair) where the fitted curves cross."""
        return int(np.sum(np.diff(self.values, axis=1) < -tol))


def check_levels(levels):
    levels = np.asarray(levels, dtype=float).ravel()
    if levels.size == 0:
        raise ValueError("at least one expectile level is required")
    if np.any(levels <= 0) or np.any(levels >= 1):
        raise TauOutOfRange("expectile levels must lie in (0, 1)")
    if np.any(np.diff(levels) <= 0):
        raise ValueError("expectile levels must be strictly increasing")
    return levels


def default_levels(k=9):
    """Evenly spaced levels ``l / (k + 1)``, l = 1..k."""
    return np.arange(1, k + 1) / (k + 1)


def expectile_matrix(X, y, levels, config, K=None):
    levels = check_levels(levels)
    X = as_finite_2d(X)
    if K is None:
        K = gram_matrix(X, config.r)
    fits = tuple(fit_ker(X, y, tau, config, K=K) for tau in levels)
    values = np.column_stack([f.fitted for f in fits])
    return ExpectileMatrix(values, levels, fits)


class KernelExpectileRegressor(RegressorMixin, BaseEstimator):
    """Kernel expectile regression with a Gaussian RBF kernel.

    Parameters
    ----------
    tau : float, default=0.5
        Expectile level in (0, 1).
    alpha : float, default=0.01
        Ridge weight on ``a' K a``.
    gamma : float or None, default=None
        RBF scale ``r`` in ``exp(-r ||x - x'||^2)``. ``None`` uses the
        reciprocal squared mean pairwise distance of the training inputs.
    jitter : float, default=1e-8
        Added to the Gram diagonal.
    max_iter : int, default=200
    """

    def __init__(self, tau=0.5, alpha=0.01, gamma=None, jitter=1e-8, max_iter=200):
        self.tau = tau
        self.alpha = alpha
        self.gamma = gamma
        self.jitter = jitter
        self.max_iter = max_iter

    def fit(self, X, y):
        X = as_finite_2d(X)
        y = _as_finite_1d(y)
        gamma = bandwidth_heuristic(X) if self.gamma is None else float(self.gamma)
        config = KernelConfig(r=gamma, lam=float(self.alpha), jitter=float(self.jitter))
        fit = fit_ker(X, y, self.tau, config, max_iter=self.max_iter)
        self.fit_ = fit
        self.gamma_ = gamma
        self.intercept_ = fit.intercept
        self.dual_coef_ = fit.coefficients
        self.X_fit_ = X
        self.n_iter_ = fit.iterations
        self.objective_ = fit.final_objective
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(X)
