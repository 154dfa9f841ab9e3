"""Distance correlation and data-driven choice of the ridge weight."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .linalg import as_finite_2d

LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class DcorResult:
    dcov2: float
    dcor2: float
    n: int


def _double_centered(a):
    D = cdist(a, a)
    return D - D.mean(axis=0) - D.mean(axis=1)[:, None] + D.mean()


def dcor2(u, v) -> DcorResult:
    """Squared sample distance correlation (biased V-statistic form).

    Returns 0 when either sample has zero distance variance.
    """
    u = as_finite_2d(u, "u")
    v = as_finite_2d(v, "v")
    if u.shape[0] != v.shape[0]:
        raise ValueError("u and v must have the same number of rows")
    n = u.shape[0]
    if n < 2:
        raise ValueError("distance correlation needs at least two observations")
    A = _double_centered(u)
    B = _double_centered(v)
    dcov_uv = max(float(np.mean(A * B)), 0.0)
    var_u = float(np.mean(A * A))
    var_v = float(np.mean(B * B))
    if var_u <= 0 or var_v <= 0:
        return DcorResult(dcov_uv, 0.0, n)
    return DcorResult(dcov_uv, dcov_uv / np.sqrt(var_u * var_v), n)


@dataclass
class LambdaSelection:
    grid: np.ndarray
    scores: np.ndarray
    chosen: float
    estimates: dict = field(default_factory=dict, repr=False)


def choose_lambda(grid, scores):
    """Maximizer of ``scores``; ties go to the smallest lambda."""
    grid = np.asarray(grid, dtype=float)
    scores = np.asarray(scores, dtype=float)
    best = np.max(scores)
    return float(np.min(grid[scores == best]))


def select_lambda(X, y, options=None, grid=LAMBDA_GRID, **overrides) -> LambdaSelection:
    """Pick lambda maximizing dcor^2(y, X B_lambda) over ``grid``.

    ``options`` is an :class:`~xsdr.sdr.SdrOptions`; candidates whose fit
    fails score ``-inf``.
    """
    from .sdr import PreparedFit, resolve_options

    options = resolve_options(options, **overrides)
    return PreparedFit(X, y, options).select_lambda(grid)
