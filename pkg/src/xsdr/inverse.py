"""Slicing and the inverse-regression candidate matrices (SIR, SAVE, DR).

Every candidate is computed on whitened predictors ``Z``. The moment
kernels are vectorized over a leading batch axis so that many slicing
variables (random projections, expectile levels) share one pass over ``Z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptySlice, InvalidOptions, RankDeficient, TooManySlices
from .linalg import fix_signs, sample_unit_sphere, sym_eig

METHODS = ("sir", "save", "dr")
_BATCH = 128


def check_method(method):
    m = str(method).lower()
    if m not in METHODS:
        raise InvalidOptions(f"unknown method {method!r}; expected one of {METHODS}")
    return m


def slice_sizes(n, H):
    """Equal-count slice sizes, the larger slices first."""
    if H < 1:
        raise ValueError("H must be a positive integer")
    if H > n:
        raise TooManySlices(f"cannot cut {n} observations into {H} slices")
    base, extra = divmod(n, H)
    return np.array([base + 1] * extra + [base] * (H - extra), dtype=int)


@dataclass(frozen=True)
class SliceAssignment:
    """Partition of a scalar into ``H`` groups; labels run from 0 to H-1."""

    H: int
    labels: np.ndarray
    proportions: np.ndarray
    boundaries: np.ndarray


def slice_labels(V, H):
    """Equal-count slice labels for every column of ``V``.

    Parameters
    ----------
    V : array of shape (n,) or (n, L)
    H : int

    Returns
    -------
    labels : int array of shape (L, n)
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n = V.shape[0]
    pos_labels = np.repeat(np.arange(H), slice_sizes(n, H))
    # stable sort: ties are broken by original index
    order = np.argsort(V, axis=0, kind="stable")
    labels = np.empty_like(order)
    np.put_along_axis(labels, order, pos_labels[:, None], axis=0)
    return np.ascontiguousarray(labels.T)


def slice_equal_count(v, H) -> SliceAssignment:
    v = np.asarray(v, dtype=float).ravel()
    labels = slice_labels(v, H)[0]
    sizes = slice_sizes(v.size, H)
    sv = np.sort(v, kind="stable")
    cuts = sv[np.cumsum(sizes)[:-1] - 1]
    return SliceAssignment(H, labels, sizes / v.size, cuts)


@dataclass(frozen=True)
class SliceMoments:
    """Per-slice proportions, means and ``E[ZZ' | slice] - I``.

    Arrays may carry leading batch axes: ``proportions`` is ``(..., H)``,
    ``means`` is ``(..., H, p)`` and ``second_centrals`` is ``(..., H, p, p)``.
    """

    proportions: np.ndarray
    means: np.ndarray
    second_centrals: np.ndarray | None


def batch_moments(Z, labels, H, second=True):
    """Slice moments of ``Z`` for a stack of label vectors of shape (L, n)."""
    Z = np.asarray(Z, dtype=float)
    labels = np.atleast_2d(labels)
    n, p = Z.shape
    onehot = (labels[:, None, :] == np.arange(H)[None, :, None]).astype(float)
    counts = onehot.sum(axis=2)
    if np.any(counts == 0):
        raise EmptySlice("at least one slice has no observations")
    means = (onehot @ Z) / counts[..., None]
    V = None
    if second:
        outer = (Z[:, :, None] * Z[:, None, :]).reshape(n, p * p)
        V = (onehot @ outer).reshape(labels.shape[0], H, p, p) / counts[..., None, None]
        V = V - np.eye(p)
    return SliceMoments(counts / n, means, V)


def slice_moments(Z, slices: SliceAssignment) -> SliceMoments:
    m = batch_moments(Z, slices.labels[None, :], slices.H)
    return SliceMoments(m.proportions[0], m.means[0], m.second_centrals[0])


def _sir(m):
    return np.einsum("...h,...ha,...hb->...ab", m.proportions, m.means, m.means)


def _save(m):
    A = m.second_centrals - m.means[..., :, None] * m.means[..., None, :]
    return np.einsum("...h,...hab,...hbc->...ac", m.proportions, A, A)


def _dr(m):
    V = m.second_centrals
    M = _sir(m)
    first = np.einsum("...h,...hab,...hbc->...ac", m.proportions, V, V)
    scale = np.einsum("...h,...ha,...ha->...", m.proportions, m.means, m.means)
    return 2.0 * first + 2.0 * (M @ M) + 2.0 * scale[..., None, None] * M


_KERNELS = {"sir": _sir, "save": _save, "dr": _dr}


def _symmetrize(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def batch_candidates(Z, labels, H, method):
    """Candidate matrices for each row of ``labels``; shape (L, p, p)."""
    method = check_method(method)
    m = batch_moments(Z, labels, H, second=method != "sir")
    return _symmetrize(_KERNELS[method](m))


@dataclass(frozen=True)
class CandidateMatrix:
    matrix: np.ndarray
    method: str
    H: int
    N: int = 1
    response: str = "y"


def sir_matrix(m: SliceMoments) -> CandidateMatrix:
    return CandidateMatrix(_symmetrize(_sir(m)), "sir", m.proportions.shape[-1])


def save_matrix(m: SliceMoments) -> CandidateMatrix:
    return CandidateMatrix(_symmetrize(_save(m)), "save", m.proportions.shape[-1])


def dr_matrix(m: SliceMoments) -> CandidateMatrix:
    return CandidateMatrix(_symmetrize(_dr(m)), "dr", m.proportions.shape[-1])


def averaged_candidate(Z, labels, H, method):
    """Mean of the candidate matrices over label rows, summed in index order."""
    L = labels.shape[0]
    p = Z.shape[1]
    total = np.zeros((p, p))
    for start in range(0, L, _BATCH):
        chunk = batch_candidates(Z, labels[start:start + _BATCH], H, method)
        for A in chunk:
            total += A
    return total / L


def univariate_candidate(Z, y, method, H) -> CandidateMatrix:
    """Classical slicing of a scalar response on whitened predictors ``Z``."""
    method = check_method(method)
    labels = slice_labels(np.asarray(y, dtype=float).ravel(), H)
    A = batch_candidates(Z, labels, H, method)[0]
    return CandidateMatrix(A, method, H, 1, "y")


def projection_labels(xi, H, N, rng):
    """Draw ``N`` unit directions and slice the projected expectiles."""
    xi = np.asarray(getattr(xi, "values", xi), dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    T = sample_unit_sphere(xi.shape[1], rng, size=N)
    return slice_labels(xi @ T.T, H), T


def projective_resampling(xi, Z, method, H, N, rng) -> CandidateMatrix:
    """Average the candidate matrices of ``N`` random projections of ``xi``."""
    method = check_method(method)
    if N < 1:
        raise ValueError("N must be at least 1")
    labels, _ = projection_labels(xi, H, N, rng)
    A = averaged_candidate(Z, labels, H, method)
    return CandidateMatrix(A, method, H, N, "projected expectiles")


def pooled_matrix(xi, Z, method, H):
    """Per-level candidates placed side by side, shape (p, k * p)."""
    xi = np.asarray(getattr(xi, "values", xi), dtype=float)
    labels = slice_labels(xi, H)
    return pooled_from_labels(Z, labels, H, method)


def pooled_from_labels(Z, labels, H, method):
    blocks = batch_candidates(Z, labels, H, method)
    return np.concatenate(list(blocks), axis=1)


@dataclass
class SdrEstimate:
    """Estimated central-subspace basis on the original predictor scale.

    ``vectors`` holds the eigenvectors (or left singular vectors) on the
    whitened scale; ``eigenvalues`` are sorted in descending order.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    vectors: np.ndarray
    method: str
    flavor: str = "classical"
    options: dict = field(default_factory=dict)
    candidate: np.ndarray | None = field(default=None, repr=False)
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def d(self):
        return self.basis.shape[1]


def _check_d(d, p):
    if d is None:
        raise InvalidOptions("the structural dimension d must be supplied")
    d = int(d)
    if not 1 <= d <= p:
        raise InvalidOptions(f"d must lie in 1..{p}, got {d}")
    return d


def _warn_rank(values, d):
    if np.sum(values > 1e-12) < d:
        warnings.warn(
            f"fewer than d={d} eigenvalues exceed 1e-12; trailing directions are arbitrary",
            RankDeficient,
            stacklevel=3,
        )


def estimate_directions(C, whitener, d) -> SdrEstimate:
    """Leading eigenvectors of a candidate matrix mapped back to the X scale."""
    matrix = C.matrix if isinstance(C, CandidateMatrix) else np.asarray(C, dtype=float)
    method = C.method if isinstance(C, CandidateMatrix) else "custom"
    p = matrix.shape[0]
    d = _check_d(d, p)
    W = np.eye(p) if whitener is None else np.asarray(whitener, dtype=float)
    eig = sym_eig(matrix)
    _warn_rank(eig.values, d)
    return SdrEstimate(
        basis=W @ eig.vectors[:, :d],
        eigenvalues=eig.values,
        vectors=eig.vectors,
        method=method,
        candidate=matrix,
    )


def pooled_directions(Mtilde, whitener, d, method="custom") -> SdrEstimate:
    p = Mtilde.shape[0]
    d = _check_d(d, p)
    U, s, _ = np.linalg.svd(Mtilde, full_matrices=True)
    U = fix_signs(U)
    _warn_rank(s, d)
    W = np.eye(p) if whitener is None else np.asarray(whitener, dtype=float)
    return SdrEstimate(
        basis=W @ U[:, :d],
        eigenvalues=s,
        vectors=U,
        method=method,
        flavor="pooled",
        candidate=Mtilde,
    )


def pooled_marginal(xi, Z, method, H, d, whitener=None) -> SdrEstimate:
    """Pooled marginal estimator: left singular vectors of the stacked candidates.

    The reported ``eigenvalues`` are the singular values of the ``p x kp``
    stacked matrix, which reduce to the eigenvalues of the single candidate
    when there is one level.
    """
    method = check_method(method)
    return pooled_directions(pooled_matrix(xi, Z, method, H), whitener, d, method)
