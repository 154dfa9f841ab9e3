"""Symmetric linear algebra, whitening, sphere sampling and subspace distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    AllEigenvaluesBelowFloor,
    EmptyInput,
    NonFiniteInput,
    NotSymmetric,
    RankDeficientBasis,
    SingularCovariance,
)

RELATIVE_FLOOR = 1e-10
ABSOLUTE_FLOOR = 1e-12


def as_finite_2d(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    return X


@dataclass(frozen=True)
class SymmetricEigen:
    """Eigenpairs of a symmetric matrix, values sorted in descending order."""

    values: np.ndarray
    vectors: np.ndarray


def fix_signs(vectors):
    """Flip columns so that the largest-magnitude entry of each is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(S) -> SymmetricEigen:
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    values, vectors = np.linalg.eigh(S)
    order = np.argsort(values, kind="stable")[::-1]
    return SymmetricEigen(values[order], fix_signs(vectors[:, order]))


def inv_sqrt_psd(S, floor=RELATIVE_FLOOR):
    """Inverse symmetric square root of a PSD matrix.

    Eigenvalues below ``floor * max_eigenvalue`` are raised to that value
    before inversion.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    scale = max(np.max(np.abs(S)), 1.0)
    if np.max(np.abs(S - S.T)) > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric to within 1e-10")
    eig = sym_eig(S)
    top = eig.values[0]
    if top < ABSOLUTE_FLOOR:
        raise AllEigenvaluesBelowFloor(
            f"largest eigenvalue {top:.3g} is below {ABSOLUTE_FLOOR:g}"
        )
    vals = np.maximum(eig.values, floor * top)
    V = eig.vectors
    R = (V / np.sqrt(vals)) @ V.T
    return 0.5 * (R + R.T)


@dataclass(frozen=True)
class StandardizedSample:
    raw: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    whitener: np.ndarray
    whitened: np.ndarray

    @property
    def n(self):
        return self.raw.shape[0]

    @property
    def p(self):
        return self.raw.shape[1]


def standardize(X) -> StandardizedSample:
    """Center ``X`` and whiten it with the inverse square root of its covariance.

    The covariance uses the ``1/n`` normalization.
    """
    X = as_finite_2d(X)
    n = X.shape[0]
    if n < 2:
        raise ValueError("standardize needs at least two rows")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / n
    cov = 0.5 * (cov + cov.T)
    try:
        W = inv_sqrt_psd(cov)
    except AllEigenvaluesBelowFloor as exc:
        raise SingularCovariance(str(exc)) from None
    Z = Xc @ W
    # re-center to wipe rounding drift
    Z = Z - Z.mean(axis=0)
    return StandardizedSample(X, mu, cov, W, Z)


def sample_unit_sphere(k, rng, size=None):
    """Draw uniform unit vectors in R^k by normalizing Gaussian draws.

    Returns a ``k``-vector, or an array of shape ``(size, k)`` when ``size``
    is given.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    rng = np.random.default_rng(rng)
    m = 1 if size is None else int(size)
    T = rng.standard_normal((m, k))
    norms = np.linalg.norm(T, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        T[bad] = rng.standard_normal((int(bad.sum()), k))
        norms = np.linalg.norm(T, axis=1)
    T = T / norms[:, None]
    return T[0] if size is None else T


def _orthonormal_basis(B):
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    norms = np.linalg.norm(B, axis=0)
    if np.any(norms == 0):
        raise RankDeficientBasis("basis has a zero column")
    s = np.linalg.svd(B / norms, compute_uv=False)
    if s[-1] <= 1e-10:
        raise RankDeficientBasis(
            f"basis is rank deficient (smallest singular value {s[-1]:.3g})"
        )
    Q, _ = np.linalg.qr(B)
    return Q


def projection(B):
    """Orthogonal projection onto the column space of ``B``."""
    Q = _orthonormal_basis(B)
    return Q @ Q.T


def subspace_distance(B, Bhat):
    """Frobenius distance between the projections onto span(B) and span(Bhat)."""
    B = np.asarray(B, dtype=float)
    Bhat = np.asarray(Bhat, dtype=float)
    if B.shape[0] != Bhat.shape[0]:
        raise ValueError(
            f"bases have different ambient dimensions: {B.shape[0]} vs {Bhat.shape[0]}"
        )
    return float(np.linalg.norm(projection(B) - projection(Bhat), "fro"))
