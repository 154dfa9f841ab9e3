"""End-to-end estimators: classical, expectile-assisted and pooled marginal."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidOptions, NonFiniteInput, XsdrError
from .expectile import (
    DEFAULT_LEVELS,
    KernelConfig,
    bandwidth_heuristic,
    check_levels,
    expectile_matrix,
    gram_matrix,
)
from .inverse import (
    METHODS,
    averaged_candidate,
    estimate_directions,
    pooled_directions,
    pooled_from_labels,
    projection_labels,
    slice_labels,
    slice_sizes,
)
from .linalg import as_finite_2d, standardize
from .tuning import LAMBDA_GRID, LambdaSelection, choose_lambda, dcor2

FLAVORS = ("classical", "ea", "pooled")
_FLAVOR_PREFIX = {"classical": "", "ea": "ea-", "pooled": "mea-"}


def parse_label(label):
    """Split a method label such as ``"ea-dr"`` or ``"mea-sir"`` into (method, flavor)."""
    lab = str(label).strip().lower()
    for flavor in ("pooled", "ea", "classical"):
        prefix = _FLAVOR_PREFIX[flavor]
        if lab.startswith(prefix) and lab[len(prefix):] in METHODS:
            return lab[len(prefix):], flavor
    raise InvalidOptions(
        f"unknown method label {label!r}; use sir/save/dr with optional ea- or mea- prefix"
    )


@dataclass(frozen=True)
class SdrOptions:
    """Resolved settings for one estimator run.

    ``lam="auto"`` selects the ridge weight over ``lam_grid`` by distance
    correlation; ``r=None`` uses the mean-distance heuristic times
    ``r_multiplier``.
    """

    method: str = "dr"
    flavor: str = "ea"
    d: int | None = None
    H: int = 5
    N: int = 1000
    levels: tuple = DEFAULT_LEVELS
    r: float | None = None
    r_multiplier: float = 1.0
    lam: float | str = "auto"
    lam_grid: tuple = LAMBDA_GRID
    jitter: float = 1e-8
    seed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidOptions(f"method must be one of {METHODS}, got {self.method!r}")
        if self.flavor not in FLAVORS:
            raise InvalidOptions(f"flavor must be one of {FLAVORS}, got {self.flavor!r}")
        if self.d is not None and int(self.d) < 1:
            raise InvalidOptions("d must be positive")
        if int(self.H) < 1:
            raise InvalidOptions("H must be positive")
        if int(self.N) < 1:
            raise InvalidOptions("N must be positive")
        try:
            object.__setattr__(self, "levels", tuple(float(t) for t in check_levels(self.levels)))
        except ValueError as exc:
            raise InvalidOptions(str(exc)) from None
        if self.r is not None and not self.r > 0:
            raise InvalidOptions("r must be positive")
        if not self.r_multiplier > 0:
            raise InvalidOptions("r_multiplier must be positive")
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise InvalidOptions(f"lam must be a number or 'auto', got {self.lam!r}")
            if len(self.lam_grid) == 0 or any(g < 0 for g in self.lam_grid):
                raise InvalidOptions("lam_grid must be a nonempty list of nonnegative values")
        elif not self.lam >= 0:
            raise InvalidOptions("lam must be nonnegative")
        object.__setattr__(self, "lam_grid", tuple(float(g) for g in self.lam_grid))

    @property
    def label(self):
        return _FLAVOR_PREFIX[self.flavor] + self.method

    @classmethod
    def from_label(cls, label, **kwargs):
        method, flavor = parse_label(label)
        return cls(method=method, flavor=flavor, **kwargs)

    def to_dict(self):
        out = asdict(self)
        out["levels"] = list(self.levels)
        out["lam_grid"] = list(self.lam_grid)
        out["label"] = self.label
        return out


def resolve_options(options=None, **overrides):
    if options is None:
        options = SdrOptions(**overrides)
    elif overrides:
        options = replace(options, **overrides)
    return options


class PreparedFit:
    """Pieces shared by every lambda candidate for one ``(X, y, options)``.

    Standardization, the Gram matrix and the random projection directions
    are computed once, so candidate lambdas differ only in the expectile
    fits.
    """

    def __init__(self, X, y, options: SdrOptions):
        X = as_finite_2d(X)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not np.all(np.isfinite(y)):
            raise NonFiniteInput("y contains NaN or infinite entries")
        self.X = X
        self.y = y
        self.options = options
        self.sample = standardize(X)
        slice_sizes(y.size, options.H)
        self.r = None
        self.K = None
        self.directions = None
        self._xi = {}
        if options.flavor != "classical":
            r = options.r if options.r is not None else bandwidth_heuristic(X)
            self.r = float(r) * options.r_multiplier
            self.K = gram_matrix(X, self.r)
        # every lambda candidate must see the same projection directions
        if options.flavor == "ea" and options.seed is None:
            self.options = replace(options, seed=int(np.random.SeedSequence().entropy % 2**63))

    def expectiles(self, lam):
        lam = float(lam)
        if lam not in self._xi:
            config = KernelConfig(r=self.r, lam=lam, jitter=self.options.jitter)
            self._xi[lam] = expectile_matrix(
                self.X, self.y, self.options.levels, config, K=self.K
            )
        return self._xi[lam]

    def labels(self, lam=None):
        """Slice labels of shape (L, n) consumed by the candidate stage."""
        opts = self.options
        if opts.flavor == "classical":
            return slice_labels(self.y, opts.H)
        xi = self.expectiles(lam).values
        if opts.flavor == "pooled":
            return slice_labels(xi, opts.H)
        labels, T = projection_labels(xi, opts.H, opts.N, np.random.default_rng(opts.seed))
        self.directions = T
        return labels

    def estimate(self, lam=None, d=None):
        opts = self.options
        d = opts.d if d is None else d
        Z = self.sample.whitened
        labels = self.labels(lam)
        if opts.flavor == "pooled":
            est = pooled_directions(
                pooled_from_labels(Z, labels, opts.H, opts.method),
                self.sample.whitener, d, opts.method,
            )
        else:
            C = averaged_candidate(Z, labels, opts.H, opts.method)
            est = estimate_directions(C, self.sample.whitener, d)
            est.method = opts.method
        est.flavor = opts.flavor
        resolved = opts.to_dict()
        resolved["d"] = int(d)
        resolved["r"] = self.r
        resolved["lam"] = None if opts.flavor == "classical" else float(lam)
        est.options = resolved
        est.extras.update(labels=labels, sample=self.sample)
        if opts.flavor != "classical":
            est.extras["expectiles"] = self.expectiles(lam)
        if self.directions is not None:
            est.extras["projections"] = self.directions
        return est

    def score(self, est):
        return dcor2(self.y, self.X @ est.basis).dcor2

    def select_lambda(self, grid=None, d=None):
        """Evaluate each lambda in ``grid`` and keep the dcor^2 maximizer."""
        grid = np.asarray(self.options.lam_grid if grid is None else grid, dtype=float)
        if grid.size == 0:
            raise InvalidOptions("lambda grid is empty")
        d = self.options.d if d is None else d
        scores = np.full(grid.size, -np.inf)
        estimates = {}
        for i, lam in enumerate(grid):
            try:
                est = self.estimate(lam, d)
            except (XsdrError, np.linalg.LinAlgError):
                continue
            estimates[float(lam)] = est
            scores[i] = self.score(est)
        if not np.any(np.isfinite(scores)):
            raise InvalidOptions("every lambda candidate failed to fit")
        chosen = choose_lambda(grid, scores)
        return LambdaSelection(grid, scores, chosen, estimates)


def fit_sdr(X, y, options=None, **overrides):
    """Estimate a central-subspace basis.

    Parameters
    ----------
    X : array of shape (n, p)
    y : array of shape (n,)
    options : SdrOptions, optional
        Keyword overrides are applied on top (``method="sir"``, ``d=2`` ...).

    Returns
    -------
    SdrEstimate
        ``basis`` is p x d on the scale of ``X``; ``options`` records every
        resolved setting, including the chosen lambda and kernel scale.
    """
    options = resolve_options(options, **overrides)
    if options.d is None:
        raise InvalidOptions("the structural dimension d must be supplied")
    prep = PreparedFit(X, y, options)
    if options.flavor == "classical":
        return prep.estimate()
    if options.lam == "auto":
        sel = prep.select_lambda()
        est = sel.estimates[sel.chosen]
        est.extras["lambda_selection"] = sel
        est.options["lam_selection"] = "auto"
        return est
    return prep.estimate(options.lam)


class ExpectileSDR(TransformerMixin, BaseEstimator):
    """Sufficient dimension reduction by (expectile-assisted) inverse regression.

    Parameters
    ----------
    method : {"sir", "save", "dr"}, default="dr"
    flavor : {"ea", "pooled", "classical"}, default="ea"
        ``"ea"`` slices random projections of the fitted expectile vector,
        ``"pooled"`` slices each expectile level separately and pools the
        candidates, ``"classical"`` slices ``y`` directly.
    n_directions : int, default=1
    n_slices : int, default=5
    n_projections : int, default=1000
    levels : sequence of float, optional
        Expectile levels; defaults to 0.1, 0.2, ..., 0.9.
    gamma : float, optional
        RBF scale of the expectile kernel. ``None`` uses the heuristic value
        times ``gamma_multiplier``.
    gamma_multiplier : float, default=1.0
    alpha : float or "auto", default="auto"
        Ridge weight of the expectile fits; ``"auto"`` picks it from
        ``alpha_grid`` by distance correlation.
    alpha_grid : sequence of float, optional
    jitter : float, default=1e-8
    random_state : int, optional
        Seed for the projection directions.

    Attributes
    ----------
    directions_ : ndarray of shape (n_features, n_directions)
    eigenvalues_ : ndarray of shape (n_features,)
    alpha_ : float or None
        Ridge weight actually used.
    gamma_ : float or None
    estimate_ : SdrEstimate
    """

    def __init__(
        self,
        method="dr",
        flavor="ea",
        n_directions=1,
        n_slices=5,
        n_projections=1000,
        levels=None,
        gamma=None,
        gamma_multiplier=1.0,
        alpha="auto",
        alpha_grid=None,
        jitter=1e-8,
        random_state=None,
    ):
        self.method = method
        self.flavor = flavor
        self.n_directions = n_directions
        self.n_slices = n_slices
        self.n_projections = n_projections
        self.levels = levels
        self.gamma = gamma
        self.gamma_multiplier = gamma_multiplier
        self.alpha = alpha
        self.alpha_grid = alpha_grid
        self.jitter = jitter
        self.random_state = random_state

    def _options(self):
        return SdrOptions(
            method=str(self.method).lower(),
            flavor=str(self.flavor).lower(),
            d=self.n_directions,
            H=self.n_slices,
            N=self.n_projections,
            levels=DEFAULT_LEVELS if self.levels is None else tuple(self.levels),
            r=self.gamma,
            r_multiplier=self.gamma_multiplier,
            lam=self.alpha,
            lam_grid=LAMBDA_GRID if self.alpha_grid is None else tuple(self.alpha_grid),
            jitter=self.jitter,
            seed=self.random_state,
        )

    def fit(self, X, y):
        est = fit_sdr(X, y, self._options())
        self.estimate_ = est
        self.directions_ = est.basis
        self.eigenvalues_ = est.eigenvalues
        self.alpha_ = est.options["lam"]
        self.gamma_ = est.options["r"]
        self.mean_ = est.extras["sample"].mean
        self.whitener_ = est.extras["sample"].whitener
        self.n_features_in_ = est.basis.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "directions_")
        X = as_finite_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.directions_
