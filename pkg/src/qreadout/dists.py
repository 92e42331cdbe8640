"""Transmittance distributions of the two encoding levels.

Each level of a memory cell is a Gaussian random transmittance. Everything
downstream works on a finite discretization of it: a handful of
transmittance values with normalized weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

DEFAULT_K = 101
DEFAULT_N_SIGMA = 5.0

_WEIGHT_SUM_TOL = 1e-12
_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class TransmittanceSpec:
    """Gaussian description of one encoding level."""

    mean: float
    sigma: float = 0.0

    def __post_init__(self):
        mean, sigma = float(self.mean), float(self.sigma)
        if not np.isfinite(mean) or not 0.0 <= mean <= 1.0:
            raise ConfigError(f"transmittance mean must lie in [0, 1], got {self.mean!r}")
        if not np.isfinite(sigma) or sigma < 0.0:
            raise ConfigError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    @property
    def is_delta(self) -> bool:
        return self.sigma == 0.0


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite weighted support ``{(tau_j, w_j)}`` on [0, 1].

    Points are strictly increasing and weights are positive and sum to one.
    Arrays are stored read-only.
    """

    taus: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if taus.ndim != 1 or taus.shape != weights.shape or taus.size == 0:
            raise ConfigError("taus and weights must be nonempty 1-D arrays of equal length")
        if not (np.all(np.isfinite(taus)) and np.all(np.isfinite(weights))):
            raise ConfigError("taus and weights must be finite")
        if taus.min() < 0.0 or taus.max() > 1.0:
            raise ConfigError("transmittance support must lie in [0, 1]")
        if np.any(np.diff(taus) <= 0.0):
            raise ConfigError("support points must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ConfigError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ConfigError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "taus", _readonly(taus))
        object.__setattr__(self, "weights", _readonly(weights))

    @classmethod
    def delta(cls, tau: float) -> "DiscreteDistribution":
        return cls(np.array([tau]), np.array([1.0]))

    @property
    def points(self):
        return list(zip(self.taus.tolist(), self.weights.tolist()))

    @property
    def is_delta(self) -> bool:
        return self.taus.size == 1

    def mean(self) -> float:
        return expect(self, lambda t: t)

    def __len__(self):
        return self.taus.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.taus, other.taus) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash((self.taus.tobytes(), self.weights.tobytes()))


def discretize(
    spec: TransmittanceSpec, k: int = DEFAULT_K, n_sigma: float = DEFAULT_N_SIGMA
) -> DiscreteDistribution:
    """Sample a Gaussian level on ``k`` uniformly spaced points.

    The window is ``mean +/- n_sigma * sigma`` clipped to [0, 1]. Weights
    are the Gaussian density at the grid points, renormalized, so clipping
    yields a truncated Gaussian rather than point masses at the boundary.
    A level with ``sigma == 0`` becomes a single point.

    Doubling the resolution as ``k -> 2k - 1`` keeps the old grid as a
    subset of the new one.
    """
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if not np.isfinite(n_sigma) or n_sigma <= 0:
        raise ConfigError(f"n_sigma must be positive, got {n_sigma!r}")
    k = int(k)
    if spec.is_delta:
        return DiscreteDistribution.delta(spec.mean)
    lo = max(0.0, spec.mean - n_sigma * spec.sigma)
    hi = min(1.0, spec.mean + n_sigma * spec.sigma)
    if not hi > lo:
        raise ConfigError(f"empty discretization window [{lo}, {hi}]")
    if k == 1:
        return DiscreteDistribution.delta(spec.mean)
    taus = np.linspace(lo, hi, k)
    taus = taus[(taus >= 0.0) & (taus <= 1.0)]
    dens = np.exp(-0.5 * ((taus - spec.mean) / spec.sigma) ** 2)
    keep = dens > 0.0
    taus, dens = taus[keep], dens[keep]
    if taus.size == 0:
        raise ConfigError("discretization window carries no Gaussian mass")
    return DiscreteDistribution(taus, dens / dens.sum())


def expect(dist: DiscreteDistribution, f: Callable) -> float:
    """Weighted sum ``sum_j w_j f(tau_j)``; ``f`` is called on the whole array."""
    values = np.broadcast_to(np.asarray(f(dist.taus), dtype=float), dist.taus.shape)
    return float(np.dot(dist.weights, values))


def merge_supports(parts, tol: float = _MERGE_TOL):
    """Union of weighted supports with coincident points merged.

    ``parts`` is an iterable of ``(taus, weights)`` pairs. Points closer
    than ``tol`` are combined by adding weights. Returns sorted
    ``(taus, weights)`` arrays.
    """
    taus = np.concatenate([np.asarray(t, dtype=float) for t, _ in parts])
    weights = np.concatenate([np.asarray(w, dtype=float) for _, w in parts])
    order = np.argsort(taus, kind="stable")
    taus, weights = taus[order], weights[order]
    new_group = np.concatenate([[True], np.diff(taus) > tol])
    idx = np.cumsum(new_group) - 1
    merged_w = np.bincount(idx, weights=weights)
    return taus[new_group], merged_w


@dataclass(frozen=True)
class CellModel:
    """The two level distributions of a memory cell plus their priors.

    When built with :meth:`gaussian` the model remembers the Gaussian specs
    so it can be re-discretized at another resolution (see :meth:`with_k`).
    """

    g0: DiscreteDistribution
    g1: DiscreteDistribution
    p0: float = 0.5
    p1: float = 0.5
    spec0: Optional[TransmittanceSpec] = field(default=None, compare=False)
    spec1: Optional[TransmittanceSpec] = field(default=None, compare=False)
    n_sigma: float = field(default=DEFAULT_N_SIGMA, compare=False)

    def __post_init__(self):
        p0, p1 = float(self.p0), float(self.p1)
        if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-12:
            raise ConfigError(f"priors must be nonnegative and sum to 1, got ({p0}, {p1})")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @classmethod
    def gaussian(
        cls,
        tau0: float,
        sigma0: float,
        tau1: float,
        sigma1: float,
        k: int = DEFAULT_K,
        n_sigma: float = DEFAULT_N_SIGMA,
        p0: float = 0.5,
    ) -> "CellModel":
        s0 = TransmittanceSpec(tau0, sigma0)
        s1 = TransmittanceSpec(tau1, sigma1)
        return cls(
            discretize(s0, k, n_sigma),
            discretize(s1, k, n_sigma),
            p0,
            1.0 - p0,
            spec0=s0,
            spec1=s1,
            n_sigma=n_sigma,
        )

    @property
    def k(self) -> int:
        return max(len(self.g0), len(self.g1))

    @property
    def equal_priors(self) -> bool:
        return self.p0 == self.p1

    @property
    def is_refinable(self) -> bool:
        return self.spec0 is not None and self.spec1 is not None

    @property
    def is_perfect(self) -> bool:
        return self.g0.is_delta and self.g1.is_delta

    def with_k(self, k: int) -> "CellModel":
        """The same Gaussian model discretized on ``k`` points per level."""
        if not self.is_refinable:
            raise ConfigError("model was not built from Gaussian specs; cannot re-discretize")
        return replace(
            self,
            g0=discretize(self.spec0, k, self.n_sigma),
            g1=discretize(self.spec1, k, self.n_sigma),
        )

    def swapped(self) -> "CellModel":
        return replace(
            self, g0=self.g1, g1=self.g0, p0=self.p1, p1=self.p0,
            spec0=self.spec1, spec1=self.spec0,
        )


def _histogram_cells(dist: DiscreteDistribution):
    # Voronoi cells around each support point; density is weight / width.
    t = dist.taus
    mids = 0.5 * (t[1:] + t[:-1])
    first = t[0] - (mids[0] - t[0])
    last = t[-1] + (t[-1] - mids[-1])
    edges = np.concatenate([[first], mids, [last]])
    return edges, dist.weights / np.diff(edges)


def bayes_error_floor(model: CellModel) -> float:
    """Discrimination error left over with a perfect transmittance readout.

    Each multi-point distribution is read as a histogram density over the
    cells around its support points. Both histograms are refined onto the
    union of their cell boundaries, where both are piecewise constant, and
    ``min(p0 g0, p1 g1)`` is integrated exactly. A single-point level is a
    point mass: it overlaps only another point mass at the same place.
    """
    g0, g1, p0, p1 = model.g0, model.g1, model.p0, model.p1
    if g0.is_delta or g1.is_delta:
        if g0.is_delta and g1.is_delta and abs(g0.taus[0] - g1.taus[0]) <= _MERGE_TOL:
            return min(p0, p1)
        return 0.0
    e0, d0 = _histogram_cells(g0)
    e1, d1 = _histogram_cells(g1)
    edges = np.union1d(e0, e1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    widths = np.diff(edges)

    def density(e, d):
        i = np.searchsorted(e, mids, side="right") - 1
        inside = (i >= 0) & (i < d.size)
        out = np.zeros_like(mids)
        out[inside] = d[i[inside]]
        return out

    overlap = np.minimum(p0 * density(e0, d0), p1 * density(e1, d1))
    return float(np.dot(overlap, widths))
