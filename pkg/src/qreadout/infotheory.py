"""Entropy primitives.

Binary Shannon entropy, the information recovered from a binary readout,
and the von Neumann entropy of a finite mixture of coherent states computed
from its Gram matrix without orthogonalizing the states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import ConfigError, NotPSDError

EIG_CLIP_TOL = 1e-10
EIG_NEGATIVE_TOL = 1e-8


def binary_entropy(p: float) -> float:
    """Shannon entropy in bits of a coin with bias ``p``.

    The argument is folded onto [0, 1/2] first so that ``H(p)`` and
    ``H(1 - p)`` evaluate the same floating-point expression.
    """
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"probability must lie in [0, 1], got {p!r}")
    a = p if p <= 0.5 else 1.0 - p
    b = 1.0 - a
    # rounding can push the value a few ulp above 1 near p = 1/2
    return min(1.0, float(-(xlogy(a, a) + xlogy(b, b)) / math.log(2.0)))


def info_from_perr(p_err: float) -> float:
    """Bits recovered from an equiprobable binary cell read with error ``p_err``."""
    p_err = float(p_err)
    if not 0.0 <= p_err <= 0.5:
        raise ConfigError(
            f"error probability must lie in [0, 1/2], got {p_err!r}; "
            "a decoder worse than guessing indicates an upstream bug"
        )
    return 1.0 - binary_entropy(p_err)


def coherent_gram(taus, mu: float) -> np.ndarray:
    """Gram matrix of the coherent states ``|sqrt(tau_i) alpha>`` with ``|alpha|^2 = mu``.

    For real amplitudes the overlap is ``exp(-mu (sqrt(tau_i) - sqrt(tau_j))^2 / 2)``.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ConfigError("need at least one transmittance")
    if np.any(taus < 0) or np.any(taus > 1):
        raise ConfigError("transmittances must lie in [0, 1]")
    if not np.isfinite(mu) or mu < 0:
        raise ConfigError(f"mu must be finite and >= 0, got {mu!r}")
    s = np.sqrt(taus)
    g = np.exp(-0.5 * mu * np.subtract.outer(s, s) ** 2)
    np.fill_diagonal(g, 1.0)
    return g


@dataclass(frozen=True, eq=False)
class GramMixture:
    """Mixture ``sum_i q_i |psi_i><psi_i|`` described by weights and Gram matrix."""

    weights: np.ndarray
    gram: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.weights, dtype=float))
        g = np.atleast_2d(np.asarray(self.gram, dtype=float))
        if q.ndim != 1 or g.shape != (q.size, q.size):
            raise ConfigError("Gram matrix must be K x K with K the number of weights")
        if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ConfigError("mixture weights must be positive and sum to 1")
        if not np.array_equal(g, g.T):
            raise ConfigError("Gram matrix must be symmetric")
        if np.any(np.diag(g) != 1.0):
            raise ConfigError("Gram matrix must have a unit diagonal")
        if np.any(g < 0) or np.any(g > 1):
            raise ConfigError("Gram entries must lie in [0, 1]")
        object.__setattr__(self, "weights", q)
        object.__setattr__(self, "gram", g)

    @property
    def size(self) -> int:
        return self.weights.size

    def symmetrized(self) -> np.ndarray:
        """``sqrt(Q) G sqrt(Q)``, which shares its spectrum with ``Q G``."""
        r = np.sqrt(self.weights)
        return r[:, None] * self.gram * r[None, :]


def mixture_spectrum(mix: GramMixture) -> np.ndarray:
    """Eigenvalues of the mixture density operator, clipped to [0, 1]."""
    lam = np.linalg.eigvalsh(mix.symmetrized())
    if lam[0] < -EIG_NEGATIVE_TOL:
        raise NotPSDError(f"Gram matrix is not positive semidefinite (eigenvalue {lam[0]:.3e})")
    lam = np.where(np.abs(lam) < EIG_CLIP_TOL, 0.0, lam)
    return np.clip(lam, 0.0, 1.0)


def mixture_entropy(mix: GramMixture) -> float:
    """Von Neumann entropy in bits of a mixture of pure states."""
    if mix.size == 1:
        return 0.0
    lam = mixture_spectrum(mix)
    return float(max(0.0, -np.sum(xlogy(lam, lam)) / math.log(2.0)))


def trace_power(mix: GramMixture, n: int) -> float:
    """``Tr[(Q G)^n]`` by repeated matrix multiplication."""
    if int(n) != n or n < 1:
        raise ConfigError("n must be a positive integer")
    qg = mix.weights[:, None] * mix.gram
    return float(np.trace(np.linalg.matrix_power(qg, int(n))))
