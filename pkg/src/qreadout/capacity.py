"""Holevo capacity of the memory for classical (coherent-state) transmitters.

A single coherent mode ``|alpha>`` with ``|alpha|^2 = mu`` leaves the cell
in a mixture of coherent states ``|sqrt(tau) alpha>``. On a discretized
model each output is a finite mixture and its entropy follows from the
Gram matrix of the states. The continuum value is approached by refining
the discretization until successive values agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dists import CellModel, merge_supports
from .errors import ConfigError
from .infotheory import GramMixture, coherent_gram, mixture_entropy

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-5
K_START = 25
K_CAP = 1600
CONCAVITY_TOL = 1e-7


@dataclass(frozen=True)
class CapacityResult:
    chi_bits: float
    k_used: int
    convergence_gap: float
    converged: bool = True
    concave_on_grid: Optional[bool] = None
    history: Tuple[Tuple[int, float], ...] = field(default=(), compare=False)


def _entropy_of(taus, weights, mu):
    return mixture_entropy(GramMixture(weights, coherent_gram(taus, mu)))


def chi_coherent(model: CellModel, mu: float, k: Optional[int] = None) -> float:
    """Holevo quantity in bits of a single coherent mode of energy ``mu``.

    ``k`` re-discretizes a Gaussian model first; by default the model's own
    discretization is used.
    """
    if not np.isfinite(mu) or mu < 0:
        raise ConfigError(f"mu must be finite and >= 0, got {mu!r}")
    if k is not None and k != model.k:
        model = model.with_k(k)
    if mu == 0:
        return 0.0
    taus, q = merge_supports([
        (model.g0.taus, model.p0 * model.g0.weights),
        (model.g1.taus, model.p1 * model.g1.weights),
    ])
    q = q / q.sum()
    s_mix = _entropy_of(taus, q, mu)
    s0 = _entropy_of(model.g0.taus, model.g0.weights, mu)
    s1 = _entropy_of(model.g1.taus, model.g1.weights, mu)
    return max(0.0, s_mix - model.p0 * s0 - model.p1 * s1)


def refinement_sequence(k_start: int = K_START, k_cap: int = K_CAP):
    """``k_start, 2 k_start - 1, ...`` up to ``k_cap``; each grid nests in the next."""
    k = k_start
    while k <= k_cap:
        yield k
        k = 2 * k - 1


def chi_classical(
    model: CellModel,
    mu: float,
    tol: float = DEFAULT_TOL,
    eta: float = 1.0,
    k_start: int = K_START,
    k_cap: int = K_CAP,
) -> CapacityResult:
    """Classical capacity of the cell, converged in the discretization.

    Losses only rescale the probe energy to ``eta * mu``. Non-convergence
    at ``k_cap`` is reported through ``converged=False`` with the last
    value, not raised.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"eta must lie in (0, 1], got {eta!r}")
    energy = eta * mu
    if model.is_perfect:
        return CapacityResult(chi_coherent(model, energy), 1, 0.0, True)
    if not model.is_refinable:
        raise ConfigError("capacity refinement needs a model built from Gaussian specs")
    history = []
    prev = None
    for k in refinement_sequence(k_start, k_cap):
        chi = chi_coherent(model, energy, k)
        history.append((k, chi))
        if prev is not None:
            gap = abs(chi - prev)
            if gap < tol:
                return CapacityResult(chi, k, gap, True, history=tuple(history))
        prev = chi
    gap = abs(history[-1][1] - history[-2][1]) if len(history) > 1 else float("nan")
    log.warning("capacity did not converge at k=%d (gap %.3g bits)", history[-1][0], gap)
    return CapacityResult(history[-1][1], history[-1][0], gap, False, history=tuple(history))


@dataclass(frozen=True)
class ConcavityReport:
    concave: bool
    violations: List[Tuple[int, float]]
    chi: np.ndarray

    def __bool__(self):
        return self.concave


def check_concavity(model: CellModel, mu_grid, tol: float = CONCAVITY_TOL) -> ConcavityReport:
    """Check that the Holevo quantity is concave in the photon number on a grid.

    Concavity on an uneven grid means each interior value lies on or
    above the chord through its neighbours. A triple is a violation when
    the chord exceeds the middle value by more than ``tol`` bits. The
    model's own discretization is used at every point so the curve is
    smooth in ``mu``.
    """
    mu = np.asarray(mu_grid, dtype=float)
    if mu.ndim != 1 or mu.size < 3:
        raise ConfigError("concavity check needs a grid of at least 3 points")
    if np.any(np.diff(mu) <= 0):
        raise ConfigError("mu grid must be strictly increasing")
    chi = np.array([chi_coherent(model, m) for m in mu])
    frac = (mu[1:-1] - mu[:-2]) / (mu[2:] - mu[:-2])
    chord = chi[:-2] + frac * (chi[2:] - chi[:-2])
    defect = chord - chi[1:-1]
    violations = [(int(i) + 1, float(d)) for i, d in enumerate(defect) if d > tol]
    return ConcavityReport(not violations, violations, chi)
