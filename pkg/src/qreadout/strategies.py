"""Readout strategies for an imperfect binary memory cell.

Three classical benchmarks and one quantum strategy, each evaluated
exactly on the discretized cell model:

* ``CHB``: the Helstrom-type lower bound on the error of any classical
  (coherent-state mixture) transmitter, averaged over both levels.
* ``CPC``: coherent light, photon counting, maximum-likelihood decision that
  knows the full transmittance distributions.
* ``CMV``: as ``CPC`` but the decision only uses the two mean transmittances.
* ``QUANTUM``: two-mode squeezed vacuum, photon counting on signal and idler,
  maximum-likelihood decision on the count pair.

All error probabilities assume equiprobable bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .counting import (
    DEFAULT_CELL_BUDGET,
    INFINITE,
    MARGINAL_TAIL,
    BudgetExceededError,
    ProbeParams,
    binomial_mixture_band,
    check_mass,
    photon_number_distribution,
    poisson_log_pmf,
)
from .dists import CellModel, DiscreteDistribution
from .errors import ConfigError
from .infotheory import info_from_perr

P_ERR_SLACK = 1e-12
_COL_CHUNK = 512


class Strategy(str, enum.Enum):
    CHB = "CHB"
    CPC = "CPC"
    CMV = "CMV"
    QUANTUM = "QUANTUM"


class Benchmark(str, enum.Enum):
    PC = "PC"
    HB = "HB"
    CHI = "CHI"


@dataclass(frozen=True)
class StrategyResult:
    strategy: Strategy
    p_err: float
    info_bits: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def _result(strategy: Strategy, p_err: float, **diagnostics) -> StrategyResult:
    if not -P_ERR_SLACK <= p_err <= 0.5 + P_ERR_SLACK:
        raise ArithmeticError(f"{strategy.value}: error probability {p_err!r} out of range")
    p_err = min(max(p_err, 0.0), 0.5)
    return StrategyResult(strategy, p_err, info_from_perr(p_err), diagnostics)


def _require_equal_priors(model: CellModel):
    if not model.equal_priors:
        raise ConfigError("readout strategies are defined for equiprobable bits (p0 = p1 = 1/2)")


def _check_energy(mu, eta):
    if not np.isfinite(mu) or mu < 0:
        raise ConfigError(f"mu must be finite and >= 0, got {mu!r}")
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"eta must lie in (0, 1], got {eta!r}")


def helstrom_pair_error(mu: float, tau0: float, tau1: float) -> float:
    """Classical error bound for two perfectly known transmittances."""
    x = mu * (math.sqrt(tau0) - math.sqrt(tau1)) ** 2
    return 0.5 * (1.0 - math.sqrt(-math.expm1(-x)))


def classical_hb(model: CellModel, mu: float, eta: float = 1.0) -> StrategyResult:
    """Bound on any classical local readout, from the pairwise Helstrom bound.

    Loss only rescales the probe energy to ``eta * mu``.
    """
    _require_equal_priors(model)
    _check_energy(mu, eta)
    s0 = np.sqrt(model.g0.taus)
    s1 = np.sqrt(model.g1.taus)
    x = (eta * mu) * np.subtract.outer(s0, s1) ** 2
    fidelity_term = np.sqrt(-np.expm1(-x))
    p_err = 0.5 * (1.0 - model.g0.weights @ fidelity_term @ model.g1.weights)
    return _result(Strategy.CHB, float(p_err), k=model.k)


def _count_window(lams, tail=MARGINAL_TAIL):
    lam_lo, lam_hi = float(np.min(lams)), float(np.max(lams))
    lo = int(stats.poisson.ppf(tail / 2, lam_lo)) if lam_lo > 0 else 0
    hi = int(stats.poisson.isf(tail / 2, lam_hi)) if lam_hi > 0 else 0
    return np.arange(max(lo, 0), max(hi, 0) + 1)


def poisson_mixture_pmf(dist: DiscreteDistribution, energy: float, counts) -> np.ndarray:
    """``sum_j w_j Poisson(n; energy * tau_j)`` on the given counts."""
    table = np.vstack([np.exp(poisson_log_pmf(counts, energy * t)) for t in dist.taus])
    return dist.weights @ table


def decision_error(p0, p1, decide_one) -> float:
    """Error of a deterministic rule: half the mass each hypothesis sends the wrong way."""
    return 0.5 * float(np.sum(p0[decide_one]) + np.sum(p1[~decide_one]))


def _classical_count_laws(model: CellModel, energy: float):
    lams = np.concatenate([model.g0.taus, model.g1.taus]) * energy
    counts = _count_window(lams)
    p0 = poisson_mixture_pmf(model.g0, energy, counts)
    p1 = poisson_mixture_pmf(model.g1, energy, counts)
    check_mass(p0.sum(), "classical count law, bit 0")
    check_mass(p1.sum(), "classical count law, bit 1")
    return counts, p0, p1


def classical_pc(model: CellModel, mu: float, eta: float = 1.0) -> StrategyResult:
    """Coherent probe, photon counter, maximum-likelihood decision on the count.

    Ties decide bit 0.
    """
    _require_equal_priors(model)
    _check_energy(mu, eta)
    counts, p0, p1 = _classical_count_laws(model, eta * mu)
    p_err = decision_error(p0, p1, p1 > p0)
    return _result(
        Strategy.CPC, p_err, k=model.k, n_min=int(counts[0]), n_max=int(counts[-1]),
        mass_deficit=max(0.0, 1.0 - min(p0.sum(), p1.sum())),
    )


def classical_mv(model: CellModel, mu: float, eta: float = 1.0) -> StrategyResult:
    """Photon counting with a decision rule that only knows the mean transmittances.

    The rule compares Poisson likelihoods at the two means; its error is
    evaluated under the true mixture count laws.
    """
    _require_equal_priors(model)
    _check_energy(mu, eta)
    energy = eta * mu
    counts, p0, p1 = _classical_count_laws(model, energy)
    m0 = poisson_mixture_pmf(DiscreteDistribution.delta(model.g0.mean()), energy, counts)
    m1 = poisson_mixture_pmf(DiscreteDistribution.delta(model.g1.mean()), energy, counts)
    p_err = decision_error(p0, p1, m1 > m0)
    return _result(
        Strategy.CMV, p_err, k=model.k, n_min=int(counts[0]), n_max=int(counts[-1]),
        mass_deficit=max(0.0, 1.0 - min(p0.sum(), p1.sum())),
    )


def _row_dense(band, col_min, n_cols):
    out = np.zeros((band.lo.size, n_cols))
    w = band.width
    for r, lo in enumerate(band.lo - col_min):
        out[r, lo:lo + w] = band.values[r]
    return out


def quantum_pc(
    model: CellModel,
    params: ProbeParams,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> StrategyResult:
    """TMSV probe with photon counting on both arms and an ML decision on the pair.

    With a perfect idler arm the idler count equals the generated photon
    number, so the joint law is a photon-number weight times one row of
    binomial mixtures per count. Cost is O(n_rows * width) per bit value,
    where ``width`` spans the signal counts of both hypotheses.

    With idler loss the joint law is ``(P * B_idler)^T @ M_signal`` over the
    generated photon number and is accumulated column block by column block.
    """
    _require_equal_priors(model)
    pn = photon_number_distribution(params.mu, params.modes)
    n, p_n = pn.counts, pn.pmf()
    eta_s, eta_i = params.eta, params.idler_eta
    p0s, p1s = eta_s * model.g0.taus, eta_s * model.g1.taus
    p_range = (min(p0s.min(), p1s.min()), max(p0s.max(), p1s.max()))
    band0 = binomial_mixture_band(n, p0s, model.g0.weights, p_range=p_range, cell_budget=cell_budget)
    band1 = binomial_mixture_band(n, p1s, model.g1.weights, p_range=p_range, cell_budget=cell_budget)
    diagnostics = dict(
        k=model.k, modes=params.modes, n_min=int(n[0]), n_max=int(n[-1]),
        signal_width=band0.width, photon_tail_bound=pn.tail_mass_bound,
    )

    if eta_i == 1.0:
        mass0 = float(p_n @ band0.row_mass())
        mass1 = float(p_n @ band1.row_mass())
        overlap = np.minimum(band0.values, band1.values).sum(axis=1)
        p_err = 0.5 * float(p_n @ overlap)
        diagnostics["collapsed"] = True
    else:
        idler = binomial_mixture_band(n, [eta_i], [1.0], cell_budget=cell_budget)
        col_min = min(band0.col_min, band1.col_min)
        n_sig = max(band0.col_max, band1.col_max) - col_min + 1
        n_idl = idler.col_max - idler.col_min + 1
        cells = max(n.size, n_idl) * n_sig
        if cells > cell_budget:
            raise BudgetExceededError(
                f"joint count grid of {n_idl} x {n_sig} cells exceeds the budget of {cell_budget}"
            )
        weighted_idler = (_row_dense(idler, idler.col_min, n_idl) * p_n[:, None]).T.copy()
        sig0 = _row_dense(band0, col_min, n_sig)
        sig1 = _row_dense(band1, col_min, n_sig)
        p_err = mass0 = mass1 = 0.0
        for c0 in range(0, n_sig, _COL_CHUNK):
            a0 = weighted_idler @ sig0[:, c0:c0 + _COL_CHUNK]
            a1 = weighted_idler @ sig1[:, c0:c0 + _COL_CHUNK]
            p_err += 0.5 * float(np.minimum(a0, a1).sum())
            mass0 += float(a0.sum())
            mass1 += float(a1.sum())
        diagnostics.update(collapsed=False, idler_width=n_idl)

    check_mass(mass0, "quantum joint count law, bit 0")
    check_mass(mass1, "quantum joint count law, bit 1")
    diagnostics["mass_deficit"] = max(0.0, 1.0 - min(mass0, mass1))
    return _result(Strategy.QUANTUM, p_err, **diagnostics)


def quantum_gain(
    model: CellModel,
    mu: float,
    eta: float = 1.0,
    benchmark: Benchmark = Benchmark.PC,
    modes=INFINITE,
    quantum: StrategyResult = None,
) -> float:
    """Information advantage ``Q - C`` in bits of the quantum strategy over a benchmark.

    ``quantum`` may carry a precomputed quantum result for the same point.
    """
    from .capacity import chi_classical

    benchmark = Benchmark(benchmark)
    if quantum is None:
        quantum = quantum_pc(model, ProbeParams(mu, modes, eta))
    if benchmark is Benchmark.PC:
        classical = classical_pc(model, mu, eta).info_bits
    elif benchmark is Benchmark.HB:
        classical = classical_hb(model, mu, eta).info_bits
    else:
        classical = chi_classical(model, mu, eta=eta).chi_bits
    return quantum.info_bits - classical
