"""Photon-counting statistics in the log domain.

Poisson and multimode thermal (negative binomial) photon-number laws,
binomial thinning for pure loss, and the joint signal/idler count law of a
two-mode squeezed vacuum probe read through a lossy cell.

Large tables are built as banded rows: row ``r`` holds the probabilities
of counts ``lo[r] .. lo[r] + width - 1`` and every row shares one width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import BudgetExceededError, ConfigError, MassDeficitError

INFINITE = math.inf

MARGINAL_TAIL = 1e-12
ROW_TAIL = 1e-14
MASS_TOL = 1e-9
DEFAULT_CELL_BUDGET = 200_000_000

# Working-set size (elements) of one vectorized chunk.
_CHUNK_ELEMENTS = 1 << 21
_BAND_Z = 9.0
_EXP_ARG_MAX = 200.0


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirlerr(m):
    """``log m! - [(m + 1/2) log m - m + log(2 pi)/2]`` for real ``m >= 1``."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    small = m <= 15
    ms = m[small]
    out[small] = gammaln(ms + 1.0) - ((ms + 0.5) * np.log(ms) - ms + _HALF_LOG_2PI)
    inv = 1.0 / m[~small]
    inv2 = inv * inv
    out[~small] = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 / 1680)))
    return out


def _deviance(x, mean):
    """``x log(x / mean) + mean - x``, accurate when ``x`` is close to ``mean``."""
    x = np.asarray(x, dtype=float)
    t = (x - mean) / mean
    return mean * ((1.0 + t) * np.log1p(t) - t)


def _binom_logpmf(s, n, p):
    """Saddle-point form of ``log Bin(s; n, p)`` for ``0 < p < 1``.

    Only quantities of the size of the answer are ever added, so large
    counts keep full relative accuracy.
    """
    s = np.asarray(s, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), s.shape)
    q = 1.0 - p
    edge_lo = n * math.log1p(-p)
    edge_hi = n * math.log(p)
    interior = (s > 0) & (s < n)
    si = np.where(interior, s, 1.0)
    ni = np.where(interior, n, 2.0)
    ri = ni - si
    out = (
        _stirlerr(ni) - _stirlerr(si) - _stirlerr(ri)
        + 0.5 * np.log(ni / (2.0 * math.pi * si * ri))
        - _deviance(si, ni * p) - _deviance(ri, ni * q)
    )
    return np.where(interior, out, np.where(s == 0, edge_lo, edge_hi))


def _check_modes(modes) -> Union[int, float]:
    if modes == INFINITE:
        return INFINITE
    if isinstance(modes, bool) or int(modes) != modes or modes < 1:
        raise ConfigError(f"modes must be a positive integer or INFINITE, got {modes!r}")
    return int(modes)


@dataclass(frozen=True)
class ProbeParams:
    """Signal photon budget, mode count, and efficiency of the probe.

    ``eta`` is the overall efficiency. ``eta_idler`` overrides it on the
    idler arm and defaults to the same value.
    """

    mu: float
    modes: Union[int, float] = INFINITE
    eta: float = 1.0
    eta_idler: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu < 0:
            raise ConfigError(f"mu must be finite and >= 0, got {self.mu!r}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "modes", _check_modes(self.modes))
        for name in ("eta", "eta_idler"):
            value = getattr(self, name)
            if value is None:
                continue
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def idler_eta(self) -> float:
        return self.eta if self.eta_idler is None else self.eta_idler

    @property
    def lossless(self) -> bool:
        return self.eta == 1.0 and self.idler_eta == 1.0


def _as_counts(n):
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ConfigError("photon counts must be integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ConfigError("photon counts must be nonnegative")
    return arr


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def poisson_log_pmf(n, lam: float):
    """``log P(n)`` for a Poisson law of mean ``lam``; vectorized over ``n``."""
    if not np.isfinite(lam) or lam < 0:
        raise ConfigError(f"Poisson mean must be finite and >= 0, got {lam!r}")
    n_arr = _as_counts(n)
    if lam == 0:
        out = np.where(n_arr == 0, 0.0, -np.inf)
    elif lam < 1.0:
        # no cancellation for small means; the deviance form would overflow
        out = n_arr * math.log(lam) - lam - gammaln(n_arr + 1.0)
    else:
        # n ln(lam) - lam - ln n!, regrouped as a deviance.
        nf = np.maximum(n_arr, 1).astype(float)
        out = -_HALF_LOG_2PI - 0.5 * np.log(nf) - _stirlerr(nf) - _deviance(nf, lam)
        out = np.where(n_arr == 0, -lam, out)
    return _scalar_or_array(out, n)


def multimode_thermal_log_pmf(n, mu: float, modes=INFINITE):
    """Total photon number of ``modes`` thermal modes with total mean ``mu``.

    Negative binomial with ``modes`` as the stopping parameter and per-mode
    mean ``mu / modes``. One mode gives the geometric law
    ``mu^n / (mu + 1)^(n + 1)``; infinitely many give Poisson(``mu``).
    """
    modes = _check_modes(modes)
    if not np.isfinite(mu) or mu < 0:
        raise ConfigError(f"mu must be finite and >= 0, got {mu!r}")
    if modes == INFINITE:
        return poisson_log_pmf(n, mu)
    n_arr = _as_counts(n)
    if mu == 0:
        out = np.where(n_arr == 0, 0.0, -np.inf)
    else:
        # NB(n; M, m) = M / (n + M) * Bin(n; n + M, m / (1 + m))
        m = mu / modes
        out = np.log(modes / (n_arr + float(modes))) + _binom_logpmf(n_arr, n_arr + modes, m / (1.0 + m))
    return _scalar_or_array(out, n)


def binomial_thin_log_pmf(k, n: int, p: float):
    """``log Bin(k; n, p)``: probability that ``k`` of ``n`` photons survive."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"survival probability must lie in [0, 1], got {p!r}")
    n = int(_as_counts(n))
    k_arr = _as_counts(k)
    if np.any(k_arr > n):
        raise ConfigError("cannot keep more photons than were sent (k > n)")
    if p == 0.0:
        out = np.where(k_arr == 0, 0.0, -np.inf)
    elif p == 1.0:
        out = np.where(k_arr == n, 0.0, -np.inf)
    else:
        out = _binom_logpmf(k_arr, n, p)
    return _scalar_or_array(out, k)


def _photon_law(mu: float, modes):
    if modes == INFINITE:
        return stats.poisson(mu)
    m = mu / modes
    return stats.nbinom(modes, 1.0 / (1.0 + m))


@dataclass(frozen=True, eq=False)
class CountDistribution:
    """Truncated count law on ``offset .. support_max``, stored as log-probabilities."""

    offset: int
    log_pmf: np.ndarray
    tail_mass_bound: float

    @property
    def support_max(self) -> int:
        return self.offset + self.log_pmf.size - 1

    @property
    def counts(self) -> np.ndarray:
        return np.arange(self.offset, self.support_max + 1)

    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    def total_mass(self) -> float:
        return float(self.pmf().sum())

    def mean(self) -> float:
        return float(np.dot(self.counts, self.pmf()))

    def log_prob(self, n: int) -> float:
        i = int(n) - self.offset
        if 0 <= i < self.log_pmf.size:
            return float(self.log_pmf[i])
        return -math.inf

    def as_dict(self) -> dict:
        return dict(zip(self.counts.tolist(), self.log_pmf.tolist()))


def photon_number_distribution(mu: float, modes=INFINITE, tail: float = MARGINAL_TAIL) -> CountDistribution:
    """Generated photon number of the probe, truncated to a ``tail`` bound."""
    modes = _check_modes(modes)
    if mu == 0:
        return CountDistribution(0, np.zeros(1), 0.0)
    law = _photon_law(mu, modes)
    lo = int(law.ppf(tail / 2))
    hi = int(law.isf(tail / 2))
    lo = max(lo, 0)
    bound = float(law.cdf(lo - 1) + law.sf(hi)) if lo > 0 else float(law.sf(hi))
    n = np.arange(lo, hi + 1)
    return CountDistribution(lo, np.asarray(multimode_thermal_log_pmf(n, mu, modes)), bound)


@dataclass(frozen=True, eq=False)
class Band:
    """Banded table: ``values[r, c]`` is the probability of count ``lo[r] + c``."""

    lo: np.ndarray
    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def col_min(self) -> int:
        return int(self.lo.min())

    @property
    def col_max(self) -> int:
        return int(self.lo.max()) + self.width - 1

    def row_mass(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def dense(self, col_min: Optional[int] = None, col_max: Optional[int] = None) -> np.ndarray:
        """Expand to rows x (col_min .. col_max) with zeros outside the band."""
        col_min = self.col_min if col_min is None else col_min
        col_max = self.col_max if col_max is None else col_max
        out = np.zeros((self.lo.size, col_max - col_min + 1))
        cols = (self.lo - col_min)[:, None] + np.arange(self.width)
        rows = np.broadcast_to(np.arange(self.lo.size)[:, None], cols.shape)
        ok = (cols >= 0) & (cols < out.shape[1])
        np.add.at(out, (rows[ok], cols[ok]), self.values[ok])
        return out


def _stirling_remainders(n_max: int) -> np.ndarray:
    """Table of ``_stirlerr(m)`` for ``m = 0 .. n_max``; entry 0 is unused."""
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        out[1:] = _stirlerr(np.arange(1, n_max + 1))
    return out


def _log_binom_coeff(n, s, rem):
    """``log C(n, s)`` on broadcast integer arrays.

    Written as Stirling remainders plus a relative-entropy term so that no
    two numbers of size ``log n!`` are ever subtracted.
    """
    interior = (s > 0) & (s < n)
    s_ = np.where(interior, s, 1).astype(float)
    n_ = np.broadcast_to(n, s_.shape).astype(float)
    r_ = n_ - s_
    nn = np.where(interior, n_, 2.0)
    r_ = np.where(interior, r_, 1.0)
    neg_entropy = s_ * np.log(s_ / nn) + r_ * np.log(r_ / nn)
    out = (
        rem[np.where(interior, n, 2)]
        - rem[s_.astype(np.int64)]
        - rem[r_.astype(np.int64)]
        + 0.5 * np.log(nn / (2.0 * math.pi * s_ * r_))
        - neg_entropy
    )
    return np.where(interior, out, 0.0)


def _mixture_rows(block, n_c, lo_c, ps, ws, lps, lqs, logits, block_w, rem):
    """Fill ``block[r, c] += sum_j w_j Bin(lo_r + c; n_r, p_j)`` in place.

    Per column block a reference probability ``p*`` is picked near the
    block's count fraction, and

        Bin(s; n, p_j) = Bin(s; n, p*) * Y_j(row) * Z_j(col)

    with ``Y_j`` the row-level likelihood ratio at the block's reference
    count and ``Z_j = exp((c - c_ref) * (logit p_j - logit p*))``. The
    block width keeps every exponent far from overflow, and the sum over
    components becomes a matrix product.
    """
    width = block.shape[1]
    sd = np.sqrt(n_c[:, None] * ps * (1 - ps))
    a = np.floor(n_c[:, None] * ps - _BAND_Z * sd - 10) - lo_c[:, None]
    b = np.ceil(n_c[:, None] * ps + _BAND_Z * sd + 10) - lo_c[:, None]
    u0 = int(np.clip(a.min(), 0, width))
    u1 = int(np.clip(b.max() + 1, 0, width))
    n_f = n_c.astype(float)
    mid = n_c.size // 2
    p_clip = (float(ps.min()), float(ps.max()))
    for b0 in range(u0, u1, block_w):
        b1 = min(b0 + block_w, u1)
        c_ref = (b0 + b1) // 2
        s_ref = (lo_c + c_ref).astype(float)
        p_star = float(np.clip(s_ref[mid] / max(n_f[mid], 1.0), *p_clip))
        lp_s, lq_s = math.log(p_star), math.log1p(-p_star)
        d_s = lp_s - lq_s
        cols = np.arange(b0, b1)
        s = lo_c[:, None] + cols
        valid = s <= n_c[:, None]
        log_c = _log_binom_coeff(n_c[:, None], np.minimum(s, n_c[:, None]), rem)
        s_f = np.minimum(s, n_c[:, None]).astype(float)
        base = log_c + s_f * lp_s + (n_f[:, None] - s_f) * lq_s
        base = np.where(valid, np.exp(base), 0.0)
        log_y = s_ref[:, None] * (lps - lp_s) + (n_f - s_ref)[:, None] * (lqs - lq_s)
        y = np.exp(np.minimum(log_y, _EXP_ARG_MAX)) * ws
        z = np.exp((cols - c_ref)[None, :] * (logits - d_s)[:, None])
        block[:, b0:b1] += base * (y @ z)


def binomial_mixture_band(
    n,
    probs,
    weights,
    tail: float = ROW_TAIL,
    p_range=None,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> Band:
    """Rows ``sum_j w_j Bin(s; n_r, p_j)`` for a sequence of trial counts ``n_r``.

    Every row covers the counts between the ``tail`` quantile of the
    smallest success probability and the upper ``tail`` quantile of the
    largest. ``p_range`` widens that range so that several mixtures can be
    evaluated on aligned columns.

    Each component is only evaluated inside its own ``_BAND_Z`` standard
    deviation envelope, which is far wider than the ``tail`` quantiles.
    """
    n = np.asarray(n, dtype=np.int64)
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(probs < 0) or np.any(probs > 1):
        raise ConfigError("success probabilities must lie in [0, 1]")
    p_lo, p_hi = float(probs.min()), float(probs.max())
    if p_range is not None:
        p_lo, p_hi = min(p_lo, p_range[0]), max(p_hi, p_range[1])

    lo = np.asarray(stats.binom.ppf(tail, n, p_lo), dtype=float)
    hi = np.asarray(stats.binom.isf(tail, n, p_hi), dtype=float)
    lo = np.where(np.isnan(lo), 0, np.maximum(lo, 0)).astype(np.int64)
    hi = np.where(np.isnan(hi), n, np.minimum(hi, n)).astype(np.int64)
    hi = np.maximum(hi, lo)
    width = int((hi - lo).max()) + 1
    if n.size * width > cell_budget:
        raise BudgetExceededError(
            f"count band of {n.size} x {width} cells exceeds the budget of {cell_budget}"
        )

    values = np.zeros((n.size, width))
    rem = _stirling_remainders(max(int(n.max()), 2))
    interior = (probs > 0.0) & (probs < 1.0)
    ps, ws = probs[interior], weights[interior]
    if ps.size:
        lps, lqs = np.log(ps), np.log1p(-ps)
        logits = lps - lqs
        spread = float(logits.max() - logits.min())
        block_w = int(np.clip(2 * _EXP_ARG_MAX / max(spread, 1e-300), 8, 1024))
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // width)
    for start in range(0, n.size, rows_per_chunk):
        sl = slice(start, start + rows_per_chunk)
        n_c, lo_c = n[sl], lo[sl]
        block = values[sl]
        if ps.size:
            _mixture_rows(block, n_c, lo_c, ps, ws, lps, lqs, logits, block_w, rem)
        for p, w in zip(probs[~interior], weights[~interior]):
            target = np.zeros_like(n_c) if p == 0.0 else n_c
            col = target - lo_c
            ok = (col >= 0) & (col < width)
            block[np.nonzero(ok)[0], col[ok]] += w
    return Band(lo, values)


@dataclass(frozen=True, eq=False)
class JointCounts:
    """Joint law of (signal, idler) counts on a dense rectangular window.

    ``pmf[i, s]`` is the probability of ``n_I = idler_offset + i`` and
    ``n_S = signal_offset + s``.
    """

    signal_offset: int
    idler_offset: int
    pmf: np.ndarray
    tail_mass_bound: float

    @property
    def signal_counts(self) -> np.ndarray:
        return self.signal_offset + np.arange(self.pmf.shape[1])

    @property
    def idler_counts(self) -> np.ndarray:
        return self.idler_offset + np.arange(self.pmf.shape[0])

    def total_mass(self) -> float:
        return float(self.pmf.sum())

    def signal_marginal(self) -> np.ndarray:
        return self.pmf.sum(axis=0)

    def idler_marginal(self) -> np.ndarray:
        return self.pmf.sum(axis=1)

    def prob(self, n_s: int, n_i: int) -> float:
        i, s = n_i - self.idler_offset, n_s - self.signal_offset
        if 0 <= i < self.pmf.shape[0] and 0 <= s < self.pmf.shape[1]:
            return float(self.pmf[i, s])
        return 0.0

    def means(self):
        m = self.total_mass()
        return (
            float(self.signal_marginal() @ self.signal_counts) / m,
            float(self.idler_marginal() @ self.idler_counts) / m,
        )

    def covariance(self) -> float:
        m = self.total_mass()
        ms, mi = self.means()
        ds = self.signal_counts - ms
        di = self.idler_counts - mi
        return float(di @ self.pmf @ ds) / m


def check_mass(mass: float, what: str):
    if mass < 1.0 - MASS_TOL:
        raise MassDeficitError(f"{what}: truncated mass {mass:.15f} is below 1 - {MASS_TOL:g}")


def joint_tmsv_counts(
    params: ProbeParams, tau: float, cell_budget: int = DEFAULT_CELL_BUDGET
) -> JointCounts:
    """Joint (signal, idler) count law of the TMSV probe through transmittance ``tau``.

    The generated photon number ``n`` is shared by both arms; the idler
    keeps each photon with probability ``eta_idler`` and the signal with
    probability ``eta * tau``, independently.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau!r}")
    pn = photon_number_distribution(params.mu, params.modes)
    n = pn.counts
    p_n = pn.pmf()
    sig = binomial_mixture_band(n, [params.eta * tau], [1.0], cell_budget=cell_budget)
    if params.idler_eta == 1.0:
        # n_I = n, so the rows of the signal band are already the joint law.
        dense = sig.dense() * p_n[:, None]
        joint = JointCounts(sig.col_min, pn.offset, dense, pn.tail_mass_bound)
    else:
        idl = binomial_mixture_band(n, [params.idler_eta], [1.0], cell_budget=cell_budget)
        cells = (idl.col_max - idl.col_min + 1) * (sig.col_max - sig.col_min + 1)
        if cells > cell_budget:
            raise BudgetExceededError(f"joint grid of {cells} cells exceeds the budget")
        dense = (idl.dense() * p_n[:, None]).T @ sig.dense()
        joint = JointCounts(sig.col_min, idl.col_min, dense, pn.tail_mass_bound)
    check_mass(joint.total_mass(), "joint TMSV counts")
    return joint
