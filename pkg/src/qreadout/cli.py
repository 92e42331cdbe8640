"""Command-line front end.

Subcommands::

    eval       one parameter point, every requested strategy
    sweep      one swept variable (mu or tau0)
    gainmap    mu x tau0 grid of the quantum gain over one benchmark
    capacity   classical capacity with convergence and concavity diagnostics
    selftest   quick oracle checks

Ranges are written ``start:stop:count[:log|lin]``; mu ranges are
log-spaced unless ``:lin`` is given, tau0 ranges are linear. Output is CSV
(header line, fixed column order, 9 significant digits) or a JSON mirror.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from . import __version__
from .capacity import check_concavity, chi_classical
from .counting import INFINITE, ProbeParams
from .dists import DEFAULT_K, DEFAULT_N_SIGMA, CellModel
from .errors import BudgetExceededError, ConfigError, ConvergenceError, MassDeficitError
from .strategies import (
    Benchmark,
    Strategy,
    classical_hb,
    classical_mv,
    classical_pc,
    quantum_pc,
)

log = logging.getLogger("qreadout")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_CONVERGENCE = 0, 1, 2, 3

STRATEGY_ORDER = ("CHB", "CPC", "CMV", "QUANTUM", "CHI")
GAIN_SOURCES = (("PC", "CPC"), ("HB", "CHB"), ("CHI", "CHI"))
SIG_DIGITS = 9


@dataclass(frozen=True)
class Range:
    start: float
    stop: float
    count: int
    log: bool

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        if self.log:
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.count)
        return np.linspace(self.start, self.stop, self.count)


def parse_value_or_range(text, name, log_default):
    """A float, or ``start:stop:count[:log|lin]``."""
    text = str(text).strip()
    parts = text.split(":")
    try:
        if len(parts) == 1:
            value = float(parts[0])
            if not math.isfinite(value):
                raise ValueError
            return value
        if len(parts) not in (3, 4):
            raise ValueError
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--{name}: expected a number or start:stop:count[:log|lin], got {text!r}")
    spacing = parts[3].lower() if len(parts) == 4 else ("log" if log_default else "lin")
    if spacing not in ("log", "lin"):
        raise ConfigError(f"--{name}: spacing must be 'log' or 'lin', got {spacing!r}")
    if not (math.isfinite(start) and math.isfinite(stop)) or count < 1:
        raise ConfigError(f"--{name}: range must be finite with a positive count")
    if spacing == "log" and (start <= 0 or stop <= 0):
        raise ConfigError(f"--{name}: log-spaced ranges need positive endpoints")
    return Range(start, stop, count, spacing == "log")


def parse_modes(text):
    text = str(text).strip().lower()
    if text in ("inf", "infinite", "infinity"):
        return INFINITE
    try:
        modes = int(text)
    except ValueError:
        raise ConfigError(f"--modes must be a positive integer or 'inf', got {text!r}")
    if modes < 1:
        raise ConfigError("--modes must be >= 1")
    return modes


def parse_strategies(text) -> List[str]:
    names = [s.strip().upper() for s in str(text).split(",") if s.strip()]
    if not names:
        raise ConfigError("--strategies: empty strategy set")
    unknown = sorted(set(names) - set(STRATEGY_ORDER))
    if unknown:
        raise ConfigError(f"--strategies: unknown {unknown}; choose from {','.join(STRATEGY_ORDER)}")
    return [s for s in STRATEGY_ORDER if s in names]


@dataclass(frozen=True)
class ExperimentConfig:
    tau0: object = 0.972
    sigma0: float = 0.001
    tau1: float = 0.982
    sigma1: float = 0.001
    mu: object = 1e4
    eta: float = 1.0
    modes: object = INFINITE
    strategies: tuple = STRATEGY_ORDER
    benchmark: str = "PC"
    k: int = DEFAULT_K
    n_sigma: float = DEFAULT_N_SIGMA
    tol: float = 1e-5
    out: Optional[str] = None
    format: str = "csv"
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    def validate(self):
        for name in ("tau0", "mu"):
            values = getattr(self, name)
            values = values.values() if isinstance(values, Range) else [values]
            for v in values:
                lo, hi = (0.0, 1.0) if name == "tau0" else (0.0, math.inf)
                if not lo <= v <= hi:
                    raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
        for name in ("tau1",):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        for name in ("sigma0", "sigma1"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if self.k < 1 or self.n_sigma <= 0 or self.tol <= 0:
            raise ConfigError("k, n-sigma and tol must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if not self.strategies:
            raise ConfigError("empty strategy set")
        Benchmark(self.benchmark)
        return self

    def swept(self) -> List[str]:
        return [n for n in ("mu", "tau0") if isinstance(getattr(self, n), Range)]


_CONFIG_KEYS = {
    "tau0", "sigma0", "tau1", "sigma1", "mu", "eta", "modes", "strategies",
    "benchmark", "k", "n_sigma", "tol", "out", "format", "jobs",
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip("'\"")
    return values


def _coerce(key, value):
    try:
        if key in ("tau0", "mu"):
            return parse_value_or_range(value, key, log_default=(key == "mu"))
        if key == "modes":
            return parse_modes(value)
        if key == "strategies":
            return tuple(parse_strategies(value))
        if key == "benchmark":
            return Benchmark(str(value).upper()).value
        if key in ("k", "jobs"):
            return int(value)
        if key in ("out", "format"):
            return str(value)
        return float(value)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value for {key}: {value!r}")


def build_config(args) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return replace(ExperimentConfig(), **{k: _coerce(k, v) for k, v in merged.items()}).validate()


# --- evaluation ------------------------------------------------------------


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isinf(value):
        return "inf"
    return format(value, f".{SIG_DIGITS}g")


def _json_value(value):
    if isinstance(value, (bool, str, int, np.integer)):
        return value if not isinstance(value, np.integer) else int(value)
    value = float(value)
    if math.isinf(value):
        return "inf"
    return float(format(value, f".{SIG_DIGITS}g"))


def _model(point) -> CellModel:
    return CellModel.gaussian(
        point["tau0"], point["sigma0"], point["tau1"], point["sigma1"],
        k=point["k"], n_sigma=point["n_sigma"],
    )


def evaluate_point(point: dict) -> dict:
    """All requested strategies at one parameter point, as an ordered record."""
    model = _model(point)
    mu, eta, strategies = point["mu"], point["eta"], point["strategies"]
    row = {
        "mu": mu, "tau0": point["tau0"], "sigma0": point["sigma0"],
        "tau1": point["tau1"], "sigma1": point["sigma1"], "eta": eta,
        "modes": "inf" if point["modes"] == INFINITE else int(point["modes"]),
        "k": point["k"], "n_sigma": point["n_sigma"],
    }
    info = {}
    runners = {
        "CHB": lambda: classical_hb(model, mu, eta),
        "CPC": lambda: classical_pc(model, mu, eta),
        "CMV": lambda: classical_mv(model, mu, eta),
        "QUANTUM": lambda: quantum_pc(model, ProbeParams(mu, point["modes"], eta)),
    }
    diagnostics = {}
    for name in strategies:
        if name == "CHI":
            cap = chi_classical(model, mu, tol=point["tol"], eta=eta)
            row["info_CHI"] = cap.chi_bits
            diagnostics.update(chi_k_used=cap.k_used, chi_gap=cap.convergence_gap,
                               chi_converged=cap.converged)
            info["CHI"] = cap.chi_bits
            continue
        result = runners[name]()
        row[f"p_err_{name}"] = result.p_err
        row[f"info_{name}"] = result.info_bits
        info[name] = result.info_bits
        if name == "QUANTUM":
            diagnostics.update(q_mass_deficit=result.diagnostics["mass_deficit"],
                               q_n_max=result.diagnostics["n_max"])
        elif name in ("CPC", "CMV"):
            diagnostics["c_mass_deficit"] = result.diagnostics["mass_deficit"]
    if "QUANTUM" in info:
        for gain, source in GAIN_SOURCES:
            if source in info:
                row[f"gain_{gain}"] = info["QUANTUM"] - info[source]
    row.update(diagnostics)
    return row


def evaluate_gain(point: dict) -> dict:
    """Quantum gain over one benchmark at one point of a gain map."""
    bench = point["benchmark"]
    source = dict(GAIN_SOURCES)[bench]
    full = evaluate_point({**point, "strategies": ("QUANTUM", source)})
    row = {
        "mu": point["mu"], "tau0": point["tau0"], f"gain_{bench}": full[f"gain_{bench}"],
        "sigma0": point["sigma0"], "tau1": point["tau1"], "sigma1": point["sigma1"],
        "eta": point["eta"], "modes": full["modes"], "k": point["k"],
        "n_sigma": point["n_sigma"], "benchmark": bench,
        "q_mass_deficit": full["q_mass_deficit"],
    }
    for key in ("chi_k_used", "chi_gap", "chi_converged"):
        if key in full:
            row[key] = full[key]
    return row


def evaluate_capacity(point: dict) -> dict:
    model = _model(point)
    cap = chi_classical(model, point["mu"], tol=point["tol"], eta=point["eta"])
    return {
        "mu": point["mu"], "tau0": point["tau0"], "sigma0": point["sigma0"],
        "tau1": point["tau1"], "sigma1": point["sigma1"], "eta": point["eta"],
        "n_sigma": point["n_sigma"], "chi_bits": cap.chi_bits, "k_used": cap.k_used,
        "convergence_gap": cap.convergence_gap, "converged": cap.converged,
    }


def _points(cfg: ExperimentConfig) -> List[dict]:
    base = {
        "sigma0": cfg.sigma0, "tau1": cfg.tau1, "sigma1": cfg.sigma1, "eta": cfg.eta,
        "modes": cfg.modes, "k": cfg.k, "n_sigma": cfg.n_sigma, "tol": cfg.tol,
        "strategies": tuple(cfg.strategies), "benchmark": cfg.benchmark,
    }
    mus = cfg.mu.values() if isinstance(cfg.mu, Range) else [cfg.mu]
    taus = cfg.tau0.values() if isinstance(cfg.tau0, Range) else [cfg.tau0]
    return [dict(base, mu=float(m), tau0=float(t)) for m in mus for t in taus]


def run_parallel(func, points, jobs):
    """Evaluate ``func`` over ``points``; results come back in grid order."""
    if jobs <= 1 or len(points) <= 1:
        return [func(p) for p in points]
    with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as pool:
        return list(pool.map(func, points))


def run_eval(cfg: ExperimentConfig) -> List[dict]:
    if cfg.swept():
        raise ConfigError("eval takes single values; use sweep or gainmap for ranges")
    return [evaluate_point(_points(cfg)[0])]


def run_sweep(cfg: ExperimentConfig) -> List[dict]:
    if len(cfg.swept()) != 1:
        raise ConfigError("sweep needs exactly one range (mu or tau0)")
    return run_parallel(evaluate_point, _points(cfg), cfg.jobs)


def run_gainmap(cfg: ExperimentConfig) -> List[dict]:
    if len(cfg.swept()) != 2:
        raise ConfigError("gainmap needs ranges for both mu and tau0")
    return run_parallel(evaluate_gain, _points(cfg), cfg.jobs)


def run_capacity(cfg: ExperimentConfig) -> List[dict]:
    if "tau0" in cfg.swept():
        raise ConfigError("capacity sweeps mu only")
    rows = run_parallel(evaluate_capacity, _points(cfg), cfg.jobs)
    if isinstance(cfg.mu, Range) and cfg.mu.count >= 3:
        model = _model(_points(cfg)[0])
        report = check_concavity(model, cfg.mu.values())
        for row in rows:
            row["concave_on_grid"] = report.concave
    return rows


# --- output ----------------------------------------------------------------


def render(rows: List[dict], fmt: str) -> str:
    if fmt == "json":
        records = [{k: _json_value(v) for k, v in row.items()} for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    columns = list(rows[0]) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def emit(text: str, out: Optional[str]):
    if out in (None, "", "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# --- selftest --------------------------------------------------------------


def run_selftest() -> List[dict]:
    from .infotheory import GramMixture, coherent_gram, mixture_entropy, trace_power
    from .strategies import helstrom_pair_error

    checks = []

    def check(name, ok, detail=""):
        checks.append({"check": name, "status": "PASS" if ok else "FAIL", "detail": detail})

    m = CellModel.gaussian(0.972, 0.0, 0.982, 0.0)
    got = classical_hb(m, 1e4).p_err
    want = helstrom_pair_error(1e4, 0.972, 0.982)
    check("perfect-memory Helstrom reduction", abs(got - want) < 1e-12, f"{got:.12g}")

    taus, mu = np.array([0.1, 0.5, 0.9]), 1.5
    mix = GramMixture(np.array([0.2, 0.3, 0.5]), coherent_gram(taus, mu))
    dim = 40
    n = np.arange(dim)
    from scipy.special import gammaln
    amps = np.exp(-0.5 * mu * taus[:, None] + n * 0.5 * np.log(mu * taus[:, None]) - 0.5 * gammaln(n + 1))
    rho = (amps.T * mix.weights) @ amps
    lam = np.clip(np.linalg.eigvalsh(rho), 0, 1)
    lam = lam[lam > 0]
    fock = float(-np.sum(lam * np.log2(lam)))
    check("Gram entropy vs Fock diagonalization", abs(fock - mixture_entropy(mix)) < 1e-6, f"{fock:.9f}")
    lam_g = np.linalg.eigvalsh(mix.symmetrized())
    check("trace-power identity n=3", abs(np.sum(lam_g ** 3) - trace_power(mix, 3)) < 1e-10)

    d = CellModel.gaussian(0.6, 0.0, 0.6, 0.0)
    check("identical levels give no information",
          all(r.info_bits == 0.0 for r in (classical_pc(d, 5), quantum_pc(d, ProbeParams(5)))))
    s = CellModel.gaussian(0.5, 0.0, 0.9, 0.0)
    check("mean-value rule equals ML for perfect levels",
          classical_mv(s, 20).p_err == classical_pc(s, 20).p_err)
    return checks


# --- entry point -----------------------------------------------------------


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model and probe")
    g.add_argument("--tau0", help="mean transmittance of bit 0, or a range")
    g.add_argument("--sigma0", help="standard deviation of bit 0")
    g.add_argument("--tau1", help="mean transmittance of bit 1")
    g.add_argument("--sigma1", help="standard deviation of bit 1")
    g.add_argument("--mu", help="mean signal photons, or a range (log-spaced by default)")
    g.add_argument("--eta", help="overall efficiency in (0, 1]")
    g.add_argument("--modes", help="TMSV mode pairs, integer or 'inf' (default inf)")
    g.add_argument("--k", help=f"discretization points per level (default {DEFAULT_K})")
    g.add_argument("--n-sigma", dest="n_sigma", help="discretization half-window in sigmas")
    g.add_argument("--tol", help="capacity convergence tolerance in bits (default 1e-5)")
    g.add_argument("--strategies", help="comma list from CHB,CPC,CMV,QUANTUM,CHI")
    g.add_argument("--benchmark", help="gain benchmark: PC, HB or CHI")
    o = p.add_argument_group("output")
    o.add_argument("--out", help="output path (default stdout)")
    o.add_argument("--format", help="csv or json")
    o.add_argument("--jobs", help="worker processes (default: all cores)")
    o.add_argument("--config", help="flat key = value file; flags override it")
    o.add_argument("-v", "--verbose", action="store_true")
    return p


def make_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="qreadout", description="Readout of imperfect optical memory cells."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate one parameter point")
    sub.add_parser("sweep", parents=[common], help="sweep mu or tau0")
    sub.add_parser("gainmap", parents=[common], help="mu x tau0 quantum gain map")
    sub.add_parser("capacity", parents=[common], help="classical capacity vs mu")
    sub.add_parser("selftest", parents=[common], help="run quick oracle checks")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "selftest":
            checks = run_selftest()
            fmt = args.format or "csv"
            emit(render(checks, fmt), args.out)
            return EXIT_OK if all(c["status"] == "PASS" for c in checks) else EXIT_CONVERGENCE
        cfg = build_config(args)
        runner = {"eval": run_eval, "sweep": run_sweep, "gainmap": run_gainmap,
                  "capacity": run_capacity}[args.command]
        rows = runner(cfg)
        emit(render(rows, cfg.format), cfg.out)
    except ConfigError as exc:
        print(f"qreadout: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceededError, MassDeficitError) as exc:
        print(f"qreadout: computation budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ConvergenceError as exc:
        print(f"qreadout: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    unconverged = [r for r in rows if r.get("chi_converged") is False or r.get("converged") is False]
    if unconverged:
        print(f"qreadout: capacity did not converge at {len(unconverged)} point(s)", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
