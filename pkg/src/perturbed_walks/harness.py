"""Goodness-of-fit statistics and experiment orchestration.

Every experiment is a pure function of its :class:`ExperimentConfig`: replicate
``r`` of batch ``b`` always reads ``RngStream(seed, b * replicates + r)``, and
results are reduced in replicate order, so reports do not depend on the
number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import kstwobign

from . import __version__
from .analytics import InsufficientResolutionError, excursion_count_local_time, jump_count_local_time
from .chains import ChainKind, coupled_chain_values, lambda_sup_deviation, overshoot_below_zero, run_equivalent_model
from .limit_process import build_limit_path, sample_marginal
from .sampling import RngStream, eta_family_from_dict, xi_family_from_dict

__all__ = [
    "P_VALUE_FLOOR",
    "KSResult",
    "ks_one_sample",
    "ks_two_sample",
    "ks_critical_value",
    "LaplaceCheck",
    "laplace_transform_check",
    "ConfigError",
    "ExperimentConfig",
    "Check",
    "ExperimentReport",
    "run_convergence_study",
    "run_localtime_study",
    "run_overshoot_ratio_study",
    "run_lambda_study",
    "run_experiment",
]

P_VALUE_FLOOR = 1e-4
SCHEMA_VERSION = 1


# ------------------------------------------------------------- statistics


@dataclass(frozen=True)
class KSResult:
    distance: float
    p_value: float
    n: int
    m: int | None = None


def _kolmogorov_p(d: float, n_eff: float) -> float:
    return max(float(kstwobign.sf(math.sqrt(n_eff) * d)), P_VALUE_FLOOR)


def ks_one_sample(samples, cdf: Callable) -> KSResult:
    """Exact D_n = sup |F_n - F| for continuous F, with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 1:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KSResult(d, _kolmogorov_p(d, n), n)


def ks_two_sample(a, b) -> KSResult:
    """sup |F_a - F_b| over the pooled sample; p-value with n m / (n + m)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n, m = len(a), len(b)
    if n < 1 or m < 1:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / n
    fb = np.searchsorted(b, pooled, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    return KSResult(d, _kolmogorov_p(d, n * m / (n + m)), n, m)


def ks_critical_value(level: float, n: int, m: int | None = None) -> float:
    """Asymptotic KS critical value at significance ``level``."""
    n_eff = n if m is None else n * m / (n + m)
    return float(kstwobign.isf(level)) / math.sqrt(n_eff)


@dataclass(frozen=True)
class LaplaceCheck:
    z: float
    estimate: float
    se: float
    target: float
    z_score: float


def laplace_transform_check(samples, z_grid: Sequence[float], target: Callable) -> list[LaplaceCheck]:
    """Empirical E exp(-z S) with its standard error and z-score against target(z)."""
    x = np.asarray(samples, dtype=float).ravel()
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative")
    out = []
    for z in z_grid:
        e = np.exp(-z * x)
        est = float(e.mean())
        se = float(e.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        tgt = float(target(z))
        if se > 0:
            score = (est - tgt) / se
        else:
            score = 0.0 if math.isclose(est, tgt, rel_tol=1e-12, abs_tol=1e-15) else math.copysign(math.inf, est - tgt)
        out.append(LaplaceCheck(float(z), est, se, tgt, score))
    return out


# ------------------------------------------------------------ configuration


class ConfigError(ValueError):
    pass


_KINDS = ("convergence", "localtime", "overshoot_ratio", "lambda")


@dataclass
class ExperimentConfig:
    """Parameters of one experiment; see docs/formats.md for the JSON schema."""

    experiment: str = "convergence"
    alpha: float = 0.5
    xi: dict = field(default_factory=lambda: {"family": "rademacher"})
    eta: dict = field(default_factory=lambda: {"family": "pareto", "alpha": 0.5, "xmin": 1.0})
    v: list = field(default_factory=lambda: [1e3, 1e4, 1e5])
    t: list = field(default_factory=lambda: [1.0])
    replicates: int = 1000
    batches: int = 1
    kinds: list = field(default_factory=lambda: ["tilde", "hat", "grave"])
    x: float = 0.0
    dt: float = 2.0**-14
    delta: float = 1e-4
    T: float = 1.0
    eps: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    n: list = field(default_factory=lambda: [1000, 10000, 100000])
    seed: int = 0
    out: str = "out"
    thresholds: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.experiment not in _KINDS:
            raise ConfigError(f"experiment must be one of {_KINDS}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        try:
            xi, eta = self.xi_family(), self.eta_family()
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad family: {err}") from None
        if getattr(eta, "alpha", self.alpha) != self.alpha:
            raise ConfigError("eta tail index must equal alpha")
        del xi
        if self.replicates < 1 or self.batches < 1:
            raise ConfigError("replicates and batches must be >= 1")
        if any(v < 1 for v in self.v):
            raise ConfigError("every v must be >= 1")
        if any(t < 0 for t in self.t):
            raise ConfigError("times must be nonnegative")
        if self.x < 0:
            raise ConfigError("x must be nonnegative")
        try:
            [ChainKind.parse(k) for k in self.kinds]
        except KeyError as err:
            raise ConfigError(f"unknown chain kind {err}") from None
        if not (self.dt > 0 and self.delta > 0 and self.T > 0):
            raise ConfigError("dt, delta and T must be positive")
        if any(e <= 0 for e in self.eps) or any(int(n) < 1 for n in self.n):
            raise ConfigError("eps must be positive and n >= 1")

    def xi_family(self):
        return xi_family_from_dict(self.xi)

    def eta_family(self):
        return eta_family_from_dict(self.eta)

    def threshold(self, name: str, default: float) -> float:
        return float(self.thresholds.get(name, default))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, **overrides)


# ---------------------------------------------------------------- reports


@dataclass
class Check:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    """Rows of per-cell statistics plus named pass/fail checks."""

    experiment: str
    config: dict
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_check(self, name, statistic, threshold, passed, detail="") -> Check:
        c = Check(name, float(statistic), float(threshold), bool(passed), detail)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "experiment": self.experiment, "config": self.config,
                "rows": self.rows, "checks": [asdict(c) for c in self.checks], "passed": self.passed}

    def write(self, out_dir, stem: str | None = None) -> dict:
        """Write <stem>.json, <stem>.csv and the <stem>.meta.json sidecar; return the paths.

        The JSON and CSV files depend only on the config; timings live in the sidecar.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment
        paths = {"json": out / f"{stem}.json", "csv": out / f"{stem}.csv", "meta": out / f"{stem}.meta.json"}
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        cols = list(self.rows[0]) if self.rows else []
        with open(paths["csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in cols])
        paths["meta"].write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        return paths


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _meta(cfg: ExperimentConfig, started: float, threads: int) -> dict:
    return {"seed": cfg.seed, "version": __version__, "wall_time_s": round(time.time() - started, 3),
            "threads": threads, "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")}


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("PERTURBED_WALKS_THREADS", 0)) or os.cpu_count() or 1
    return max(1, int(threads))


def _map_ordered(fn, items, threads: int) -> list:
    """fn over items, results in item order regardless of scheduling."""
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _median(xs) -> float:
    return float(np.median(np.asarray(xs, dtype=float)))


# ---------------------------------------------------------------- studies


def run_convergence_study(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Two-sample KS between scaled chain marginals and exact limit marginals.

    For each batch, v and t the three chains are run on shared draws, started
    at x sigma sqrt(v), and compared with draws of X(t) started at x.  Every
    replicate also checks max|Hat - Tilde| <= max|xi|.
    """
    started = time.time()
    nthreads = _threads(threads)
    xi_f, eta_f = cfg.xi_family(), cfg.eta_family()
    kinds = [ChainKind.parse(k) for k in cfg.kinds]
    ts = np.asarray(cfg.t, dtype=float)
    report = ExperimentReport("convergence", cfg.to_dict())
    ks_table: dict = {}
    bound_violations = 0
    for b in range(cfg.batches):
        for iv, v in enumerate(cfg.v):
            norm = xi_f.sigma * math.sqrt(v)
            idx = np.floor(ts * v + 1e-9).astype(np.int64)
            n_steps = max(int(idx.max()), 1)

            def replicate(r, v=v, iv=iv, idx=idx, n_steps=n_steps, norm=norm):
                g = RngStream(cfg.seed, b * cfg.replicates + r).child(iv).generator()
                xi = xi_f.sample(g, n_steps)
                eta = eta_f.sample(g, n_steps)
                c = coupled_chain_values(xi, eta, idx, x0=cfg.x * norm)
                return c.values / norm, c.hat_tilde_gap <= c.max_abs_xi

            results = _map_ordered(replicate, range(cfg.replicates), nthreads)
            bound_violations += sum(not ok for _, ok in results)
            chain = np.stack([vals for vals, _ in results])  # (replicates, 3, len(ts))
            for it, t in enumerate(ts):
                lim_stream = RngStream(cfg.seed, 2**40 + b).child(iv * len(ts) + it)
                if t == 0:
                    limit = np.full(cfg.replicates, cfg.x)
                else:
                    limit = sample_marginal(cfg.alpha, cfg.x, t, cfg.replicates, lim_stream)
                for kind in kinds:
                    sample = chain[:, int(kind), it]
                    ks = ks_two_sample(sample, limit)
                    ks_table[(kind.name.lower(), v, float(t), b)] = ks.distance
                    report.rows.append({
                        "kind": kind.name.lower(), "v": float(v), "t": float(t), "batch": b,
                        "ks": ks.distance, "p_value": ks.p_value, "n_chain": ks.n, "n_limit": ks.m,
                        "mean_chain": float(sample.mean()), "se_chain": float(sample.std(ddof=1) / math.sqrt(ks.n)),
                        "mean_limit": float(limit.mean()), "se_limit": float(limit.std(ddof=1) / math.sqrt(ks.m)),
                        "seed": cfg.seed})

    ks_max = cfg.threshold("ks_max", 0.05)
    v_lo, v_hi = min(cfg.v), max(cfg.v)
    for kind in kinds:
        for t in ts:
            if t == 0:
                continue
            name = kind.name.lower()
            lo = _median([ks_table[(name, v_lo, float(t), b)] for b in range(cfg.batches)])
            hi = _median([ks_table[(name, v_hi, float(t), b)] for b in range(cfg.batches)])
            if v_hi > v_lo:
                report.add_check(f"trend[{name},t={t:g}]", hi, lo, hi < lo,
                                 f"median KS {lo:.4f} at v={v_lo:g} -> {hi:.4f} at v={v_hi:g}")
            report.add_check(f"ks_at_vmax[{name},t={t:g}]", hi, ks_max, hi < ks_max)
    report.add_check("hat_tilde_bound", bound_violations, 0, bound_violations == 0,
                     f"{bound_violations} replicate(s) with max|Hat-Tilde| > max|xi|")
    report.meta = _meta(cfg, started, nthreads)
    return report


def run_localtime_study(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Jump-count and excursion-count estimates against the exact L(T), one row per path."""
    started = time.time()
    nthreads = _threads(threads)
    eps = sorted(cfg.eps, reverse=True)

    def one(r):
        path = build_limit_path(cfg.x, cfg.T, cfg.dt, cfg.alpha, RngStream(cfg.seed, r),
                                mode="jumps", delta=cfg.delta)
        row = {"path": r, "L": float(path.L[-1])}
        for e in eps:
            row[f"jump_{e:g}"] = jump_count_local_time(path, e)
        try:
            row[f"excursion_{eps[-1]:g}"] = excursion_count_local_time(path, eps[-1])
        except InsufficientResolutionError:
            row[f"excursion_{eps[-1]:g}"] = float("nan")
        return row

    rows = _map_ordered(one, range(cfg.replicates), nthreads)
    report = ExperimentReport("localtime", cfg.to_dict(), rows)
    L = np.array([r["L"] for r in rows])
    pos = L > 0
    err = np.array([[abs(r[f"jump_{e:g}"] - r["L"]) / r["L"] if r["L"] > 0 else 0.0 for e in eps] for r in rows])
    smallest = err[:, -1]
    frac = float(np.mean(smallest[pos] <= cfg.threshold("jump_rel_tol", 0.15))) if pos.any() else 1.0
    report.add_check("jump_count_within_tol", frac, cfg.threshold("jump_frac", 0.8),
                     frac >= cfg.threshold("jump_frac", 0.8), f"eps={eps[-1]:g}")
    decreasing = np.all(np.diff(err, axis=1) < 0, axis=1) if len(eps) > 1 else np.ones(len(rows), bool)
    frac_dec = float(np.mean(decreasing[pos])) if pos.any() else 1.0
    report.add_check("jump_error_decreasing", frac_dec, cfg.threshold("trend_frac", 0.8),
                     frac_dec >= cfg.threshold("trend_frac", 0.8), f"eps={eps}")
    exc = np.array([r[f"excursion_{eps[-1]:g}"] for r in rows])
    ok = np.abs(exc[pos] - L[pos]) / L[pos] <= cfg.threshold("excursion_rel_tol", 0.25)
    frac_exc = float(np.mean(ok)) if pos.any() else 1.0
    report.add_check("excursion_count_within_tol", frac_exc, cfg.threshold("excursion_frac", 0.7),
                     frac_exc >= cfg.threshold("excursion_frac", 0.7), f"eps={eps[-1]:g}")
    report.meta = _meta(cfg, started, nthreads)
    return report


def run_overshoot_ratio_study(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Fraction of replicates with |S_zeta(n)/S_eta(n) - 1| > tol, for each n.

    zeta_k = eta_k + gamma_k, where gamma_k is the undershoot of the xi-walk
    started from eta_k when it first enters (-inf, 0].
    """
    started = time.time()
    nthreads = _threads(threads)
    xi_f, eta_f = cfg.xi_family(), cfg.eta_family()
    tol = cfg.threshold("ratio_tol", 0.2)
    report = ExperimentReport("overshoot_ratio", cfg.to_dict())
    fracs = []
    for i_n, n in enumerate(int(n) for n in cfg.n):
        def one(r, n=n, i_n=i_n):
            g = RngStream(cfg.seed, r).child(i_n).generator()
            eta = eta_f.sample(g, n)
            gamma = overshoot_below_zero(xi_f, eta, g)
            return float(np.sum(eta + gamma) / np.sum(eta))

        ratios = np.array(_map_ordered(one, range(cfg.replicates), nthreads))
        frac = float(np.mean(np.abs(ratios - 1) > tol))
        fracs.append(frac)
        report.rows.append({"n": n, "replicates": cfg.replicates, "fraction_exceeding": frac,
                            "median_ratio": float(np.median(ratios)), "tol": tol, "seed": cfg.seed})
    report.add_check("fraction_decreasing", fracs[-1], fracs[0], fracs[-1] < fracs[0],
                     f"fractions {fracs} across n={list(cfg.n)}")
    report.meta = _meta(cfg, started, nthreads)
    return report


def run_lambda_study(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """sup_{t<=T} |lambda(floor(v t))/v - t| across v, one nested draw sequence per seed."""
    started = time.time()
    nthreads = _threads(threads)
    xi_f, eta_f = cfg.xi_family(), cfg.eta_family()
    vs = sorted(cfg.v)
    n = int(math.ceil(vs[-1] * cfg.T)) + 1

    def one(r):
        g = RngStream(cfg.seed, r).generator()
        xi = xi_f.sample(g, n)
        eta = eta_f.sample(g, n + 1)
        model = run_equivalent_model(xi, eta, n)
        return [lambda_sup_deviation(model, v, cfg.T) for v in vs]

    devs = _map_ordered(one, range(cfg.replicates), nthreads)
    report = ExperimentReport("lambda", cfg.to_dict())
    monotone = 0
    for r, d in enumerate(devs):
        report.rows.append({"replicate": r, **{f"v={v:g}": x for v, x in zip(vs, d)}})
        monotone += all(a > b for a, b in zip(d, d[1:]))
    report.add_check("deviation_decreasing_per_seed", monotone, len(devs), monotone == len(devs),
                     f"{monotone}/{len(devs)} seeds strictly decreasing across v={vs}")
    report.meta = _meta(cfg, started, nthreads)
    return report


_RUNNERS = {"convergence": run_convergence_study, "localtime": run_localtime_study,
            "overshoot_ratio": run_overshoot_ratio_study, "lambda": run_lambda_study}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    return _RUNNERS[cfg.experiment](cfg, threads)
