"""Experiment configs, per-seed CSV output and the aggregate summary."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..geometry import Geometry, Regularizer
from ..mdp import Mdp, check_distribution, optimal_value
from ..planners import PlannerConfig, exact_trpo, uniform_trpo
from ..sample_trpo import LearnerConfig, concentrability, sample_based_trpo
from ..sampler import RestartModel
from .generators import generate_chain, generate_garnet
from .rates import DegenerateFitError, fit_rate

CSV_COLUMNS = ["run_id", "seed", "k", "t_k", "M_k", "T", "linf_gap", "mu_gap", "best_gap",
               "wall_ms"]
ALGORITHMS = ("uniform", "exact", "sample")
DEFAULT_METRIC = {"uniform": "linf_gap", "exact": "mu_gap", "sample": "best_gap"}


# knobs that change where or how fast a run happens but never its results
_EXECUTION_ONLY = ("output", "timing", "workers", "seed_workers")


class ConfigError(ValueError):
    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field = field_name


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run; serializes to and from JSON.

    ``mdp`` is one of ``{"file": path}``, ``{"inline": <mdp json>}`` or
    ``{"generator": {"kind": "garnet" | "chain", ...}}``. Distributions
    ``mu``/``nu`` are ``"uniform"``, ``{"point": s}`` or an explicit list.
    """

    mdp: dict
    algorithm: str = "uniform"
    geometry: str = "euclidean"
    lam: float = 0.0
    schedule: str | None = None
    fixed_step: float | None = None
    n_iterations: int = 100
    seeds: list[int] = field(default_factory=lambda: [0])
    mu: object = None
    nu: object = None
    output: str = "out"
    vary_mdp_with_seed: bool = False
    support_epsilon: float = 0.0
    check_invariants: bool = False
    epsilon: float = 0.1
    delta: float = 0.1
    m_override: int | None = None
    horizon_override: int | None = None
    m_variant: str = "appendix"
    workers: int = 1
    seed_workers: int = 1
    rate_window: list[int] | None = None
    metric: str | None = None
    timing: bool = False
    trajectory_log: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}", unknown[0])
        if "mdp" not in data:
            raise ConfigError("config needs an 'mdp' source", "mdp")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}", "config")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}", "algorithm")
        try:
            Geometry.parse(self.geometry)
            Regularizer(self.geometry, float(self.lam))
        except ValueError as exc:
            raise ConfigError(str(exc), "geometry") from None
        if int(self.n_iterations) < 0:
            raise ConfigError("n_iterations must be >= 0", "n_iterations")
        if not self.seeds:
            raise ConfigError("need at least one seed", "seeds")
        if self.algorithm == "sample" and self.nu is None:
            self.nu = "uniform"
        if self.algorithm == "exact" and self.nu is None:
            raise ConfigError("exact TRPO needs nu", "nu")
        if self.metric is not None and self.metric not in ("linf_gap", "mu_gap", "best_gap"):
            raise ConfigError("metric must be linf_gap, mu_gap or best_gap", "metric")
        src = self.mdp
        if not isinstance(src, dict) or len(src) != 1:
            raise ConfigError("mdp must have exactly one of file, inline, generator", "mdp")
        if "file" in src and not Path(src["file"]).exists():
            raise ConfigError(f"mdp file not found: {src['file']}", "mdp.file")
        if "generator" in src:
            _check_generator(src["generator"])
        elif not {"file", "inline"} & set(src):
            raise ConfigError("mdp must have exactly one of file, inline, generator", "mdp")

    def config_hash(self) -> str:
        data = {k: v for k, v in self.to_dict().items() if k not in _EXECUTION_ONLY}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_GARNET_KEYS = {"kind", "n_states", "n_actions", "branching", "cost_seed", "transition_seed",
                "gamma", "c_max"}
_CHAIN_KEYS = {"kind", "n_states", "slip", "gamma"}


def _check_generator(spec: dict):
    kind = spec.get("kind")
    if kind == "garnet":
        allowed, required = _GARNET_KEYS, {"n_states", "n_actions", "branching"}
    elif kind == "chain":
        allowed, required = _CHAIN_KEYS, {"n_states"}
    else:
        raise ConfigError(f"unknown generator kind {kind!r}", "mdp.generator.kind")
    extra = set(spec) - allowed
    if extra:
        raise ConfigError(f"unknown generator keys {sorted(extra)}", "mdp.generator")
    missing = required - set(spec)
    if missing:
        raise ConfigError(f"generator missing {sorted(missing)}", "mdp.generator")
    if kind == "garnet" and not 1 <= spec["branching"] <= spec["n_states"]:
        raise ConfigError("branching must lie in [1, n_states]", "mdp.generator.branching")
    if kind == "chain" and not 0 <= spec.get("slip", 0.0) < 1:
        raise ConfigError("slip must lie in [0, 1)", "mdp.generator.slip")


def build_mdp(source: dict, seed: int = 0, vary: bool = False) -> Mdp:
    if "file" in source:
        return Mdp.load(source["file"])
    if "inline" in source:
        return Mdp.from_dict(source["inline"])
    spec = dict(source["generator"])
    kind = spec.pop("kind")
    if kind == "chain":
        return generate_chain(spec["n_states"], spec.get("slip", 0.0), spec.get("gamma", 0.9))
    offset = seed if vary else 0
    return generate_garnet(spec["n_states"], spec["n_actions"], spec["branching"],
                           spec.get("cost_seed", 0) + offset,
                           spec.get("transition_seed", 1) + offset,
                           spec.get("gamma", 0.9), spec.get("c_max", 1.0))


def build_distribution(spec, n_states: int, name: str):
    if spec is None:
        return None
    if spec == "uniform":
        return np.full(n_states, 1.0 / n_states)
    if isinstance(spec, dict) and "point" in spec:
        d = np.zeros(n_states)
        d[int(spec["point"])] = 1.0
        return d
    try:
        return check_distribution(spec, n_states, name)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}", name) from None


# ------------------------------------------------------------------ CSV

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])


_INT_COLUMNS = {"seed", "k", "M_k", "T"}


def read_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for c in CSV_COLUMNS:
                v = rec[c]
                if c == "run_id":
                    row[c] = v
                elif v == "":
                    row[c] = None
                elif c in _INT_COLUMNS:
                    row[c] = int(v)
                else:
                    row[c] = float(v)
            out.append(row)
    return out


# ------------------------------------------------------------------ runs

@dataclass
class SeedRun:
    seed: int
    rows: list[dict]
    concentrability: float | None


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedRun:
    mdp = build_mdp(cfg.mdp, seed, cfg.vary_mdp_with_seed)
    reg = Regularizer(cfg.geometry, float(cfg.lam))
    S = mdp.n_states
    mu = build_distribution(cfg.mu, S, "mu")
    nu = build_distribution(cfg.nu, S, "nu")
    run_id = f"{cfg.config_hash()[:12]}-{seed}"
    start = time.perf_counter()
    rows = []

    if cfg.algorithm == "sample":
        out = Path(cfg.output)
        lcfg = LearnerConfig(cfg.epsilon, cfg.delta, cfg.n_iterations, reg, cfg.schedule,
                             cfg.fixed_step, cfg.m_override, cfg.horizon_override, cfg.m_variant,
                             mu, cfg.workers,
                             str(out / f"trajectories_{seed}.bin") if cfg.trajectory_log else None)
        report = sample_based_trpo(RestartModel(mdp, nu, seed), lcfg)
        for r in report.records:
            rows.append({"k": r.k, "t_k": r.t_k, "M_k": r.m_k, "T": r.horizon,
                         "linf_gap": r.linf_gap, "mu_gap": r.mu_gap, "best_gap": r.best_gap})
    else:
        pcfg = PlannerConfig(cfg.n_iterations, reg, cfg.schedule, cfg.fixed_step,
                             cfg.check_invariants, nu, mu, cfg.support_epsilon)
        result = (uniform_trpo if cfg.algorithm == "uniform" else exact_trpo)(mdp, pcfg)
        for r in result.records:
            rows.append({"k": r.k, "t_k": r.t_k, "linf_gap": r.linf_gap, "mu_gap": r.mu_gap})
    elapsed_ms = (time.perf_counter() - start) * 1e3
    for row in rows:
        row["run_id"] = run_id
        row["seed"] = seed
        if cfg.timing:
            row["wall_ms"] = elapsed_ms / max(len(rows), 1)

    conc = None
    mu_eval = mu if mu is not None else nu
    if nu is not None and mu_eval is not None:
        _, pi_star = optimal_value(mdp, reg)
        conc = concentrability(mdp, mu_eval, nu, pi_star)
    return SeedRun(seed, rows, conc)


def summarize(cfg: ExperimentConfig, runs: list[SeedRun]) -> dict:
    metric = cfg.metric or DEFAULT_METRIC[cfg.algorithm]
    by_k: dict[int, list[float]] = {}
    for run in runs:
        for row in run.rows:
            if row.get(metric) is not None:
                by_k.setdefault(row["k"], []).append(row[metric])
    ks = sorted(by_k)
    stats = [{"k": k, "mean": float(np.mean(by_k[k])), "std": float(np.std(by_k[k])),
              "n": len(by_k[k])} for k in ks]

    rate = None
    if ks:
        window = cfg.rate_window or [max(1, ks[-1] // 100), ks[-1]]
        try:
            rate = fit_rate([s["mean"] for s in stats], tuple(window), ks=ks).to_dict()
            rate["window"] = list(window)
            rate["metric"] = metric
        except (DegenerateFitError, ValueError) as exc:
            rate = {"error": str(exc), "window": list(window), "metric": metric}

    concs = [r.concentrability for r in runs if r.concentrability is not None]
    conc = None
    if concs:
        worst = max(concs)
        conc = {"per_seed": [_json_float(c) for c in concs], "max": _json_float(worst),
                "finite": math.isfinite(worst)}
    return {
        "config_hash": cfg.config_hash(),
        "per_k_stats": stats,
        "rate_fit": rate,
        "concentrability": conc,
        "versions": {"adatrpo": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "kernel": kernels.BACKEND},
    }


def _json_float(x: float):
    return x if math.isfinite(x) else "inf"


@dataclass
class ExperimentResult:
    csv_paths: list[Path]
    summary_path: Path
    summary: dict


def execute(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed, write ``run_<seed>.csv`` files and ``summary.json``."""
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in cfg.seeds]
    if cfg.seed_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.seed_workers) as pool:
            runs = list(pool.map(lambda s: run_seed(cfg, s), seeds))
    else:
        runs = [run_seed(cfg, s) for s in seeds]
    paths = []
    for run in runs:
        p = out / f"run_{run.seed}.csv"
        write_csv(p, run.rows)
        paths.append(p)
    summary = summarize(cfg, runs)
    sp = out / "summary.json"
    sp.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(paths, sp, summary)


def error_payload(exc: BaseException) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    where = getattr(exc, "field", None) or getattr(exc, "path", None)
    if where:
        payload["field"] = where
    return payload


def run_experiment(cfg: ExperimentConfig | dict) -> int:
    """Exit-code wrapper around ``execute``; failures print an error JSON to stderr."""
    try:
        if isinstance(cfg, dict):
            cfg = ExperimentConfig.from_dict(cfg)
        execute(cfg)
    except Exception as exc:  # every failure becomes a machine-readable report
        print(json.dumps(error_payload(exc)), file=sys.stderr)
        return 1
    return 0
