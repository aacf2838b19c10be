"""Monte Carlo harness: objective means, log-log slopes and bound brackets."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from .density import Density, InvalidDensityError, g_alpha_integral, g_f_fraction, make_density, uniform
from .objectives import path_length, psi_objective
from .sampling import sample_points
from .schemes import ktsp_densest_cell, ktsp_sweep, psitrp_sweep
from .solvers import MAX_EXACT_PATH, MAX_EXACT_PSI, exact_k_tsp, exact_psi_trp

PROBLEMS = ("ktsp", "psitrp", "oracle_compare")
EXACT_KTSP_MAX_N = 10
EXACT_PSI_MAX_N = 9
RATIO_RTOL = 1e-9


class ConfigError(ValueError):
    pass


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    """``base_seed XOR blake2b(n, trial)``, as an unsigned 64-bit integer."""
    digest = hashlib.blake2b(f"{n}:{trial}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "little")) & ((1 << 64) - 1)


def tightened_lower_constant(alpha: float) -> float:
    """``1 / ((pi e)^(alpha/2) (alpha + 1))``."""
    return 1.0 / ((math.pi * math.e) ** (alpha / 2) * (alpha + 1))


def ktsp_rate_exponent(k: int) -> float:
    return 0.5 * (1 + 1 / (k - 1))


@dataclass
class ExperimentConfig:
    problem: str
    density: Density
    n_values: list[int]
    trials: int = 1
    base_seed: int = 0
    k: int | None = None
    rho: float | None = None
    alpha: float = 1.0
    a: float = 1.0
    m: int = 2
    order_source: str = "empirical"  # or "density"
    compare: str = "ktsp"  # oracle_compare target: ktsp | psitrp
    ktsp_solver: str = "densest_cell"  # or "sweep"
    exact: bool = True
    checks: dict[str, Any] = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        ns = [int(n) for n in self.n_values]
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_values must be a nonempty strictly increasing list")
        self.n_values = ns
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.alpha < 1:
            raise ConfigError("alpha must be >= 1")
        if self.order_source not in ("empirical", "density"):
            raise ConfigError("order_source must be 'empirical' or 'density'")
        if self.order_source == "density" and self.density.m != self.m:
            raise ConfigError(f"density resolution {self.density.m} != sweep resolution m={self.m}")
        if self.m < 1 or self.a <= 0:
            raise ConfigError("need m >= 1 and a > 0")
        needs_k = self.problem == "ktsp" or (self.problem == "oracle_compare" and self.compare == "ktsp")
        if needs_k:
            if (self.k is None) == (self.rho is None):
                raise ConfigError("give exactly one of k or rho")
            if self.k is not None and not 2 <= self.k <= min(ns):
                raise ConfigError("fixed k must satisfy 2 <= k <= min(n_values)")
            if self.rho is not None and not 0 < self.rho <= 1:
                raise ConfigError("rho must lie in (0, 1]")
        if self.problem in ("ktsp", "psitrp") and len(ns) < 3:
            raise ConfigError("rate experiments need at least 3 n_values")
        if self.problem == "oracle_compare":
            if self.compare not in ("ktsp", "psitrp"):
                raise ConfigError("compare must be 'ktsp' or 'psitrp'")
            if max(ns) > 10:
                raise ConfigError("oracle comparison needs every n <= 10")

    def k_for(self, n: int) -> int:
        if self.k is not None:
            return self.k
        return max(2, min(n, math.ceil(self.rho * n)))

    @property
    def order_arg(self):
        return self.density if self.order_source == "density" else "empirical"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["density"] = self.density.to_json()
        return out

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        obj = dict(obj)
        obj.pop("schema", None)
        dens = obj.pop("density", "uniform")
        try:
            if dens == "uniform":
                density = uniform(1)
            elif isinstance(dens, dict) and "file" in dens:
                path = Path(dens["file"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                density = Density.load(path)
            elif isinstance(dens, dict):
                density = make_density(dens["values"], dens["m"])
            else:
                raise ConfigError(f"unrecognised density entry {dens!r}")
        except (InvalidDensityError, KeyError, OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad density: {exc}") from exc
        known = set(cls.__dataclass_fields__) - {"density"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(density=density, **obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj, base_dir=path.parent)


@dataclass
class ExperimentReport:
    config: dict
    rows: list[dict]
    summary: dict

    @property
    def checks(self) -> dict:
        return self.summary.get("checks", {})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def per_n(self, key: str) -> list:
        return [entry[key] for entry in self.summary["per_n"]]

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "trials.csv", out / "summary.json"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "trial", "seed", "objective", "solver"])
            for r in self.rows:
                w.writerow([r["n"], r["trial"], r["seed"], repr(r["objective"]), r["solver"]])
        doc = {"schema": 1, "config": self.config, **self.summary}
        json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def fit_loglog(ns, means, level: float = 0.95) -> dict:
    """OLS slope of ``log(mean)`` on ``log(n)`` with a t-based confidence half-width."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(means, dtype=np.float64))
    if len(x) < 3:
        return {"slope": None, "intercept": None, "halfwidth": None, "points": len(x), "flag": "fewer than 3 points"}
    res = stats.linregress(x, y)
    dof = len(x) - 2
    half = float(stats.t.ppf(0.5 + level / 2, dof) * res.stderr)
    return {
        "slope": float(res.slope),
        "intercept": float(res.intercept),
        "halfwidth": half,
        "points": len(x),
        "flag": None,
    }


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


def _check(value, passed: bool, **threshold) -> dict:
    return {"value": value, "passed": bool(passed), **threshold}


# --- per-trial workers (top level so process pools can pickle them) ---


def _ktsp_trial(cfg: ExperimentConfig, n: int, trial: int) -> list[dict]:
    seed = trial_seed(cfg.base_seed, n, trial)
    s = sample_points(cfg.density, n, seed)
    k = cfg.k_for(n)
    if cfg.ktsp_solver == "sweep":
        tour, name = ktsp_sweep(s, k, cfg.m, cfg.order_arg), "sweep"
    else:
        tour, name = ktsp_densest_cell(s, k, cfg.a), "densest_cell"
    rows = [dict(n=n, trial=trial, seed=seed, objective=path_length(s, tour), solver=name)]
    if cfg.exact and n <= EXACT_KTSP_MAX_N:
        rows.append(dict(n=n, trial=trial, seed=seed, objective=path_length(s, exact_k_tsp(s, k)), solver="exact"))
    return rows


def _psitrp_trial(cfg: ExperimentConfig, n: int, trial: int) -> list[dict]:
    seed = trial_seed(cfg.base_seed, n, trial)
    s = sample_points(cfg.density, n, seed)
    tour = psitrp_sweep(s, cfg.m, cfg.order_arg)
    rows = [dict(n=n, trial=trial, seed=seed, objective=psi_objective(s, tour, cfg.alpha), solver="sweep")]
    if cfg.exact and n <= EXACT_PSI_MAX_N:
        opt = exact_psi_trp(s, cfg.alpha)
        rows.append(dict(n=n, trial=trial, seed=seed, objective=psi_objective(s, opt, cfg.alpha), solver="exact"))
    return rows


def _oracle_trial(cfg: ExperimentConfig, n: int, trial: int) -> list[dict]:
    seed = trial_seed(cfg.base_seed, n, trial)
    s = sample_points(cfg.density, n, seed)
    if cfg.compare == "ktsp":
        k = cfg.k_for(n)
        scheme = path_length(s, ktsp_densest_cell(s, k, cfg.a))
        exact = path_length(s, exact_k_tsp(s, k))
        name = "densest_cell"
    else:
        scheme = psi_objective(s, psitrp_sweep(s, cfg.m, cfg.order_arg), cfg.alpha)
        exact = psi_objective(s, exact_psi_trp(s, cfg.alpha), cfg.alpha)
        name = "sweep"
    return [
        dict(n=n, trial=trial, seed=seed, objective=scheme, solver=name),
        dict(n=n, trial=trial, seed=seed, objective=exact, solver="exact"),
    ]


def _run_trials(cfg: ExperimentConfig, worker) -> list[dict]:
    jobs = [(n, t) for n in cfg.n_values for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(worker, [cfg] * len(jobs), *zip(*jobs), chunksize=8))
    else:
        chunks = [worker(cfg, n, t) for n, t in jobs]
    return [row for chunk in chunks for row in chunk]


def _by_solver(rows, solver: str) -> dict[int, list[float]]:
    out: dict[int, list[float]] = {}
    for r in rows:
        if r["solver"] == solver:
            out.setdefault(r["n"], []).append(r["objective"])
    return out


def _paired(rows, scheme: str) -> list[tuple[dict, float, float]]:
    exact = {(r["n"], r["trial"]): r["objective"] for r in rows if r["solver"] == "exact"}
    return [(r, r["objective"], exact[(r["n"], r["trial"])]) for r in rows if r["solver"] == scheme and (r["n"], r["trial"]) in exact]


def _dominance_check(rows, scheme: str) -> dict | None:
    pairs = _paired(rows, scheme)
    if not pairs:
        return None
    violations = sum(1 for _, sch, ex in pairs if sch < ex * (1 - RATIO_RTOL))
    return _check(violations, violations == 0, trials=len(pairs))


def run_ktsp_rate(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.problem != "ktsp":
        raise ConfigError("run_ktsp_rate needs problem='ktsp'")
    rows = _run_trials(cfg, _ktsp_trial)
    scheme = "sweep" if cfg.ktsp_solver == "sweep" else "densest_cell"
    by_n = _by_solver(rows, scheme)
    exact_by_n = _by_solver(rows, "exact")
    d = cfg.density
    area, fmax = d.support_area, d.max_value
    per_n = []
    for n in cfg.n_values:
        mean, se = _mean_se(by_n[n])
        k = cfg.k_for(n)
        entry = {"n": n, "k": k, "mean": mean, "stderr": se}
        if cfg.k is not None:
            e = ktsp_rate_exponent(k)
            entry["normalized"] = mean * (fmax * n) ** e / (k - 1) * area ** (1 / (2 * (k - 1)))
        else:
            _, gf = g_f_fraction(d, k / n)
            entry["g_f"] = gf
            entry["ratio_sqrt_n_gf"] = mean / (math.sqrt(n) * gf)
        if n in exact_by_n:
            entry["exact_mean"], entry["exact_stderr"] = _mean_se(exact_by_n[n])
        per_n.append(entry)
    fit = fit_loglog(cfg.n_values, [e["mean"] for e in per_n])
    predicted = -ktsp_rate_exponent(cfg.k) if cfg.k is not None else 0.5
    summary = {
        "problem": "ktsp",
        "solver": scheme,
        "per_n": per_n,
        "fit": fit,
        "predicted_exponent": predicted,
        "references": {"max_density": fmax, "support_area": area},
    }
    checks = {}
    if "slope" in cfg.checks and fit["slope"] is not None:
        lo, hi = cfg.checks["slope"]
        checks["slope"] = _check(fit["slope"], lo <= fit["slope"] <= hi, low=lo, high=hi)
    if cfg.checks.get("exact_dominance"):
        dom = _dominance_check(rows, scheme)
        if dom is not None:
            checks["exact_dominance"] = dom
    summary["checks"] = checks
    return ExperimentReport(cfg.to_dict(), rows, summary)


def relative_variation(values) -> float:
    """``(max - min) / min`` of a positive sequence."""
    v = np.asarray(values, dtype=np.float64)
    return float((v.max() - v.min()) / v.min())


def run_psitrp_rate(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.problem != "psitrp":
        raise ConfigError("run_psitrp_rate needs problem='psitrp'")
    rows = _run_trials(cfg, _psitrp_trial)
    alpha = cfg.alpha
    by_n = _by_solver(rows, "sweep")
    exact_by_n = _by_solver(rows, "exact")
    g_int = g_alpha_integral(cfg.density, alpha)
    c_low = tightened_lower_constant(alpha)
    floor = c_low * g_int
    per_n = []
    for n in cfg.n_values:
        mean, se = _mean_se(by_n[n])
        entry = {"n": n, "mean": mean, "stderr": se, "ratio": mean / n ** (1 + alpha / 2)}
        if n in exact_by_n:
            entry["exact_mean"], entry["exact_stderr"] = _mean_se(exact_by_n[n])
        per_n.append(entry)
    ratios = [e["ratio"] for e in per_n]
    variation = relative_variation(ratios[-3:])
    summary = {
        "problem": "psitrp",
        "solver": "sweep",
        "per_n": per_n,
        "fit": fit_loglog(cfg.n_values, [e["mean"] for e in per_n]),
        "predicted_exponent": 1 + alpha / 2,
        "references": {"g_alpha_integral": g_int, "lower_constant": c_low, "ratio_floor": floor},
        "ratio_relative_variation": variation,
    }
    checks = {}
    if cfg.checks.get("floor"):
        checks["floor"] = _check(min(ratios), min(ratios) >= floor, threshold=floor)
    if "max_relative_variation" in cfg.checks:
        limit = cfg.checks["max_relative_variation"]
        checks["relative_variation"] = _check(variation, variation < limit, threshold=limit)
    if cfg.checks.get("exact_dominance"):
        dom = _dominance_check(rows, "sweep")
        if dom is not None:
            checks["exact_dominance"] = dom
    summary["checks"] = checks
    return ExperimentReport(cfg.to_dict(), rows, summary)


def run_oracle_comparison(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.problem != "oracle_compare":
        raise ConfigError("run_oracle_comparison needs problem='oracle_compare'")
    limit = MAX_EXACT_PATH if cfg.compare == "ktsp" else MAX_EXACT_PSI
    if max(cfg.n_values) > limit:
        raise ConfigError(f"n too large for the exact oracle (limit {limit})")
    rows = _run_trials(cfg, _oracle_trial)
    scheme = "densest_cell" if cfg.compare == "ktsp" else "sweep"
    ratios = []
    for r, sch, ex in _paired(rows, scheme):
        ratio = 1.0 if sch == ex else (sch / ex if ex > 0 else math.inf)
        r["ratio"] = ratio
        ratios.append(ratio)
    arr = np.asarray(ratios)
    summary = {
        "problem": "oracle_compare",
        "compare": cfg.compare,
        "solver": scheme,
        "per_n": [
            {"n": n, "ratios": [r["ratio"] for r in rows if r["n"] == n and "ratio" in r]} for n in cfg.n_values
        ],
        "ratio_min": float(arr.min()),
        "ratio_median": float(np.median(arr)),
        "ratio_max": float(arr.max()),
    }
    checks = {}
    if cfg.checks.get("ratio_at_least_one"):
        bad = int(np.sum(arr < 1 - RATIO_RTOL))
        checks["ratio_at_least_one"] = _check(bad, bad == 0, trials=len(arr))
    summary["checks"] = checks
    rows = [{k: v for k, v in r.items() if k != "ratio"} for r in rows]
    return ExperimentReport(cfg.to_dict(), rows, summary)


def run(cfg: ExperimentConfig) -> ExperimentReport:
    return {"ktsp": run_ktsp_rate, "psitrp": run_psitrp_rate, "oracle_compare": run_oracle_comparison}[cfg.problem](cfg)
