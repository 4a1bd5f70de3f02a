"""Seeded experiment drivers with CSV/JSON output.

Every experiment is a grid of independent cells (parameter tuple x n x run).
Each cell draws from its own stream ``trial_rng(seed, experiment, *indices)``,
so the table is identical whether cells run inline or in a process pool.
Rows are written in grid order by a single writer; wall times sit in their
own column so that the value columns can be compared byte for byte.

Experiments:

* ``convergence`` -- IPRW / PRW (and optionally W_2) between two hypercube
  samples as ``n`` grows.
* ``consistency`` -- MPRW / MEPRW Gaussian fits on mixture data, error to a
  large-sample reference fit.
* ``meprw-vs-mprw`` -- squared distance between MEPRW and MPRW fits on the
  same data as the number of model samples grows.
* ``clt`` -- spread of the MPRW variance estimate, raw and rescaled by
  ``sqrt(n)``, with a Gaussian KDE of the rescaled values.
* ``ecs-consistency`` -- MEPRW fits of an ECS location model on mixture data.
"""

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy

from .distances import RsganConfig, iprw, prw2_rsgan
from .exact_ot import wasserstein_p
from .exceptions import InvalidInputError
from .mde import FitConfig, fit_meprw_ecs, fit_meprw_gaussian, fit_mprw_gaussian
from .measures import (
    MixtureSpec,
    make_empirical,
    sample_gaussian_mixture,
    sample_hypercube,
    trial_rng,
)

__version__ = "0.1.0"

CSV_HEADER = ("experiment", "params", "n", "run", "metric", "value", "wall_time_s")
EXPERIMENTS = ("convergence", "consistency", "meprw-vs-mprw", "clt", "ecs-consistency")
_EXPERIMENT_CODE = {name: i for i, name in enumerate(EXPERIMENTS)}
_REFERENCE_STREAM = 10**6

DEFAULT_N_GRID = {
    "convergence": [20, 100, 250, 500, 1000],
    "consistency": [500, 2000, 10000],
    "meprw-vs-mprw": [2000],
    "clt": [100, 500, 1000],
    "ecs-consistency": [500, 2000],
}
DEFAULT_RUNS = {"clt": 50}


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment; keys mirror the JSON config."""

    experiment: str = "convergence"
    dv_pairs: List[Tuple[int, float]] = field(default_factory=lambda: [(10, 1.0)])
    n_grid: Optional[List[int]] = None
    k: List[int] = field(default_factory=lambda: [2])
    runs: Optional[int] = None
    metrics: List[str] = field(default_factory=lambda: ["iprw", "prw"])
    n_proj: int = 100
    rsgan: RsganConfig = field(default_factory=RsganConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    mixture_kind: int = 8
    estimators: List[str] = field(default_factory=lambda: ["mprw", "meprw"])
    m_grid: List[int] = field(default_factory=lambda: [100, 1000, 10000])
    reference_n: int = 20000
    alpha: float = 1.5
    kde_points: int = 512
    out: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}")
        if self.n_grid is None:
            self.n_grid = list(DEFAULT_N_GRID[self.experiment])
        if self.runs is None:
            self.runs = DEFAULT_RUNS.get(self.experiment, 20)
        if isinstance(self.k, int):
            self.k = [self.k]
        self.dv_pairs = [(int(d), float(v)) for d, v in self.dv_pairs]
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or min(self.n_grid) < 1:
            raise InvalidInputError("n_grid must be a nonempty list of positive sizes")
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")
        if self.experiment == "convergence":
            if not self.dv_pairs:
                raise InvalidInputError("dv_pairs must be nonempty")
            for d, v in self.dv_pairs:
                if d < 1 or not v > 0:
                    raise InvalidInputError(f"invalid (d, v) pair ({d}, {v})")
                if any(not 1 <= k <= d for k in self.k):
                    raise InvalidInputError(f"every k must satisfy 1 <= k <= d = {d}")
            unknown = set(self.metrics) - {"iprw", "prw", "w2"}
            if unknown or not self.metrics:
                raise InvalidInputError(f"unknown convergence metrics {sorted(unknown)}")
        if self.experiment == "clt" and len(set(self.n_grid)) < 2:
            raise InvalidInputError("the clt experiment needs at least two n values")
        if self.mixture_kind not in (8, 12, 25):
            raise InvalidInputError("mixture_kind must be 8, 12 or 25")
        if set(self.estimators) - {"mprw", "meprw"} or not self.estimators:
            raise InvalidInputError("estimators must be a nonempty subset of {mprw, meprw}")
        if not self.m_grid or min(self.m_grid) < 1 or self.reference_n < 1:
            raise InvalidInputError("m_grid and reference_n must be positive")
        if self.n_proj < 1 or self.kde_points < 2:
            raise InvalidInputError("n_proj must be >= 1 and kde_points >= 2")

    @classmethod
    def from_dict(cls, raw: Dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        kw = dict(raw)
        try:
            if isinstance(kw.get("rsgan"), dict):
                kw["rsgan"] = RsganConfig(**kw["rsgan"])
            if isinstance(kw.get("fit"), dict):
                kw["fit"] = FitConfig(**kw["fit"])
            return cls(**kw)
        except TypeError as exc:
            raise InvalidInputError(str(exc)) from None

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["dv_pairs"] = [list(p) for p in self.dv_pairs]
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class Row(NamedTuple):
    experiment: str
    params: str
    n: int
    run: int
    metric: str
    value: float
    wall_time_s: float


@dataclass
class ResultTable:
    rows: List[Row] = field(default_factory=list)
    theta_ref: Optional[Dict] = None
    extra: Dict = field(default_factory=dict)

    def values(self, metric: str, params: Optional[str] = None, n: Optional[int] = None) -> np.ndarray:
        return np.array([r.value for r in self.rows
                         if r.metric == metric
                         and (params is None or r.params == params)
                         and (n is None or r.n == n)])

    def param_keys(self) -> List[str]:
        return list(dict.fromkeys(r.params for r in self.rows))

    def n_values(self) -> List[int]:
        return sorted({r.n for r in self.rows})

    def summary(self) -> List[Dict]:
        cells: Dict[Tuple[str, int, str], List[float]] = {}
        for r in self.rows:
            cells.setdefault((r.params, r.n, r.metric), []).append(r.value)
        out = []
        for (params, n, metric), vals in cells.items():
            v = np.asarray(vals, dtype=float)
            v = v[np.isfinite(v)]
            stats = dict(params=params, n=n, metric=metric, count=int(v.size))
            if v.size:
                stats.update(mean=float(v.mean()), std=float(v.std(ddof=1)) if v.size > 1 else 0.0,
                             min=float(v.min()), max=float(v.max()))
            out.append(stats)
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.experiment, r.params, r.n, r.run, r.metric, repr(float(r.value)),
                        f"{r.wall_time_s:.6f}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != CSV_HEADER:
                raise InvalidInputError(f"{path}: unexpected CSV header {header}")
            rows = [Row(e, p, int(n), int(run), m, float(v), float(t)) for e, p, n, run, m, v, t in reader]
        return cls(rows)

    def summary_json(self, config: Optional[ExperimentConfig] = None) -> Dict:
        out = {
            "config": config.to_dict() if config is not None else None,
            "theta_ref": self.theta_ref,
            "summary": self.summary(),
            "versions": versions(),
        }
        out.update(self.extra)
        return _jsonable(out)

    def write(self, csv_path, config: Optional[ExperimentConfig] = None) -> str:
        """Write the CSV and a JSON summary next to it; returns the JSON path."""
        self.to_csv(csv_path)
        root, _ = os.path.splitext(str(csv_path))
        json_path = root + ".json"
        with open(json_path, "w") as fh:
            json.dump(self.summary_json(config), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return json_path


def versions() -> Dict[str, str]:
    return {"artifact": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def worker_count(n_tasks: int) -> int:
    """Pool size: ``PRW_THREADS`` if set, else the available CPUs, capped by the task count."""
    env = os.environ.get("PRW_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidInputError(f"PRW_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise InvalidInputError("PRW_THREADS must be >= 1")
    else:
        cap = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def _call(task):
    fn, kwargs = task
    return fn(**kwargs)


def run_tasks(tasks: Sequence[Tuple]) -> List:
    """Run ``(fn, kwargs)`` tasks, returning results in task order."""
    workers = worker_count(len(tasks))
    if workers == 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, tasks))


def _seed_from(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _stream(config: ExperimentConfig, *indices: int) -> np.random.Generator:
    return trial_rng(config.seed, _EXPERIMENT_CODE[config.experiment], *indices)


# --- convergence -------------------------------------------------------------


def _convergence_cell(config, params, d, v, k, n, run, stream):
    rng = trial_rng(*stream)
    mu = make_empirical(sample_hypercube(d, v, n, rng))
    nu = make_empirical(sample_hypercube(d, v, n, rng))
    proj_seed, rsgan_seed = _seed_from(rng), _seed_from(rng)
    rows = []
    for metric in config.metrics:
        try:
            if metric == "iprw":
                val, wall = _timed(iprw, mu, nu, p=2.0, k=k, n_proj=config.n_proj, seed=proj_seed)
            elif metric == "prw":
                res, wall = _timed(prw2_rsgan, mu, nu, replace(config.rsgan, k=k, seed=rsgan_seed, U0=None))
                val = res.value
            else:
                val, wall = _timed(wasserstein_p, mu, nu, 2.0)
        except Exception:  # a failed cell is recorded as missing
            val, wall = float("nan"), 0.0
        rows.append(Row(config.experiment, params, n, run, metric, float(val), wall))
    return rows


def run_convergence(config: ExperimentConfig) -> ResultTable:
    tasks = []
    combos = [(d, v, k) for d, v in config.dv_pairs for k in config.k]
    for pi, (d, v, k) in enumerate(combos):
        params = f"d={d};v={v:g};k={k}"
        for ni, n in enumerate(config.n_grid):
            for run in range(config.runs):
                stream = (config.seed, _EXPERIMENT_CODE[config.experiment], pi, ni, run)
                tasks.append((_convergence_cell, dict(config=config, params=params, d=d, v=v, k=k,
                                                      n=n, run=run, stream=stream)))
    return ResultTable([row for rows in run_tasks(tasks) for row in rows])


# --- minimum-distance experiments ----------------------------------------------


def _mixture(config, n, rng):
    return sample_gaussian_mixture(MixtureSpec.of_kind(config.mixture_kind), n, rng)


def _reference_fit(config: ExperimentConfig, kind: str):
    """Large-sample fit used as the target of the error metrics, on its own stream."""
    rng = _stream(config, _REFERENCE_STREAM)
    X = _mixture(config, config.reference_n, rng)
    fit = replace(config.fit, seed=_seed_from(rng))
    if kind == "ecs":
        est, _ = fit_meprw_ecs(X, replace(fit, m_model_samples=config.reference_n), alpha=config.alpha)
        return {"location": est.location.tolist(), "alpha": config.alpha, "n": config.reference_n}
    est, _ = fit_mprw_gaussian(X, fit)
    return {"mean": est.mean.tolist(), "sigma2": float(est.sigma2), "n": config.reference_n}


def _consistency_cell(config, params, n, run, stream, ref_mean):
    rng = trial_rng(*stream)
    X = _mixture(config, n, rng)
    seeds = {"mprw": _seed_from(rng), "meprw": _seed_from(rng)}
    rows = []
    for est in config.estimators:
        fit = replace(config.fit, seed=seeds[est])
        try:
            if est == "mprw":
                (p, _), wall = _timed(fit_mprw_gaussian, X, fit)
            else:
                (p, _), wall = _timed(fit_meprw_gaussian, X, replace(fit, m_model_samples=n))
            val = float(np.linalg.norm(p.mean - ref_mean))
        except Exception:
            val, wall = float("nan"), 0.0
        rows.append(Row(config.experiment, params, n, run, f"{est}_error", val, wall))
    return rows


def run_consistency(config: ExperimentConfig) -> ResultTable:
    ref = _reference_fit(config, "gaussian")
    params = f"mixture={config.mixture_kind}"
    tasks = []
    for ni, n in enumerate(config.n_grid):
        for run in range(config.runs):
            stream = (config.seed, _EXPERIMENT_CODE[config.experiment], ni, run)
            tasks.append((_consistency_cell, dict(config=config, params=params, n=n, run=run,
                                                  stream=stream, ref_mean=np.asarray(ref["mean"]))))
    return ResultTable([row for rows in run_tasks(tasks) for row in rows], theta_ref=ref)


def _meprw_vs_mprw_cell(config, n, run, stream):
    rng = trial_rng(*stream)
    X = _mixture(config, n, rng)
    base, _ = fit_mprw_gaussian(X, replace(config.fit, seed=_seed_from(rng)))
    rows = []
    for m in config.m_grid:
        fit = replace(config.fit, seed=_seed_from(rng), m_model_samples=m)
        try:
            (p, _), wall = _timed(fit_meprw_gaussian, X, fit)
            val = float(np.sum((p.mean - base.mean) ** 2))
        except Exception:
            val, wall = float("nan"), 0.0
        rows.append(Row(config.experiment, f"m={m}", n, run, "sq_diff", val, wall))
    return rows


def run_meprw_vs_mprw(config: ExperimentConfig) -> ResultTable:
    tasks = []
    for ni, n in enumerate(config.n_grid):
        for run in range(config.runs):
            stream = (config.seed, _EXPERIMENT_CODE[config.experiment], ni, run)
            tasks.append((_meprw_vs_mprw_cell, dict(config=config, n=n, run=run, stream=stream)))
    rows = [row for rows in run_tasks(tasks) for row in rows]
    order = {f"m={m}": i for i, m in enumerate(config.m_grid)}
    rows.sort(key=lambda r: (order[r.params], r.n, r.run))
    return ResultTable(rows)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    h = 1.06 * sd * x.size ** (-0.2)
    return h if h > 0 else 1.0


def gaussian_kde(samples, grid, bandwidth: Optional[float] = None) -> np.ndarray:
    """Gaussian kernel density estimate of ``samples`` evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise InvalidInputError("KDE needs at least one finite sample")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    z = (np.asarray(grid, dtype=float)[:, None] - x[None, :]) / h
    return np.exp(-0.5 * z**2).sum(axis=1) / (x.size * h * np.sqrt(2.0 * np.pi))


def kde_grid(samples, points: int) -> np.ndarray:
    """Grid covering the samples with a margin of six bandwidths on each side."""
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    h = silverman_bandwidth(x)
    return np.linspace(x.min() - 6.0 * h, x.max() + 6.0 * h, points)


def _clt_cell(config, params, n, run, stream, sigma2_ref):
    rng = trial_rng(*stream)
    X = _mixture(config, n, rng)
    try:
        (p, _), wall = _timed(fit_mprw_gaussian, X, replace(config.fit, seed=_seed_from(rng)))
        s2 = float(p.sigma2)
    except Exception:
        s2, wall = float("nan"), 0.0
    return [Row(config.experiment, params, n, run, "sigma2_hat", s2, wall),
            Row(config.experiment, params, n, run, "sqrt_n_centered", math.sqrt(n) * (s2 - sigma2_ref), wall)]


def run_clt(config: ExperimentConfig) -> ResultTable:
    ref = _reference_fit(config, "gaussian")
    params = f"mixture={config.mixture_kind}"
    tasks = []
    for ni, n in enumerate(config.n_grid):
        for run in range(config.runs):
            stream = (config.seed, _EXPERIMENT_CODE[config.experiment], ni, run)
            tasks.append((_clt_cell, dict(config=config, params=params, n=n, run=run, stream=stream,
                                          sigma2_ref=ref["sigma2"])))
    table = ResultTable([row for rows in run_tasks(tasks) for row in rows], theta_ref=ref)
    # one shared grid so the curves for different n are directly comparable
    pooled = table.values("sqrt_n_centered")
    pooled = pooled[np.isfinite(pooled)]
    kde = {}
    if pooled.size:
        grid = kde_grid(pooled, config.kde_points)
        for n in config.n_grid:
            vals = table.values("sqrt_n_centered", n=n)
            vals = vals[np.isfinite(vals)]
            if vals.size:
                kde[str(n)] = {"bandwidth": silverman_bandwidth(vals),
                               "density": gaussian_kde(vals, grid).tolist()}
        table.extra["kde"] = {"grid": grid.tolist(), "curves": kde}
    return table


def _ecs_cell(config, params, n, run, stream, ref_loc):
    rng = trial_rng(*stream)
    X = _mixture(config, n, rng)
    fit = replace(config.fit, seed=_seed_from(rng), m_model_samples=n)
    try:
        (p, _), wall = _timed(fit_meprw_ecs, X, fit, alpha=config.alpha)
        loc = p.location
    except Exception:
        loc, wall = np.full(2, np.nan), 0.0
    err = float(np.linalg.norm(loc - ref_loc))
    return [Row(config.experiment, params, n, run, "location_x", float(loc[0]), wall),
            Row(config.experiment, params, n, run, "location_y", float(loc[1]), wall),
            Row(config.experiment, params, n, run, "location_error", err, wall)]


def run_ecs_consistency(config: ExperimentConfig) -> ResultTable:
    ref = _reference_fit(config, "ecs")
    params = f"mixture={config.mixture_kind};alpha={config.alpha:g}"
    tasks = []
    for ni, n in enumerate(config.n_grid):
        for run in range(config.runs):
            stream = (config.seed, _EXPERIMENT_CODE[config.experiment], ni, run)
            tasks.append((_ecs_cell, dict(config=config, params=params, n=n, run=run, stream=stream,
                                          ref_loc=np.asarray(ref["location"]))))
    return ResultTable([row for rows in run_tasks(tasks) for row in rows], theta_ref=ref)


RUNNERS = {
    "convergence": run_convergence,
    "consistency": run_consistency,
    "meprw-vs-mprw": run_meprw_vs_mprw,
    "clt": run_clt,
    "ecs-consistency": run_ecs_consistency,
}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    return RUNNERS[config.experiment](config)


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_rate(table: ResultTable, metric: str, params: Optional[str] = None) -> RateFit:
    """Least squares fit of ``log mean(metric)`` against ``log n``."""
    ns, means = [], []
    for n in table.n_values():
        v = table.values(metric, params=params, n=n)
        v = v[np.isfinite(v)]
        if v.size and v.mean() > 0:
            ns.append(n)
            means.append(v.mean())
    if len(ns) < 3:
        raise InvalidInputError(f"need at least 3 n values with positive finite means for {metric!r}")
    x, y = np.log(ns), np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)
