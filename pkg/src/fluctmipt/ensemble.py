"""Trajectory ensembles, steady-state averages and rank correlations.

Averaging order: each trajectory is first averaged over the time window, then
mean, standard deviation (ddof=1) and standard error are taken across
trajectories. Aggregation always runs in trajectory-index order, so results
do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .circuit import CircuitConfig, TrajectoryRecord, run_trajectory
from .errors import ConfigurationError

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("L", "p", "observable", "partition", "mean", "std", "stderr", "n_traj", "t_min", "t_max", "seed")
SERIES_COLUMNS = ("L", "p", "observable", "partition", "half_cycle", "t", "mean", "std", "n_traj", "trajectory0")

Key = tuple[str, str]


def default_window(config: CircuitConfig) -> tuple[float, float]:
    return (float(config.warmup), float(config.cycles))


def steady_state_average(record: TrajectoryRecord, window: tuple[float, float]) -> dict[Key, float]:
    """Mean of the samples recorded at times t_min <= t <= t_max (cycles)."""
    t_min, t_max = window
    if t_min > t_max:
        raise ConfigurationError(f"empty window {window}")
    t = record.times
    if t.size == 0 or t_min < 0 or t_max > t[-1]:
        raise ConfigurationError(f"window {window} outside recorded range")
    sel = (t >= t_min) & (t <= t_max)
    if not sel.any():
        raise ConfigurationError(f"no samples inside window {window}")
    out = {}
    for k, v in record.samples.items():
        v = v[sel]
        # shift by the first sample so a constant series averages exactly
        out[k] = float(v[0] + np.mean(v - v[0]))
    return out


@dataclass
class EnsembleStatistics:
    config: CircuitConfig
    window: tuple[float, float]
    per_trajectory: dict[Key, np.ndarray]
    series: dict[Key, np.ndarray] | None = field(default=None, repr=False)
    series_half_cycles: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_trajectories(self) -> int:
        return len(next(iter(self.per_trajectory.values()))) if self.per_trajectory else 0

    @property
    def keys(self) -> list[Key]:
        return list(self.per_trajectory)

    def mean(self, key: Key) -> float:
        return float(np.mean(self.per_trajectory[key]))

    def std(self, key: Key) -> float:
        return float(np.std(self.per_trajectory[key], ddof=1))

    def stderr(self, key: Key) -> float:
        return self.std(key) / np.sqrt(self.n_trajectories)

    def bootstrap_stderr(self, key: Key, n_resamples: int = 200, seed: int = 0) -> float:
        return bootstrap_stderr(self.per_trajectory[key], n_resamples, seed)

    def rows(self) -> list[dict]:
        cfg = self.config
        return [
            {
                "L": cfg.L,
                "p": cfg.p,
                "observable": obs,
                "partition": part,
                "mean": self.mean((obs, part)),
                "std": self.std((obs, part)),
                "stderr": self.stderr((obs, part)),
                "n_traj": self.n_trajectories,
                "t_min": self.window[0],
                "t_max": self.window[1],
                "seed": cfg.seed,
            }
            for obs, part in self.keys
        ]


@dataclass
class SweepResult:
    p_values: tuple[float, ...]
    sizes: tuple[int, ...]
    stats: dict[tuple[int, float], EnsembleStatistics]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.p_values, self.p_values[1:])):
            raise ConfigurationError("p values must be strictly increasing")

    def curve(self, L: int, key: Key) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(p, mean, stderr) arrays along the p axis for one size."""
        st = [self.stats[(L, p)] for p in self.p_values]
        return (
            np.array(self.p_values),
            np.array([s.mean(key) for s in st]),
            np.array([s.stderr(key) for s in st]),
        )

    def rows(self) -> list[dict]:
        return [r for L in self.sizes for p in self.p_values for r in self.stats[(L, p)].rows()]


def bootstrap_stderr(values: np.ndarray, n_resamples: int = 200, seed: int = 0) -> float:
    """Trajectory-resampling bootstrap estimate of the standard error of the mean."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(values), size=(n_resamples, len(values)))
    return float(np.std(values[idx].mean(axis=1), ddof=1))


def _one(args):
    config, index, window, keep_series = args
    rec = run_trajectory(config, index, keep_state=False, window=None if keep_series else window)
    means = steady_state_average(rec, window)
    series = rec.samples if keep_series else None
    return means, series, rec.half_cycles


def _map(fn, jobs: list, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_ensemble(
    config: CircuitConfig,
    n_trajectories: int,
    workers: int = 1,
    window: tuple[float, float] | None = None,
    keep_series: bool = False,
    first_index: int = 0,
) -> EnsembleStatistics:
    """Run trajectories ``first_index .. first_index + n - 1`` and aggregate."""
    if n_trajectories < 2:
        raise ConfigurationError("an ensemble needs at least 2 trajectories")
    window = default_window(config) if window is None else tuple(float(w) for w in window)
    if window[0] > window[1] or window[0] < 0 or window[1] > config.cycles:
        raise ConfigurationError(f"window {window} outside [0, {config.cycles}]")
    jobs = [(config, first_index + i, window, keep_series) for i in range(n_trajectories)]
    results = _map(_one, jobs, workers)
    keys = list(results[0][0])
    per = {k: np.array([r[0][k] for r in results]) for k in keys}
    series = None
    if keep_series:
        series = {k: np.stack([r[1][k] for r in results]) for k in keys}
    return EnsembleStatistics(config, window, per, series, results[0][2] if keep_series else None)


def run_sweep(
    base: CircuitConfig,
    sizes: Sequence[int],
    p_values: Sequence[float],
    n_trajectories: int,
    workers: int = 1,
    partitions: Iterable | None = None,
) -> SweepResult:
    """Ensembles on the (L, p) grid.

    ``partitions`` holds preset names or mappings resolved per size; when
    omitted the base config's partitions are reused (their site lists must
    then be valid for every size).
    """
    from .circuit import resolve_partition

    p_values = tuple(float(p) for p in p_values)
    specs = list(partitions) if partitions is not None else list(base.partitions)
    out = {}
    for L in sizes:
        parts = tuple(resolve_partition(s, L) for s in specs)
        for p in p_values:
            cfg = replace(base, L=int(L), p=p, partitions=parts)
            out[(int(L), p)] = run_ensemble(cfg, n_trajectories, workers)
    return SweepResult(p_values, tuple(int(L) for L in sizes), out)


def rank_correlations(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Spearman rho (average ranks) and Kendall tau-b."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ConfigurationError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if len(xs) < 3:
        raise ConfigurationError("rank correlations need at least 3 points")
    rho = sps.spearmanr(xs, ys).statistic
    tau = sps.kendalltau(xs, ys, variant="b").statistic
    return float(rho), float(tau)


# ---------------------------------------------------------------------------
# CSV

def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write(rows: Iterable[dict], columns: Sequence[str], dest) -> str:
    buf = io.StringIO()
    buf.write(f"# fluctmipt schema_version={CSV_SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text)
    return text


def write_csv(rows: Iterable[dict], dest: str | Path | None = None) -> str:
    """Ensemble CSV: one row per (L, p, observable, partition)."""
    return _write(rows, CSV_COLUMNS, dest)


def read_csv(src: str | Path) -> list[dict]:
    lines = [ln for ln in Path(src).read_text().splitlines() if ln and not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        out.append(
            {
                "L": int(r["L"]),
                "p": float(r["p"]),
                "observable": r["observable"],
                "partition": r["partition"],
                "mean": float(r["mean"]),
                "std": float(r["std"]),
                "stderr": float(r["stderr"]),
                "n_traj": int(r["n_traj"]),
                "t_min": float(r["t_min"]),
                "t_max": float(r["t_max"]),
                "seed": int(r["seed"]),
            }
        )
    return out


def series_rows(stats: EnsembleStatistics) -> list[dict]:
    """Per-time ensemble mean/std bands plus trajectory 0's own series."""
    if stats.series is None:
        raise ConfigurationError("ensemble was run without keep_series")
    cfg = stats.config
    rows = []
    for (obs, part), arr in stats.series.items():
        mean = arr.mean(axis=0)
        std = arr.std(axis=0, ddof=1)
        for j, h in enumerate(stats.series_half_cycles.tolist()):
            rows.append(
                {
                    "L": cfg.L,
                    "p": cfg.p,
                    "observable": obs,
                    "partition": part,
                    "half_cycle": h,
                    "t": h / 2.0,
                    "mean": float(mean[j]),
                    "std": float(std[j]),
                    "n_traj": arr.shape[0],
                    "trajectory0": float(arr[0, j]),
                }
            )
    return rows


def write_series_csv(rows: Iterable[dict], dest: str | Path | None = None) -> str:
    return _write(rows, SERIES_COLUMNS, dest)
