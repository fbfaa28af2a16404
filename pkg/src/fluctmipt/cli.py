"""Command-line front end.

Subcommands::

    fluctmipt run CONFIG        ensembles for one L over p_list
    fluctmipt sweep CONFIG      ensembles over the L x p grid
    fluctmipt collapse CSV      fit p_c and nu from an ensemble CSV
    fluctmipt check             sector simulator vs. dense oracle
    fluctmipt presets [NAME]    list presets or print one as a config file

Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import difflib
import json
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import __version__
from .circuit import BOUNDARIES, CircuitConfig, resolve_partition, run_trajectory, write_log
from .ensemble import run_ensemble, read_csv, series_rows, write_csv, write_series_csv
from .errors import ConfigurationError, FluctMIPTError
from .gates import GATE_MEASURES
from .kernels import BACKEND
from .statevec import SPIN_UNITS

MANIFEST_VERSION = 1

SCHEMA = {
    "L": None,
    "p_list": None,
    "cycles": 200,
    "warmup": 100,
    "boundary": "periodic",
    "partitions": ["half_pbc"],
    "n_trajectories": 100,
    "seed": 0,
    "spin_units": "half",
    "gate_measure": "uniform_phases",
    "record_every": 2,
    "workers": 1,
    "output_dir": "out",
    # optional extras
    "trajectory_logs": 0,
    "timeseries": False,
}
REQUIRED = ("L", "p_list")

_P_GRID = [round(0.025 * k, 3) for k in range(13)]

PRESETS = {
    "fig1e": {
        "desk": {"L": 16, "p_list": [0.05, 0.15, 0.3], "n_trajectories": 100, "partitions": ["half_pbc"],
                 "timeseries": True, "trajectory_logs": 1},
        "full": {"L": 16, "p_list": [0.05, 0.15, 0.3], "n_trajectories": 100, "partitions": ["half_pbc"],
                  "timeseries": True, "trajectory_logs": 1},
    },
    "fig2": {
        "desk": {"L": [8, 12, 16], "p_list": _P_GRID, "n_trajectories": 100, "partitions": ["half_pbc"]},
        "full": {"L": [8, 12, 16, 20], "p_list": _P_GRID, "partitions": ["half_pbc"],
                  "n_trajectories": {8: 600, 12: 450, 16: 300, 20: 240}},
    },
    "fig3": {
        "desk": {"L": [8, 12, 16], "p_list": _P_GRID, "n_trajectories": 150, "partitions": ["quarters_pbc"]},
        "full": {"L": [8, 12, 16, 20], "p_list": _P_GRID, "partitions": ["quarters_pbc"],
                  "n_trajectories": {8: 600, 12: 450, 16: 300, 20: 240}},
    },
    "fig4": {
        "desk": {"L": [8, 12, 16], "p_list": _P_GRID, "n_trajectories": 150, "boundary": "open",
                 "partitions": ["edge_pairs_obc"]},
        "full": {"L": [8, 12, 16, 20], "p_list": _P_GRID, "boundary": "open", "partitions": ["edge_pairs_obc"],
                  "n_trajectories": {8: 600, 12: 450, 16: 300, 20: 240}},
    },
}


def preset_config(name: str, scale: str = "desk") -> dict:
    try:
        body = PRESETS[name][scale]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}/{scale!r}; presets: {sorted(PRESETS)}") from None
    cfg = {k: v for k, v in SCHEMA.items() if v is not None}
    cfg.update(json.loads(json.dumps(body)))  # deep copy
    cfg["output_dir"] = f"out/{name}"
    return cfg


# ---------------------------------------------------------------------------
# config validation

def _fail(path: str, msg: str):
    raise ConfigurationError(f"{path}: {msg}")


def _int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(path, f"must be >= {lo}, got {v}")
    return v


def validate_config(raw: dict) -> dict:
    """Check keys and types; return a normalized copy with defaults filled in."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config: top level must be a mapping")
    for k in raw:
        if k not in SCHEMA:
            near = difflib.get_close_matches(str(k), SCHEMA, n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            _fail(f"config.{k}", f"unknown key {k!r}{hint}")
    for k in REQUIRED:
        if k not in raw:
            _fail(f"config.{k}", "required key missing")
    cfg = {k: raw.get(k, v) for k, v in SCHEMA.items()}

    sizes = cfg["L"] if isinstance(cfg["L"], list) else [cfg["L"]]
    for i, L in enumerate(sizes):
        _int(L, f"config.L[{i}]" if isinstance(cfg["L"], list) else "config.L", 4)
        if L % 2:
            _fail("config.L", f"must be even, got {L}")
    p_list = cfg["p_list"]
    if not isinstance(p_list, list) or not p_list:
        _fail("config.p_list", "expected a non-empty list of rates")
    for i, p in enumerate(p_list):
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0 <= p <= 1:
            _fail(f"config.p_list[{i}]", f"expected a rate in [0, 1], got {p!r}")
    cfg["p_list"] = [float(p) for p in p_list]
    if any(b <= a for a, b in zip(cfg["p_list"], cfg["p_list"][1:])):
        _fail("config.p_list", "rates must be strictly increasing")
    _int(cfg["cycles"], "config.cycles", 1)
    _int(cfg["warmup"], "config.warmup", 0)
    if cfg["warmup"] >= cfg["cycles"]:
        _fail("config.warmup", "must be smaller than cycles")
    if cfg["boundary"] not in BOUNDARIES:
        _fail("config.boundary", f"expected one of {BOUNDARIES}, got {cfg['boundary']!r}")
    if cfg["spin_units"] not in SPIN_UNITS:
        _fail("config.spin_units", f"expected one of {sorted(SPIN_UNITS)}, got {cfg['spin_units']!r}")
    if cfg["gate_measure"] not in GATE_MEASURES:
        _fail("config.gate_measure", f"expected one of {GATE_MEASURES}, got {cfg['gate_measure']!r}")
    _int(cfg["record_every"], "config.record_every", 1)
    _int(cfg["workers"], "config.workers", 1)
    _int(cfg["seed"], "config.seed", 0)
    _int(cfg["trajectory_logs"], "config.trajectory_logs", 0)
    if not isinstance(cfg["timeseries"], bool):
        _fail("config.timeseries", "expected true or false")
    if not isinstance(cfg["output_dir"], str):
        _fail("config.output_dir", "expected a path string")

    n = cfg["n_trajectories"]
    if isinstance(n, dict):
        n = {int(k): v for k, v in n.items()}
        for L in sizes:
            if L not in n:
                _fail(f"config.n_trajectories.{L}", "missing entry for this size")
            _int(n[L], f"config.n_trajectories.{L}", 2)
        cfg["n_trajectories"] = {str(k): v for k, v in sorted(n.items())}
    else:
        _int(n, "config.n_trajectories", 2)

    if not isinstance(cfg["partitions"], list) or not cfg["partitions"]:
        _fail("config.partitions", "expected a non-empty list")
    for L in sizes:
        for i, spec in enumerate(cfg["partitions"]):
            try:
                resolve_partition(spec, L)
                CircuitConfig(L=L, p=0.0, cycles=cfg["cycles"], warmup=cfg["warmup"],
                              partitions=(resolve_partition(spec, L),))
            except ConfigurationError as exc:
                _fail(f"config.partitions[{i}] (L={L})", str(exc))
    return cfg


def load_config(path: str | Path) -> tuple[dict, bool]:
    """Parse a YAML/JSON config or a run manifest. Returns (config, from_manifest)."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: cannot parse: {exc}") from None
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        return validate_config(raw["config"]), True
    return validate_config(raw), False


def n_for(cfg: dict, L: int) -> int:
    n = cfg["n_trajectories"]
    return n[str(L)] if isinstance(n, dict) else n


# ---------------------------------------------------------------------------
# running

def _manifest(cfg: dict, command: str, status: str, outputs: list[str]) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "status": status,
        "command": command,
        "code_version": __version__,
        "backend": BACKEND,
        "seed": cfg["seed"],
        "config": cfg,
        "outputs": outputs,
    }


def _write_manifest(out: Path, m: dict) -> None:
    (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")


def execute(cfg: dict, command: str = "sweep", workers: int | None = None) -> Path:
    """Run the configured grid and write CSV, optional logs and the manifest."""
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, _manifest(cfg, command, "incomplete", []))
    workers = cfg["workers"] if workers is None else workers
    sizes = cfg["L"] if isinstance(cfg["L"], list) else [cfg["L"]]
    rows, series, outputs = [], [], ["ensemble.csv"]
    for L in sizes:
        base = CircuitConfig(
            L=L, p=0.0, cycles=cfg["cycles"], warmup=cfg["warmup"], boundary=cfg["boundary"],
            partitions=tuple(resolve_partition(s, L) for s in cfg["partitions"]),
            record_every=cfg["record_every"], spin_units=cfg["spin_units"],
            gate_measure=cfg["gate_measure"], seed=cfg["seed"],
        )
        for p in cfg["p_list"]:
            c = replace(base, p=p)
            st = run_ensemble(c, n_for(cfg, L), workers=workers, keep_series=cfg["timeseries"])
            rows.extend(st.rows())
            if cfg["timeseries"]:
                series.extend(series_rows(st))
            for k in range(cfg["trajectory_logs"]):
                name = f"logs/traj_L{L}_p{p:g}_{k}.log"
                (out / "logs").mkdir(exist_ok=True)
                write_log(run_trajectory(c, k, keep_state=False), out / name)
                outputs.append(name)
    write_csv(rows, out / "ensemble.csv")
    if cfg["timeseries"]:
        write_series_csv(series, out / "timeseries.csv")
        outputs.append("timeseries.csv")
    _write_manifest(out, _manifest(cfg, command, "complete", outputs))
    return out


def _cmd_run(args, sweep: bool) -> int:
    cfg, _ = load_config(args.config)
    if args.output_dir:
        cfg["output_dir"] = args.output_dir
    if args.trajectory_logs is not None:
        cfg["trajectory_logs"] = args.trajectory_logs
    if not sweep and isinstance(cfg["L"], list):
        if len(cfg["L"]) != 1:
            raise ConfigurationError("config.L: `run` takes a single size; use `sweep` for a list")
        cfg["L"] = cfg["L"][0]
    out = execute(cfg, "sweep" if sweep else "run", workers=args.workers)
    print(f"wrote {out / 'ensemble.csv'}")
    return 0


def _cmd_collapse(args) -> int:
    from .scaling import CollapseInput, bootstrap_collapse, fit_collapse, scaled_points

    rows = [r for r in read_csv(args.csv) if r["observable"] == args.observable and r["partition"] == args.partition]
    if not rows:
        raise ConfigurationError(f"no rows for observable={args.observable!r} partition={args.partition!r}")
    pts = [(r["L"], r["p"], r["mean"], max(r["stderr"], args.sigma_floor)) for r in rows]
    data = CollapseInput.from_points(pts, args.omega, args.subtract_critical)
    if args.bootstrap:
        fit = bootstrap_collapse(data, args.pc_range, args.nu_range, n_resamples=args.bootstrap, seed=args.seed)
    else:
        fit = fit_collapse(data, args.pc_range, args.nu_range)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"observable: {args.observable}",
        f"partition: {args.partition}",
        f"size_exponent: {args.omega:g}",
        f"subtract_critical: {args.subtract_critical}",
        f"sizes: {' '.join(str(int(L)) for L in data.sizes)}",
        f"search_box: p_c in [{args.pc_range[0]:g}, {args.pc_range[1]:g}], nu in [{args.nu_range[0]:g}, {args.nu_range[1]:g}]",
        f"p_c: {fit.p_c:.17g}",
        f"nu: {fit.nu:.17g}",
        f"quality: {fit.quality:.17g}",
        f"evaluations: {fit.n_evals}",
        f"grid_best: {fit.grid_best[0]:.17g} {fit.grid_best[1]:.17g}",
    ]
    if fit.pc_interval is not None:
        lines += [
            f"p_c_95: {fit.pc_interval[0]:.17g} {fit.pc_interval[1]:.17g}",
            f"nu_95: {fit.nu_interval[0]:.17g} {fit.nu_interval[1]:.17g}",
            f"bootstrap_resamples: {len(fit.bootstrap_samples)}",
        ]
    report = "\n".join(lines) + "\n"
    (out / "fit_report.txt").write_text(report)
    x, Y, L = scaled_points(data, fit.p_c, fit.nu)
    text = "# fluctmipt schema_version=1\nx,Y,L,observable\n" + "".join(
        f"{a:.17g},{b:.17g},{int(c)},{args.observable}\n" for a, b, c in zip(x, Y, L)
    )
    (out / "scaled.csv").write_text(text)
    print(report, end="")
    return 0


def _cmd_check(args) -> int:
    from .oracle import format_check_table, run_check_suite

    rows = run_check_suite(sizes=tuple(args.sizes), cycles=args.cycles, boundaries=tuple(args.boundaries))
    print(format_check_table(rows))
    ok = all(r.passed for r in rows)
    print(f"{sum(r.passed for r in rows)}/{len(rows)} passed")
    return 0 if ok else 2


def _cmd_presets(args) -> int:
    if args.name is None:
        for name, scales in PRESETS.items():
            d = scales["desk"]
            print(f"{name:6s} L={d['L']} partitions={d['partitions']} (scales: {', '.join(scales)})")
        return 0
    text = yaml.safe_dump(preset_config(args.name, args.scale), sort_keys=False)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fluctmipt", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_ in (("run", "ensembles for one L over p_list"), ("sweep", "ensembles over the L x p grid")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="YAML/JSON config file or a manifest.json from a previous run")
        sp.add_argument("--output-dir", help="override config output_dir")
        sp.add_argument("--workers", type=int, help="override config workers")
        sp.add_argument("--trajectory-logs", type=int, help="write logs for the first N trajectories per point")

    sp = sub.add_parser("collapse", help="fit a scaling collapse from an ensemble CSV")
    sp.add_argument("csv")
    sp.add_argument("--observable", default="entropy")
    sp.add_argument("--partition", default="half_pbc")
    sp.add_argument("--omega", type=float, default=0.0, help="size exponent applied as y * L**omega")
    sp.add_argument("--subtract-critical", action="store_true")
    sp.add_argument("--pc-range", type=float, nargs=2, default=(0.0, 0.3))
    sp.add_argument("--nu-range", type=float, nargs=2, default=(0.5, 3.0))
    sp.add_argument("--bootstrap", type=int, default=0, help="number of bootstrap resamples")
    sp.add_argument("--sigma-floor", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output-dir", default="collapse")

    sp = sub.add_parser("check", help="compare against the dense oracle")
    sp.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8, 10])
    sp.add_argument("--cycles", type=int, default=10)
    sp.add_argument("--boundaries", nargs="+", default=["periodic", "open"], choices=BOUNDARIES)

    sp = sub.add_parser("presets", help="list presets or emit one as a config")
    sp.add_argument("name", nargs="?", choices=sorted(PRESETS))
    sp.add_argument("--scale", choices=("desk", "full"), default="desk")
    sp.add_argument("-o", "--output")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            return _cmd_run(args, sweep=args.command == "sweep")
        if args.command == "collapse":
            return _cmd_collapse(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_presets(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FluctMIPTError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
