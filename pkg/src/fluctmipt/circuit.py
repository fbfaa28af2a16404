"""Brickwork scheduling, measurement layers and trajectory execution.

One full cycle is: odd layer (pairs (2k, 2k+1)), measurement layer, even
layer (pairs (2k+1, 2k+2 mod L)), measurement layer. Half-cycles are numbered
from 1, so half-cycle ``h`` is odd-parity when ``h`` is odd and cycle time is
``t = h / 2``.

Per half-cycle the trajectory stream is consumed in this order:

1. six draws per gate, gates in ascending first-site order;
2. one site-selection draw per site, ascending (site measured iff draw < p);
3. one outcome draw per selected site, ascending (outcome up iff draw < P(up)).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .gates import GATE_MEASURES, gate_coefficients, sample_layer_params
from .observables import Partition, evaluate, partition_preset
from .rng import Stream, trajectory_stream
from .statevec import (
    MAX_L,
    SPIN_UNITS,
    PureState,
    apply_coefficients,
    measure_z,
    neel_state,
    project_site,
)

BOUNDARIES = ("periodic", "open")
ODD, EVEN = "odd", "even"
LOG_VERSION = 1


@dataclass(frozen=True)
class CircuitConfig:
    L: int
    p: float
    cycles: int = 200
    warmup: int = 100
    boundary: str = "periodic"
    partitions: tuple[Partition, ...] = ()
    record_every: int = 2
    spin_units: str = "half"
    gate_measure: str = "uniform_phases"
    seed: int = 0

    def __post_init__(self):
        L = self.L
        if not isinstance(L, (int, np.integer)) or L % 2 or not (4 <= L <= MAX_L):
            raise ConfigurationError(f"L must be even in [4, {MAX_L}], got {L!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ConfigurationError(f"p must lie in [0, 1], got {self.p!r}")
        if self.cycles < 1:
            raise ConfigurationError(f"cycles must be >= 1, got {self.cycles}")
        if not (0 <= self.warmup < self.cycles):
            raise ConfigurationError(f"warmup must satisfy 0 <= warmup < cycles, got {self.warmup}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.record_every < 1:
            raise ConfigurationError(f"record_every must be >= 1, got {self.record_every}")
        if self.spin_units not in SPIN_UNITS:
            raise ConfigurationError(f"spin_units must be one of {tuple(SPIN_UNITS)}")
        if self.gate_measure not in GATE_MEASURES:
            raise ConfigurationError(f"gate_measure must be one of {GATE_MEASURES}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        names = [q.name for q in self.partitions]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate partition names {names}")
        object.__setattr__(self, "partitions", tuple(q.validate(L) for q in self.partitions))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["partitions"] = [q.to_dict() for q in self.partitions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitConfig":
        d = dict(d)
        d["partitions"] = tuple(resolve_partition(q, d["L"]) for q in d.get("partitions", ()))
        return cls(**d)


def resolve_partition(spec, L: int) -> Partition:
    """Accept a preset name, a ``{name, A, B}`` mapping or a :class:`Partition`."""
    if isinstance(spec, Partition):
        return spec
    if isinstance(spec, str):
        return partition_preset(spec, L)
    if isinstance(spec, dict):
        unknown = set(spec) - {"name", "A", "B"}
        if unknown or "name" not in spec or "A" not in spec:
            raise ConfigurationError(f"partition mapping needs keys name, A[, B]; got {sorted(spec)}")
        B = spec.get("B")
        return Partition(str(spec["name"]), tuple(spec["A"]), None if B is None else tuple(B))
    raise ConfigurationError(f"cannot interpret partition {spec!r}")


@dataclass(frozen=True)
class MeasurementEvent:
    half_cycle: int
    site: int
    outcome: int
    prob: float


@dataclass(eq=False)
class TrajectoryRecord:
    config: CircuitConfig
    trajectory_index: int
    half_cycles: np.ndarray
    samples: dict[tuple[str, str], np.ndarray]
    events: list[MeasurementEvent]
    checksum: str
    draws: int = 0
    final_state: PureState | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        """Recorded times in cycles."""
        return self.half_cycles / 2.0

    def same_as(self, other: "TrajectoryRecord") -> bool:
        return (
            self.config == other.config
            and self.trajectory_index == other.trajectory_index
            and np.array_equal(self.half_cycles, other.half_cycles)
            and self.samples.keys() == other.samples.keys()
            and all(np.array_equal(v, other.samples[k]) for k, v in self.samples.items())
            and self.events == other.events
            and self.checksum == other.checksum
        )


def layer_pairs(L: int, parity: str, boundary: str = "periodic") -> list[tuple[int, int]]:
    if parity == ODD:
        return [(2 * k, 2 * k + 1) for k in range(L // 2)]
    if parity == EVEN:
        pairs = [(2 * k + 1, (2 * k + 2) % L) for k in range(L // 2)]
        if boundary == "open":
            pairs = [q for q in pairs if q != (L - 1, 0)]
        return pairs
    raise ConfigurationError(f"parity must be {ODD!r} or {EVEN!r}")


def state_checksum(state: PureState) -> str:
    return hashlib.sha256(np.ascontiguousarray(state.amplitudes).tobytes()).hexdigest()


def apply_gate_layer(state: PureState, parity: str, config: CircuitConfig, stream: Stream) -> int:
    pairs = layer_pairs(config.L, parity, config.boundary)
    coeffs = gate_coefficients(sample_layer_params(stream, len(pairs), config.gate_measure))
    for (i, j), c in zip(pairs, coeffs):
        apply_coefficients(state, c, i, j)
    return len(pairs)


def run_half_cycle(
    state: PureState,
    parity: str,
    config: CircuitConfig,
    stream: Stream,
    half_cycle: int = 0,
) -> tuple[PureState, list[MeasurementEvent]]:
    apply_gate_layer(state, parity, config, stream)
    selected = np.flatnonzero(stream.draw(config.L) < config.p)
    draws = stream.draw(len(selected))
    events = []
    for n, u in zip(selected.tolist(), draws.tolist()):
        _, outcome, p_up = measure_z(state, n, u)
        events.append(MeasurementEvent(half_cycle, n, outcome, p_up if outcome == 1 else 1.0 - p_up))
    return state, events


def _record_now(state, config, out, row):
    for q in config.partitions:
        for name, v in evaluate(state, q, config.spin_units).items():
            out[(name, q.name)][row] = v


def run_trajectory(
    config: CircuitConfig,
    trajectory_index: int = 0,
    keep_state: bool = True,
    window: tuple[float, float] | None = None,
) -> TrajectoryRecord:
    """Run one trajectory from the Neel state.

    Observables are recorded every ``record_every`` half-cycles. If ``window``
    (in cycles, inclusive) is given, only recording times inside it are
    evaluated; the dynamics and the stream are unaffected.
    """
    stream = trajectory_stream(config.seed, trajectory_index)
    state = neel_state(config.L)
    n_half = 2 * config.cycles
    half_cycles = np.arange(config.record_every, n_half + 1, config.record_every)
    if window is not None:
        half_cycles = half_cycles[(half_cycles >= 2 * window[0]) & (half_cycles <= 2 * window[1])]
    wanted = set(half_cycles.tolist())
    samples = {(name, q.name): np.zeros(len(half_cycles)) for q in config.partitions for name in q.observables}
    events: list[MeasurementEvent] = []
    row = 0
    for h in range(1, n_half + 1):
        _, ev = run_half_cycle(state, ODD if h % 2 else EVEN, config, stream, h)
        events.extend(ev)
        if h % 2 == 0:
            state.renormalize()
        if h in wanted:
            _record_now(state, config, samples, row)
            row += 1
    return TrajectoryRecord(
        config=config,
        trajectory_index=trajectory_index,
        half_cycles=half_cycles,
        samples=samples,
        events=events,
        checksum=state_checksum(state),
        draws=stream.count,
        final_state=state if keep_state else None,
    )


def replay_trajectory(config: CircuitConfig, trajectory_index: int, events: Sequence[MeasurementEvent]) -> PureState:
    """Re-run a trajectory with measurement sites and outcomes forced from ``events``.

    Gate parameters still come from the trajectory stream; the site-selection
    and outcome draws are consumed but ignored so the stream stays aligned.
    """
    stream = trajectory_stream(config.seed, trajectory_index)
    state = neel_state(config.L)
    by_half: dict[int, list[MeasurementEvent]] = {}
    for e in events:
        by_half.setdefault(e.half_cycle, []).append(e)
    for h in range(1, 2 * config.cycles + 1):
        apply_gate_layer(state, ODD if h % 2 else EVEN, config, stream)
        ev = by_half.get(h, [])
        stream.skip(config.L + len(ev))
        for e in ev:
            p_up = kernels.prob_up(state.amplitudes, state.basis.states, e.site)
            p_up = min(max(p_up, 0.0), 1.0)
            up = e.outcome == 1
            project_site(state, e.site, up, p_up if up else 1.0 - p_up)
        if h % 2 == 0:
            state.renormalize()
    return state


# ---------------------------------------------------------------------------
# text log

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_log(record: TrajectoryRecord, dest: str | Path | TextIO) -> None:
    """Line-oriented text log: header, ``[samples]`` and ``[events]`` sections."""
    buf = io.StringIO()
    buf.write(f"# fluctmipt trajectory log v{LOG_VERSION}\n")
    buf.write("# config: " + json.dumps(record.config.to_dict(), sort_keys=True) + "\n")
    buf.write(f"# trajectory_index: {record.trajectory_index}\n")
    buf.write(f"# checksum: {record.checksum}\n")
    buf.write(f"# draws: {record.draws}\n")
    buf.write("[samples]\nhalf_cycle,observable,partition,value\n")
    for r, h in enumerate(record.half_cycles.tolist()):
        for (obs, part), vals in record.samples.items():
            buf.write(f"{h},{obs},{part},{_fmt(vals[r])}\n")
    buf.write("[events]\nhalf_cycle,site,outcome,prob\n")
    for e in record.events:
        buf.write(f"{e.half_cycle},{e.site},{e.outcome},{_fmt(e.prob)}\n")
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_log(src: str | Path | TextIO) -> TrajectoryRecord:
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    header, rest = {}, text.splitlines()
    i = 0
    while i < len(rest) and rest[i].startswith("#"):
        if ": " in rest[i]:
            k, v = rest[i][2:].split(": ", 1)
            header[k] = v
        i += 1
    config = CircuitConfig.from_dict(json.loads(header["config"]))
    section = None
    times: list[int] = []
    samples: dict[tuple[str, str], list[float]] = {}
    events = []
    for line in rest[i:]:
        if line in ("[samples]", "[events]"):
            section = line
            continue
        if not line or line.startswith("half_cycle,"):
            continue
        f = line.split(",")
        if section == "[samples]":
            h = int(f[0])
            if not times or times[-1] != h:
                times.append(h)
            samples.setdefault((f[1], f[2]), []).append(float(f[3]))
        else:
            events.append(MeasurementEvent(int(f[0]), int(f[1]), int(f[2]), float(f[3])))
    return TrajectoryRecord(
        config=config,
        trajectory_index=int(header["trajectory_index"]),
        half_cycles=np.array(times, dtype=np.int64),
        samples={k: np.array(v) for k, v in samples.items()},
        events=events,
        checksum=header["checksum"],
        draws=int(header.get("draws", 0)),
    )


def with_partitions(config: CircuitConfig, specs: Iterable) -> CircuitConfig:
    return replace(config, partitions=tuple(resolve_partition(s, config.L) for s in specs))
