"""Dense full-space reference simulator.

Deliberately simple: the state is a 2^L vector viewed as an L-index tensor,
gates are applied as explicit 4x4 matrices on two tensor legs, and every
observable is computed from a dense partial trace. It consumes the trajectory
stream in exactly the same order as :mod:`fluctmipt.circuit`, so the two can
be compared amplitude by amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .circuit import (
    EVEN,
    ODD,
    CircuitConfig,
    MeasurementEvent,
    TrajectoryRecord,
    layer_pairs,
    resolve_partition,
    run_trajectory,
)
from .errors import CapacityError, ConfigurationError
from .gates import build_gate, GateParams, sample_layer_params
from .observables import ENTROPY, MUTUAL_FLUCTUATION, MUTUAL_INFORMATION, VARIANCE
from .rng import trajectory_stream
from .statevec import SPIN_UNITS, expand_to_full, neel_pattern

MAX_ORACLE_L = 10

# gate basis position -> (bit of first site, bit of second site)
_GATE_BASIS_BITS = ((0, 0), (1, 1), (1, 0), (0, 1))


@dataclass
class DenseState:
    L: int
    amplitudes: np.ndarray

    def tensor(self) -> np.ndarray:
        # C-order reshape: axis L-1-n carries site n (site 0 is the last axis)
        return self.amplitudes.reshape((2,) * self.L)


@dataclass(frozen=True)
class StateComparison:
    deviation: float
    max_abs: float
    phase: complex
    tol: float

    @property
    def passed(self) -> bool:
        return self.deviation < self.tol


def _axis(L: int, n: int) -> int:
    return L - 1 - n


def dense_gate(matrix: np.ndarray) -> np.ndarray:
    """Re-index a gate-basis 4x4 matrix to rows/cols ``2*b_i + b_j``."""
    g = np.zeros((4, 4), dtype=complex)
    for r, (ri, rj) in enumerate(_GATE_BASIS_BITS):
        for c, (ci, cj) in enumerate(_GATE_BASIS_BITS):
            g[2 * ri + rj, 2 * ci + cj] = matrix[r, c]
    return g


def apply_dense_gate(state: DenseState, g: np.ndarray, i: int, j: int) -> None:
    L = state.L
    t = np.moveaxis(state.tensor(), (_axis(L, i), _axis(L, j)), (0, 1))
    shape = t.shape
    t = (g @ t.reshape(4, -1)).reshape(shape)
    state.amplitudes = np.ascontiguousarray(np.moveaxis(t, (0, 1), (_axis(L, i), _axis(L, j)))).reshape(-1)


def dense_prob_up(state: DenseState, n: int) -> float:
    t = np.moveaxis(state.tensor(), _axis(state.L, n), 0)
    return float(np.sum(np.abs(t[1]) ** 2))


def dense_measure(state: DenseState, n: int, u: float) -> tuple[int, float]:
    p_up = min(max(dense_prob_up(state, n), 0.0), 1.0)
    up = u < p_up
    if up and p_up < 1e-14:
        up = False
    elif not up and 1.0 - p_up < 1e-14:
        up = True
    t = np.moveaxis(state.tensor().copy(), _axis(state.L, n), 0)
    t[0 if up else 1] = 0.0
    t /= np.sqrt(p_up if up else 1.0 - p_up)
    state.amplitudes = np.ascontiguousarray(np.moveaxis(t, 0, _axis(state.L, n))).reshape(-1)
    return (1 if up else -1), (p_up if up else 1.0 - p_up)


def dense_rdm(state: DenseState, sites) -> np.ndarray:
    """Partial trace onto ``sites``; local index packs sites[k] into bit k."""
    L = state.L
    sites = list(sites)
    front = [_axis(L, n) for n in reversed(sites)]
    t = np.moveaxis(state.tensor(), front, list(range(len(sites))))
    m = t.reshape(1 << len(sites), -1)
    return m @ m.conj().T


def dense_entropy(state: DenseState, sites) -> float:
    if len(sites) == 0:
        return 0.0
    lam = np.linalg.eigvalsh(dense_rdm(state, sites))
    lam = lam[lam > 1e-12]
    return float(-np.sum(lam * np.log(lam))) + 0.0


def dense_sz_variance(state: DenseState, sites, spin_units: str = "half") -> float:
    idx = np.arange(1 << state.L)
    m = np.zeros(1 << state.L)
    for n in sites:
        m += np.where((idx >> n) & 1, 0.5, -0.5)
    m *= SPIN_UNITS[spin_units]
    w = np.abs(state.amplitudes) ** 2
    w /= w.sum()
    mean = np.dot(w, m)
    return max(float(np.dot(w, (m - mean) ** 2)), 0.0)


def dense_observables(state: DenseState, partition, spin_units: str = "half") -> dict[str, float]:
    A = list(partition.A)
    if partition.B is None:
        return {ENTROPY: dense_entropy(state, A), VARIANCE: dense_sz_variance(state, A, spin_units)}
    B = list(partition.B)
    AB = sorted(A + B)
    return {
        MUTUAL_INFORMATION: dense_entropy(state, A) + dense_entropy(state, B) - dense_entropy(state, AB),
        MUTUAL_FLUCTUATION: dense_sz_variance(state, A, spin_units)
        + dense_sz_variance(state, B, spin_units)
        - dense_sz_variance(state, AB, spin_units),
    }


def dense_neel(L: int) -> DenseState:
    v = np.zeros(1 << L, dtype=complex)
    v[neel_pattern(L)] = 1.0
    return DenseState(L, v)


def sector_leakage(state: DenseState, n_up: int) -> float:
    """Total weight on basis states with a different number of up spins."""
    idx = np.arange(1 << state.L)
    pop = np.zeros(idx.shape, dtype=int)
    for n in range(state.L):
        pop += (idx >> n) & 1
    return float(np.sum(np.abs(state.amplitudes[pop != n_up]) ** 2))


def dense_reference_trajectory(config: CircuitConfig, trajectory_index: int = 0, track_leakage: bool = False):
    """Dense counterpart of :func:`fluctmipt.circuit.run_trajectory`.

    Returns a :class:`TrajectoryRecord` whose ``final_state`` is a
    :class:`DenseState`; with ``track_leakage`` also the largest
    out-of-sector weight seen after any half-cycle.
    """
    L = config.L
    if L > MAX_ORACLE_L:
        raise CapacityError(f"oracle supports L <= {MAX_ORACLE_L}, got {L}")
    stream = trajectory_stream(config.seed, trajectory_index)
    state = dense_neel(L)
    n_half = 2 * config.cycles
    half_cycles = np.arange(config.record_every, n_half + 1, config.record_every)
    samples = {(name, q.name): np.zeros(len(half_cycles)) for q in config.partitions for name in q.observables}
    events = []
    leak = 0.0
    row = 0
    for h in range(1, n_half + 1):
        pairs = layer_pairs(L, ODD if h % 2 else EVEN, config.boundary)
        params = sample_layer_params(stream, len(pairs), config.gate_measure)
        for (i, j), prm in zip(pairs, params):
            g = dense_gate(build_gate(GateParams(*prm.tolist())).matrix)
            apply_dense_gate(state, g, i, j)
        selected = [n for n, u in enumerate(stream.draw(L)) if u < config.p]
        for n, u in zip(selected, stream.draw(len(selected))):
            outcome, prob = dense_measure(state, n, u)
            events.append(MeasurementEvent(h, n, outcome, prob))
        if h % 2 == 0:
            state.amplitudes /= np.linalg.norm(state.amplitudes)
        if track_leakage:
            leak = max(leak, sector_leakage(state, L // 2))
        if h % config.record_every == 0:
            for q in config.partitions:
                for name, v in dense_observables(state, q, config.spin_units).items():
                    samples[(name, q.name)][row] = v
            row += 1
    rec = TrajectoryRecord(
        config=config,
        trajectory_index=trajectory_index,
        half_cycles=half_cycles,
        samples=samples,
        events=events,
        checksum="",
        draws=stream.count,
        final_state=state,
    )
    return (rec, leak) if track_leakage else rec


def compare_states(a, b, tol: float = 1e-10) -> StateComparison:
    """Distance between two states after aligning the global phase of ``b``.

    ``deviation`` is the Euclidean norm of the aligned difference and
    ``max_abs`` its largest entry; two orthogonal basis states give
    ``deviation = sqrt(2)``.
    """
    a = np.asarray(getattr(a, "amplitudes", a), dtype=complex)
    b = np.asarray(getattr(b, "amplitudes", b), dtype=complex)
    if a.shape != b.shape:
        raise ConfigurationError(f"state length mismatch: {a.shape} vs {b.shape}")
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0 + 0j
    d = a - phase * b
    return StateComparison(float(np.linalg.norm(d)), float(np.max(np.abs(d))), complex(phase), tol)


def check_partitions(L: int):
    parts = [resolve_partition("half_pbc", L), resolve_partition({"name": "pairs", "A": [0, 1], "B": [L // 2, L // 2 + 1]}, L)]
    if L % 4 == 0:
        parts.append(resolve_partition("quarters_pbc", L))
    return tuple(parts)


@dataclass(frozen=True)
class CheckRow:
    L: int
    p: float
    seed: int
    boundary: str
    state_deviation: float
    observable_deviation: float
    events_match: bool
    passed: bool


def run_check_suite(
    sizes=(4, 6, 8, 10),
    p_values=(0.0, 0.2, 1.0),
    seeds=(0, 1, 2),
    cycles: int = 10,
    boundaries=("periodic",),
    state_tol: float = 1e-10,
    obs_tol: float = 1e-9,
) -> list[CheckRow]:
    """Sector simulator vs. dense oracle on a grid of small circuits."""
    rows = []
    for L in sizes:
        for boundary in boundaries:
            for p in p_values:
                for seed in seeds:
                    cfg = CircuitConfig(L=L, p=p, cycles=cycles, warmup=0, boundary=boundary,
                                        partitions=check_partitions(L), seed=seed)
                    fast = run_trajectory(cfg, 0)
                    ref = dense_reference_trajectory(cfg, 0)
                    sd = compare_states(ref.final_state.amplitudes, expand_to_full(fast.final_state), state_tol).deviation
                    od = max(float(np.max(np.abs(fast.samples[k] - ref.samples[k]))) for k in ref.samples)
                    ev = [(e.half_cycle, e.site, e.outcome) for e in fast.events] == [
                        (e.half_cycle, e.site, e.outcome) for e in ref.events
                    ]
                    rows.append(CheckRow(L, p, seed, boundary, sd, od, ev, sd < state_tol and od < obs_tol and ev))
    return rows


def format_check_table(rows) -> str:
    lines = [f"{'L':>3} {'p':>5} {'seed':>4} {'boundary':>8} {'state_dev':>10} {'obs_dev':>10} {'events':>6}  result"]
    for r in rows:
        lines.append(
            f"{r.L:>3} {r.p:>5.2f} {r.seed:>4} {r.boundary:>8} {r.state_deviation:>10.2e} "
            f"{r.observable_deviation:>10.2e} {str(r.events_match):>6}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
