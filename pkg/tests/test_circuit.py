import io
import itertools
from math import log

import numpy as np
import pytest

from fluctmipt.circuit import (
    EVEN,
    ODD,
    CircuitConfig,
    layer_pairs,
    read_log,
    replay_trajectory,
    run_half_cycle,
    run_trajectory,
    state_checksum,
    with_partitions,
    write_log,
)
from fluctmipt.errors import ConfigurationError
from fluctmipt.observables import evaluate, partition_preset
from fluctmipt.rng import Stream
from fluctmipt.statevec import entanglement_entropy, neel_state, project_site, sz_moments
from fluctmipt import kernels

from conftest import trajectory_state


def _cfg(**kw):
    base = dict(L=8, p=0.2, cycles=10, warmup=2, partitions=(partition_preset("half_pbc", kw.get("L", 8)),))
    base.update(kw)
    return CircuitConfig(**base)


# ---- scheduling ------------------------------------------------------------

def test_layer_pairs_periodic_and_open():
    assert layer_pairs(8, ODD) == [(0, 1), (2, 3), (4, 5), (6, 7)]
    assert layer_pairs(8, EVEN) == [(1, 2), (3, 4), (5, 6), (7, 0)]
    assert layer_pairs(8, EVEN, "open") == [(1, 2), (3, 4), (5, 6)]
    assert layer_pairs(8, ODD, "open") == layer_pairs(8, ODD)


@pytest.mark.parametrize(
    "kw",
    [dict(L=7), dict(L=2), dict(p=1.5), dict(warmup=10), dict(boundary="twisted"),
     dict(record_every=0), dict(spin_units="x"), dict(gate_measure="cue")],
)
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        _cfg(**kw)


def test_config_dict_round_trip():
    cfg = with_partitions(_cfg(L=8), ["half_pbc", "quarters_pbc", {"name": "x", "A": [0], "B": [3]}])
    assert CircuitConfig.from_dict(cfg.to_dict()) == cfg


# ---- half-cycle ------------------------------------------------------------

def test_p0_half_cycle_no_events():
    cfg = _cfg(p=0.0)
    s = neel_state(8)
    for h in range(1, 9):
        _, ev = run_half_cycle(s, ODD if h % 2 else EVEN, cfg, Stream(3, 0), h)
        assert ev == []
        assert abs(s.norm_sq() - 1) < 1e-12


def test_p1_half_cycle_projects_to_basis_state():
    cfg = _cfg(p=1.0)
    s = trajectory_state(8, p=0.0, cycles=4)
    _, ev = run_half_cycle(s, ODD, cfg, Stream(5, 0), 1)
    assert [e.site for e in ev] == list(range(8))
    assert np.count_nonzero(np.abs(s.amplitudes) > 1e-12) == 1
    for A in [(0,), (0, 1, 2, 3), (2, 5)]:
        assert entanglement_entropy(s, A) < 1e-12
        assert sz_moments(s, A)[1] < 1e-12


def _force(state, sites_outcomes):
    for n, out in sites_outcomes:
        p_up = min(max(kernels.prob_up(state.amplitudes, state.basis.states, n), 0.0), 1.0)
        up = out == 1
        project_site(state, n, up, p_up if up else 1.0 - p_up)
    state.renormalize()
    return state


@pytest.mark.parametrize("seed", range(4))
def test_measurement_order_invariance(seed):
    s = trajectory_state(10, p=0.0, cycles=6, seed=seed)
    rng = np.random.default_rng(seed)
    sites = sorted(rng.choice(10, size=4, replace=False).tolist())
    # choose outcomes that have non-zero weight in sequence
    ref = s.copy()
    outs = []
    for n in sites:
        p_up = kernels.prob_up(ref.amplitudes, ref.basis.states, n)
        o = 1 if p_up > 0.5 else -1
        outs.append((n, o))
        _force(ref, [(n, o)])
    for perm in itertools.permutations(outs):
        other = _force(s.copy(), perm)
        assert np.max(np.abs(other.amplitudes - ref.amplitudes)) < 1e-12


# ---- trajectories ----------------------------------------------------------

def test_p1_trajectory_all_zero():
    cfg = _cfg(p=1.0, cycles=5, partitions=(partition_preset("half_pbc", 8), partition_preset("quarters_pbc", 8)))
    rec = run_trajectory(cfg)
    assert len(rec.half_cycles) == 5
    for v in rec.samples.values():
        assert np.all(np.abs(v) < 1e-12)
    # every site measured in every half-cycle
    assert len(rec.events) == 8 * 10


def test_sample_count_rule():
    for every in (1, 2, 3, 7):
        rec = run_trajectory(_cfg(cycles=10, record_every=every))
        assert len(rec.half_cycles) == (2 * 10) // every


def test_p0_entropy_growth_and_bounds():
    rec = run_trajectory(_cfg(p=0.0, cycles=200, warmup=100))
    s = rec.samples[("entropy", "half_pbc")]
    t = rec.times
    assert s.min() >= 0 and s.max() <= 4 * log(2)
    assert s[t > 150].mean() > s[t <= 5].mean()


def test_p0_norm_preserved_400_half_cycles():
    rec = run_trajectory(_cfg(p=0.0, cycles=200, warmup=0, partitions=()))
    assert rec.events == []
    # renormalization only divides by the current norm; check the pre-renorm drift
    s = neel_state(8)
    cfg = _cfg(p=0.0)
    stream = Stream(cfg.seed, 0)
    for h in range(1, 401):
        run_half_cycle(s, ODD if h % 2 else EVEN, cfg, stream, h)
    assert abs(s.norm_sq() - 1) < 1e-10


def test_determinism():
    cfg = _cfg(p=0.3, cycles=20)
    a, b = run_trajectory(cfg, 3), run_trajectory(cfg, 3)
    assert a.same_as(b)
    assert not a.same_as(run_trajectory(cfg, 4))


@pytest.mark.parametrize("p,boundary", [(0.1, "periodic"), (0.4, "periodic"), (0.3, "open")])
def test_replay_reproduces_checksum(p, boundary):
    cfg = _cfg(p=p, cycles=25, boundary=boundary)
    rec = run_trajectory(cfg, 2)
    assert rec.events
    assert state_checksum(replay_trajectory(cfg, 2, rec.events)) == rec.checksum


@pytest.mark.parametrize("boundary", ["periodic", "open"])
def test_draw_accounting(boundary):
    cfg = _cfg(p=0.25, cycles=12, boundary=boundary)
    rec = run_trajectory(cfg, 1)
    gates = 12 * (len(layer_pairs(8, ODD, boundary)) + len(layer_pairs(8, EVEN, boundary)))
    assert rec.draws == 6 * gates + 8 * 24 + len(rec.events)


def test_measured_fraction_binomial():
    p, L, cycles = 0.3, 8, 100
    rec = run_trajectory(_cfg(p=p, L=L, cycles=cycles, partitions=()))
    n = L * 2 * cycles
    frac = len(rec.events) / n
    assert abs(frac - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_event_probabilities_valid():
    rec = run_trajectory(_cfg(p=0.5, cycles=20))
    assert all(0 < e.prob <= 1 for e in rec.events)
    assert all(e.outcome in (1, -1) for e in rec.events)


def test_open_boundary_differs_from_periodic():
    a = run_trajectory(_cfg(p=0.0, cycles=5))
    b = run_trajectory(_cfg(p=0.0, cycles=5, boundary="open"))
    assert a.checksum != b.checksum


def test_recorded_values_match_direct_evaluation():
    cfg = _cfg(p=0.2, cycles=6, record_every=12)
    rec = run_trajectory(cfg)
    direct = evaluate(rec.final_state, cfg.partitions[0])
    assert rec.samples[("entropy", "half_pbc")][-1] == direct["entropy"]
    assert rec.samples[("variance", "half_pbc")][-1] == direct["variance"]


def test_window_restricts_recording_only():
    cfg = _cfg(p=0.2, cycles=10)
    full = run_trajectory(cfg, 0)
    part = run_trajectory(cfg, 0, window=(4, 8))
    assert part.checksum == full.checksum
    np.testing.assert_array_equal(part.half_cycles, np.arange(8, 17, 2))
    sel = np.isin(full.half_cycles, part.half_cycles)
    for k, v in part.samples.items():
        np.testing.assert_array_equal(v, full.samples[k][sel])


# ---- log -------------------------------------------------------------------

def test_log_round_trip(tmp_path):
    cfg = with_partitions(_cfg(p=0.3, cycles=8), ["half_pbc", "quarters_pbc"])
    rec = run_trajectory(cfg, 5)
    path = tmp_path / "traj.log"
    write_log(rec, path)
    back = read_log(path)
    assert back.same_as(rec)
    assert back.draws == rec.draws
    buf = io.StringIO()
    write_log(back, buf)
    assert buf.getvalue() == path.read_text()
    assert state_checksum(replay_trajectory(back.config, back.trajectory_index, back.events)) == rec.checksum
