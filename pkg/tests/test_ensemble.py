import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluctmipt.circuit import CircuitConfig, TrajectoryRecord, with_partitions
from fluctmipt.ensemble import (
    CSV_COLUMNS,
    EnsembleStatistics,
    SweepResult,
    bootstrap_stderr,
    rank_correlations,
    read_csv,
    run_ensemble,
    run_sweep,
    series_rows,
    steady_state_average,
    write_csv,
    write_series_csv,
)
from fluctmipt.errors import ConfigurationError

KEY = ("entropy", "half_pbc")


def _record(values, record_every=2, cycles=200):
    cfg = CircuitConfig(L=8, p=0.0, cycles=cycles, warmup=100, record_every=record_every)
    hc = np.arange(record_every, 2 * cycles + 1, record_every)
    return TrajectoryRecord(cfg, 0, hc, {KEY: np.asarray(values(hc / 2.0), dtype=float)}, [], "")


# ---- window averages -------------------------------------------------------

def test_constant_series():
    rec = _record(lambda t: np.full_like(t, 0.7133))
    assert steady_state_average(rec, (100, 200))[KEY] == 0.7133


def test_window_counts_inclusive_endpoints():
    rec = _record(lambda t: t)
    sel = (rec.times >= 100) & (rec.times <= 200)
    assert sel.sum() == 101


@pytest.mark.parametrize("a,window", [(0.3, (100, 200)), (-1.7, (20, 150)), (2.5, (1, 200))])
def test_linear_series(a, window):
    rec = _record(lambda t: a * t)
    got = steady_state_average(rec, window)[KEY]
    assert abs(got - a * (window[0] + window[1]) / 2) < 1e-12


@pytest.mark.parametrize("window", [(150, 120), (100, 250), (-1, 10), (10.2, 10.4)])
def test_bad_windows(window):
    with pytest.raises(ConfigurationError):
        steady_state_average(_record(lambda t: t), window)


# ---- ensembles -------------------------------------------------------------

def _cfg(L=8, p=0.2, cycles=20, warmup=10, **kw):
    return with_partitions(CircuitConfig(L=L, p=p, cycles=cycles, warmup=warmup, seed=4, **kw),
                           ["half_pbc", "quarters_pbc"])


def test_p1_ensemble_is_exactly_zero():
    st_ = run_ensemble(_cfg(p=1.0, cycles=8, warmup=2), 10)
    for k in st_.keys:
        assert st_.mean(k) == 0.0 and st_.std(k) == 0.0


def test_stderr_definition():
    st_ = run_ensemble(_cfg(), 6)
    for k in st_.keys:
        assert abs(st_.stderr(k) - st_.std(k) / np.sqrt(6)) < 1e-12
        assert st_.std(k) == float(np.std(st_.per_trajectory[k], ddof=1))


def test_duplicated_trajectory_has_zero_spread():
    cfg = _cfg()
    a = run_ensemble(cfg, 2, first_index=5)
    b = run_ensemble(cfg, 2, first_index=6)
    dup = EnsembleStatistics(cfg, a.window, {KEY: np.array([a.per_trajectory[KEY][0]] * 2)})
    assert dup.std(KEY) == 0.0
    assert a.per_trajectory[KEY][1] == b.per_trajectory[KEY][0]


def test_ensemble_requires_two():
    with pytest.raises(ConfigurationError):
        run_ensemble(_cfg(), 1)


def test_deterministic_across_workers():
    cfg = _cfg(cycles=12, warmup=4)
    a = run_ensemble(cfg, 6, workers=1)
    b = run_ensemble(cfg, 6, workers=2)
    assert write_csv(a.rows()) == write_csv(b.rows())
    for k in a.keys:
        np.testing.assert_array_equal(a.per_trajectory[k], b.per_trajectory[k])


def test_low_p_has_more_entanglement():
    lo = run_ensemble(_cfg(p=0.05, cycles=40, warmup=20), 50)
    hi = run_ensemble(_cfg(p=0.5, cycles=40, warmup=20), 50)
    assert lo.mean(KEY) > hi.mean(KEY)


def test_series_rows_and_bands():
    st_ = run_ensemble(_cfg(cycles=6, warmup=2), 4, keep_series=True)
    rows = series_rows(st_)
    assert len(rows) == 4 * 6  # four keys, six recorded cycles
    r0 = [r for r in rows if (r["observable"], r["partition"]) == KEY]
    np.testing.assert_array_equal([r["trajectory0"] for r in r0], st_.series[KEY][0])
    text = write_series_csv(rows)
    assert text.startswith("# fluctmipt schema_version=1\nL,p,observable,partition,half_cycle")


def test_bootstrap_stderr_close_to_analytic():
    v = np.random.default_rng(2).normal(size=400)
    assert abs(bootstrap_stderr(v, 400) - v.std(ddof=1) / 20) < 0.01


def test_sweep_axes_and_curve():
    base = _cfg(cycles=6, warmup=2)
    res = run_sweep(base, (4, 8), (0.1, 0.3), 2, partitions=["half_pbc"])
    p, m, s = res.curve(4, KEY)
    assert p.tolist() == [0.1, 0.3] and m.shape == (2,)
    assert len(res.rows()) == 2 * 2 * 2
    with pytest.raises(ConfigurationError):
        SweepResult((0.2, 0.1), (4,), {})


# ---- rank correlations -----------------------------------------------------

def _avg_ranks(v):
    v = np.asarray(v, float)
    r = np.empty(len(v))
    for i, x in enumerate(v):
        r[i] = (v < x).sum() + ((v == x).sum() + 1) / 2
    return r


def _spearman_oracle(x, y):
    return float(np.corrcoef(_avg_ranks(x), _avg_ranks(y))[0, 1])


def _kendall_b_oracle(x, y):
    nc = nd = tx = ty = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif dx == dy:
            nc += 1
        else:
            nd += 1
    return (nc - nd) / np.sqrt((nc + nd + tx) * (nc + nd + ty))


@pytest.mark.parametrize(
    "xs,ys,expected",
    [([1, 2, 3], [2, 4, 9], (1.0, 1.0)), ([1, 2, 3], [9, 4, 2], (-1.0, -1.0)), ([1, 2, 3, 4], [1, 3, 2, 4], (0.8, 2 / 3))],
)
def test_rank_correlation_examples(xs, ys, expected):
    rho, tau = rank_correlations(xs, ys)
    assert rho == pytest.approx(expected[0], abs=1e-12)
    assert tau == pytest.approx(expected[1], abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=12))
def test_rank_correlations_match_brute_force(pairs):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    rho, tau = rank_correlations(x, y)
    assert rho == pytest.approx(_spearman_oracle(x, y), abs=1e-12)
    assert tau == pytest.approx(_kendall_b_oracle(x, y), abs=1e-12)
    assert -1 <= rho <= 1 and -1 <= tau <= 1


def test_rank_correlation_errors():
    with pytest.raises(ConfigurationError):
        rank_correlations([1, 2, 3], [1, 2])
    with pytest.raises(ConfigurationError):
        rank_correlations([1, 2], [1, 2])


# ---- CSV -------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    st_ = run_ensemble(_cfg(cycles=6, warmup=2), 3)
    path = tmp_path / "e.csv"
    text = write_csv(st_.rows(), path)
    lines = text.splitlines()
    assert lines[0] == "# fluctmipt schema_version=1"
    assert lines[1] == ",".join(CSV_COLUMNS)
    back = read_csv(path)
    assert back == st_.rows()
    assert write_csv(back) == text
