from math import log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluctmipt.errors import CapacityError, ConfigurationError
from fluctmipt.observables import (
    Partition,
    evaluate,
    mutual_fluctuation,
    mutual_information,
    partition_preset,
    sz_covariance,
)
from fluctmipt.oracle import DenseState, dense_entropy, dense_sz_variance
from fluctmipt.statevec import entanglement_entropy, expand_to_full, neel_state, sz_moments

from conftest import bell_pair, random_sector_state, trajectory_state


def test_product_state_zero_correlations():
    s = neel_state(8)
    for A, B in [((0,), (1,)), ((0, 1), (4, 5)), ((2, 3, 4), (7,))]:
        assert abs(mutual_information(s, A, B)) < 1e-12
        assert abs(mutual_fluctuation(s, A, B)) < 1e-12


def test_bell_pair_values():
    s = bell_pair()
    assert abs(mutual_information(s, [0], [1]) - 2 * log(2)) < 1e-12
    assert abs(mutual_fluctuation(s, [0], [1]) - 0.5) < 1e-15
    assert abs(mutual_fluctuation(s, [0], [1], "pauli") - 2.0) < 1e-14


def _dense_mi(s, A, B):
    d = DenseState(s.L, expand_to_full(s))
    return dense_entropy(d, A) + dense_entropy(d, B) - dense_entropy(d, sorted(A + B))


@pytest.mark.parametrize("A,B", [((0, 1), (4, 5)), ((0,), (7,)), ((1, 2, 3), (5, 6))])
def test_mutual_information_matches_dense(A, B):
    s = trajectory_state(8, p=0.15, cycles=12)
    assert abs(mutual_information(s, A, B) - _dense_mi(s, list(A), list(B))) < 1e-10


def test_mutual_fluctuation_matches_dense():
    s = trajectory_state(8, p=0.15, cycles=12)
    d = DenseState(8, expand_to_full(s))
    A, B = [0, 1], [4, 5]
    ref = dense_sz_variance(d, A) + dense_sz_variance(d, B) - dense_sz_variance(d, A + B)
    assert abs(mutual_fluctuation(s, A, B) - ref) < 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), data=st.data())
def test_fluctuation_equals_minus_two_covariance(seed, data):
    s = random_sector_state(8, np.random.default_rng(seed))
    A = data.draw(st.sets(st.integers(0, 7), min_size=1, max_size=6))
    B = data.draw(st.sets(st.integers(0, 7).filter(lambda n: n not in A), min_size=1, max_size=8 - len(A)))
    for units in ("half", "pauli"):
        f = mutual_fluctuation(s, sorted(A), sorted(B), units)
        assert abs(f + 2 * sz_covariance(s, sorted(A), sorted(B), units)) < 1e-12


def test_symmetry_in_arguments(rng):
    s = random_sector_state(10, rng)
    A, B = (0, 3, 4), (6, 9)
    assert mutual_information(s, A, B) == mutual_information(s, B, A)
    assert mutual_fluctuation(s, A, B) == mutual_fluctuation(s, B, A)


@pytest.mark.parametrize("A", [(0,), (0, 1, 2), (1, 4, 5, 8), tuple(range(5))])
def test_complement_pair_identities(rng, A):
    s = random_sector_state(10, rng)
    comp = tuple(n for n in range(10) if n not in A)
    assert abs(mutual_information(s, A, comp) - 2 * entanglement_entropy(s, A)) < 1e-9
    assert abs(mutual_fluctuation(s, A, comp) - 2 * sz_moments(s, A)[1]) < 1e-12


def test_mutual_information_nonnegative(rng):
    for _ in range(20):
        s = random_sector_state(8, rng)
        assert mutual_information(s, (0, 1), (5,)) >= 0.0


def test_overlap_and_capacity_errors():
    s = neel_state(16)
    with pytest.raises(ConfigurationError):
        mutual_information(s, (0, 1), (1, 2))
    with pytest.raises(ConfigurationError):
        mutual_fluctuation(s, (0,), (0,))
    with pytest.raises(CapacityError):
        mutual_information(s, tuple(range(8)), tuple(range(8, 15)))
    with pytest.raises(ConfigurationError):
        Partition("bad", (0, 1), (1,))


def test_presets():
    assert partition_preset("half_pbc", 16).A == tuple(range(8))
    q = partition_preset("quarters_pbc", 16)
    assert q.A == (0, 1, 2, 3) and q.B == (8, 9, 10, 11)
    e = partition_preset("edge_pairs_obc", 8)
    assert e.A == (0, 1) and e.B == (6, 7)


@pytest.mark.parametrize("kind,L", [("quarters_pbc", 10), ("edge_pairs_obc", 4), ("thirds", 12)])
def test_preset_errors(kind, L):
    with pytest.raises(ConfigurationError):
        partition_preset(kind, L)


def test_partition_validate_and_dict():
    p = Partition("q", (3, 1), (5,)).validate(8)
    assert p.A == (1, 3)
    assert p.to_dict() == {"name": "q", "A": [1, 3], "B": [5]}
    with pytest.raises(ConfigurationError):
        Partition("q", (8,)).validate(8)


def test_evaluate_keys(rng):
    s = random_sector_state(8, rng)
    assert set(evaluate(s, partition_preset("half_pbc", 8))) == {"entropy", "variance"}
    assert set(evaluate(s, partition_preset("quarters_pbc", 8))) == {"mutual_information", "mutual_fluctuation"}
