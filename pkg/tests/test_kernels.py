"""The compiled kernels and the numpy fallback must agree."""

import os

import numpy as np
import pytest

from fluctmipt import _pykernels, kernels
from fluctmipt.gates import gate_coefficients, sample_layer_params
from fluctmipt.rng import Stream
from fluctmipt.scaling import CollapseInput
from fluctmipt.statevec import sector_basis

from conftest import planted_points, random_sector_state

core = pytest.importorskip("fluctmipt._core")


@pytest.mark.skipif(os.environ.get("FLUCTMIPT_BACKEND") == "python", reason="fallback forced")
def test_backend_selected():
    assert kernels.BACKEND == "cython"
    assert kernels.apply_gate is core.apply_gate


@pytest.mark.parametrize("i,j", [(0, 1), (5, 6), (9, 0)])
def test_apply_gate_parity(rng, i, j):
    s = random_sector_state(10, rng)
    c = gate_coefficients(sample_layer_params(Stream(1, 2), 1))[0]
    tables = sector_basis(10, 5).pair_tables(i, j)
    a, b = s.amplitudes.copy(), s.amplitudes.copy()
    core.apply_gate(a, *tables, c)
    _pykernels.apply_gate(b, *tables, c)
    assert np.max(np.abs(a - b)) < 1e-14


@pytest.mark.parametrize("site", [0, 3, 9])
def test_measurement_kernels_parity(rng, site):
    s = random_sector_state(10, rng)
    st = s.basis.states
    assert core.prob_up(s.amplitudes, st, site) == pytest.approx(_pykernels.prob_up(s.amplitudes, st, site), abs=1e-14)
    assert core.norm_sq(s.amplitudes) == pytest.approx(_pykernels.norm_sq(s.amplitudes), abs=1e-14)
    for up in (True, False):
        a, b = s.amplitudes.copy(), s.amplitudes.copy()
        core.project(a, st, site, up, 1.7)
        _pykernels.project(b, st, site, up, 1.7)
        assert np.max(np.abs(a - b)) < 1e-14


@pytest.mark.parametrize("omega,subtract", [(0.0, False), (4.0, False), (0.0, True)])
def test_collapse_grid_parity(omega, subtract):
    data = CollapseInput.from_points(
        planted_points(omega=omega, noise=0.05, rng=np.random.default_rng(2)), omega, subtract
    )
    pcs = np.linspace(0.02, 0.35, 9).repeat(9)
    nus = np.tile(np.linspace(0.4, 3.0, 9), 9)
    a = np.asarray(core.collapse_cost_grid(pcs, nus, *data.kernel_args()))
    b = np.asarray(_pykernels.collapse_cost_grid(pcs, nus, *data.kernel_args()))
    np.testing.assert_allclose(a, b, rtol=1e-11, equal_nan=True)
