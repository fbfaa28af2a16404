import numpy as np
import pytest

from fluctmipt.circuit import CircuitConfig, run_trajectory
from fluctmipt.statevec import PureState, sector_basis


def random_sector_state(L, rng, n_up=None):
    basis = sector_basis(L, L // 2 if n_up is None else n_up)
    v = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    return PureState(basis, v / np.linalg.norm(v))


def trajectory_state(L, p=0.2, cycles=6, seed=3, index=0):
    cfg = CircuitConfig(L=L, p=p, cycles=cycles, warmup=0, seed=seed)
    return run_trajectory(cfg, index).final_state


def bell_pair():
    """(|up,down> + |down,up>)/sqrt(2) on L=2."""
    basis = sector_basis(2, 1)
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index_of(0b01)] = amps[basis.index_of(0b10)] = 1 / np.sqrt(2)
    return PureState(basis, amps)


@pytest.fixture
def rng():
    return np.random.default_rng(20221015)



PLANT_SIZES = (8, 12, 16, 20)
PLANT_P = tuple(round(0.025 * k, 3) for k in range(13))


def planted_points(p_c=0.15, nu=1.3, omega=0.0, noise=0.0, rng=None, offset=None,
                   sizes=PLANT_SIZES, p_grid=PLANT_P):
    """Rows (L, p, y, sigma) with y = L**-omega * tanh((p - p_c) * L**(1/nu)) + offset(L).

    sigma is ``noise`` times the range of the collapsed curve family, mapped
    back to raw units by L**-omega; with noise=0 a nominal 1e-3 is used.
    """
    L, p = (a.ravel() for a in np.meshgrid(np.asarray(sizes, float), np.asarray(p_grid, float), indexing="ij"))
    f = np.tanh((p - p_c) * L ** (1.0 / nu))
    y = L**-omega * f
    if offset is not None:
        y = y + np.array([offset(v) for v in L])
    rel = noise * np.ptp(f) if noise else 1e-3
    sigma = rel * L**-omega
    if noise:
        y = y + sigma * rng.standard_normal(len(y))
    return np.column_stack([L, p, y, sigma])


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
