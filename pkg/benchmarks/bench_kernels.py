"""Compiled kernels vs. the numpy fallback.

    python benchmarks/bench_kernels.py [--L 16] [--repeat 5]

Times one brickwork gate layer, one measurement (probability plus
projection), and a 41x41 collapse-cost grid, for each backend that is
available, and prints per-call times and the speedup.
"""

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

from fluctmipt import _pykernels
from fluctmipt.circuit import EVEN, ODD, layer_pairs
from fluctmipt.gates import gate_coefficients, sample_layer_params
from fluctmipt.rng import Stream
from fluctmipt.scaling import CollapseInput

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import planted_points, random_sector_state  # noqa: E402

try:
    from fluctmipt import _core
except ImportError:
    _core = None


def cases(L: int):
    rng = np.random.default_rng(0)
    state = random_sector_state(L, rng)
    basis = state.basis
    pairs = layer_pairs(L, ODD) + layer_pairs(L, EVEN)
    tables = [basis.pair_tables(i, j) for i, j in pairs]
    coeffs = gate_coefficients(sample_layer_params(Stream(0, 0), len(pairs)))
    data = CollapseInput.from_points(planted_points(noise=0.05, rng=rng))
    grid = np.linspace(0.05, 0.3, 41)
    pcs, nus = np.repeat(grid, 41), np.tile(np.linspace(0.5, 3.0, 41), 41)
    args = data.kernel_args()

    def make(k):
        psi = state.amplitudes.copy()

        def gates():
            for t, c in zip(tables, coeffs):
                k.apply_gate(psi, *t, c)

        def measure():
            for n in range(L):
                p = k.prob_up(psi, basis.states, n)
                k.project(psi, basis.states, n, p >= 0.5, 1.0)

        def collapse():
            k.collapse_cost_grid(pcs, nus, *args)

        return {"gate layer pair": gates, f"{L} measurements": measure, "collapse grid 41x41": collapse}

    out = {"python": make(_pykernels)}
    if _core is not None:
        out["cython"] = make(_core)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    table = {}
    for backend, fns in cases(args.L).items():
        for name, fn in fns.items():
            n, _ = timeit.Timer(fn).autorange()
            best = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
            table.setdefault(name, {})[backend] = best

    print(f"L={args.L}, sector dim {random_sector_state(args.L, np.random.default_rng(0)).basis.dim}")
    print(f"{'kernel':<22}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, row in table.items():
        py, cy = row["python"], row.get("cython")
        cy_s = f"{cy * 1e3:>10.3f}ms" if cy else f"{'n/a':>12}"
        sp = f"{py / cy:>9.1f}x" if cy else f"{'':>10}"
        print(f"{name:<22}{py * 1e3:>10.3f}ms{cy_s}{sp}")


if __name__ == "__main__":
    main()
