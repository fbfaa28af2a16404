"""Finite-size scaling collapse.

Each point (L, p, y, sigma) is mapped to

    x = (p - p_c) * L**(1/nu),    Y = (y - y_c(L)) * L**omega

where ``y_c(L)`` is that size's curve linearly interpolated at ``p_c`` when
``subtract_critical`` is set, and 0 otherwise. The cost of a candidate
``(p_c, nu)`` is the mean over points of ``(Y - Yhat)**2 / (sigma L**omega)**2``
with ``Yhat`` the average of the piecewise-linear curves of all *other* sizes
at ``x``; sizes whose x-range does not cover the point are skipped, and points
covered by no other size are left out of the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import ConfigurationError, DegenerateCollapseError, FitFailure


@dataclass(frozen=True, eq=False)
class CollapseInput:
    L: np.ndarray
    p: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    size_exponent: float = 0.0
    subtract_critical: bool = False

    @classmethod
    def from_points(
        cls,
        points: Iterable[Sequence[float]],
        size_exponent: float = 0.0,
        subtract_critical: bool = False,
    ) -> "CollapseInput":
        arr = np.array([tuple(map(float, q)) for q in points], dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], float(size_exponent), bool(subtract_critical))

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float).ravel() for c in (self.L, self.p, self.y, self.sigma)]
        if len({len(c) for c in cols}) != 1:
            raise ConfigurationError("L, p, y, sigma must have equal lengths")
        # canonical order makes every downstream result independent of input order
        order = np.lexsort((cols[3], cols[2], cols[1], cols[0]))
        for name, c in zip(("L", "p", "y", "sigma"), cols):
            object.__setattr__(self, name, c[order])
        sizes = np.unique(self.L)
        if len(sizes) < 2:
            raise DegenerateCollapseError("collapse needs at least two system sizes")
        if len(sizes) < 3:
            raise ConfigurationError(f"collapse needs >= 3 distinct sizes, got {sizes.tolist()}")
        for L in sizes:
            if len(np.unique(self.p[self.L == L])) < 5:
                raise ConfigurationError(f"size L={L:g} has fewer than 5 distinct p values")
        if not np.all(self.sigma > 0):
            raise ConfigurationError("all sigma must be > 0")
        if not np.all(np.isfinite(self.y)):
            raise ConfigurationError("y values must be finite")

    @property
    def sizes(self) -> np.ndarray:
        return np.unique(self.L)

    def kernel_args(self) -> tuple:
        """Arrays in the layout expected by ``kernels.collapse_cost_grid``."""
        sizes = self.sizes
        pt_off = np.searchsorted(self.L, np.append(sizes, np.inf)).astype(np.intp)
        node_p, node_y, node_off = [], [], [0]
        for g in range(len(sizes)):
            sl = slice(pt_off[g], pt_off[g + 1])
            up, inv = np.unique(self.p[sl], return_inverse=True)
            ys = np.bincount(inv, weights=self.y[sl]) / np.bincount(inv)
            node_p.append(up)
            node_y.append(ys)
            node_off.append(node_off[-1] + len(up))
        return (
            float(self.size_exponent),
            bool(self.subtract_critical),
            np.ascontiguousarray(sizes),
            np.ascontiguousarray(self.p),
            np.ascontiguousarray(self.y),
            np.ascontiguousarray(1.0 / self.sigma**2),
            pt_off,
            np.concatenate(node_p),
            np.concatenate(node_y),
            np.array(node_off, dtype=np.intp),
        )

    def resampled(self, rng: np.random.Generator) -> "CollapseInput":
        """Parametric resample: y -> y + sigma * N(0, 1)."""
        return CollapseInput(
            self.L, self.p, self.y + self.sigma * rng.standard_normal(len(self.y)),
            self.sigma, self.size_exponent, self.subtract_critical,
        )


@dataclass
class CollapseFit:
    p_c: float
    nu: float
    quality: float
    n_evals: int
    grid_best: tuple[float, float]
    grid_pc: np.ndarray = field(repr=False)
    grid_nu: np.ndarray = field(repr=False)
    grid_cost: np.ndarray = field(repr=False)
    trace: list[tuple[float, float, float]] = field(default_factory=list, repr=False)
    pc_interval: tuple[float, float] | None = None
    nu_interval: tuple[float, float] | None = None
    bootstrap_samples: np.ndarray | None = field(default=None, repr=False)


def cost_many(data: CollapseInput, pcs, nus) -> np.ndarray:
    pcs = np.ascontiguousarray(pcs, dtype=float).ravel()
    nus = np.ascontiguousarray(nus, dtype=float).ravel()
    return np.asarray(kernels.collapse_cost_grid(pcs, nus, *data.kernel_args()))


def collapse_cost(data: CollapseInput, p_c: float, nu: float) -> float:
    if not nu > 0:
        raise ConfigurationError(f"nu must be > 0, got {nu}")
    c = float(cost_many(data, [p_c], [nu])[0])
    if np.isnan(c):
        raise DegenerateCollapseError("no point overlaps another size in x")
    return c


def fit_collapse(
    data: CollapseInput,
    pc_range: tuple[float, float],
    nu_range: tuple[float, float],
    grid: int = 41,
    max_evals: int = 500,
    xtol: float = 1e-4,
) -> CollapseFit:
    """Grid scan over the box, then bounded Nelder-Mead from the best cell.

    The refinement works in box-normalized coordinates so ``xtol`` is
    relative to the box size.
    """
    (a0, a1), (b0, b1) = map(tuple, (pc_range, nu_range))
    if not (a0 < a1 and 0 < b0 < b1):
        raise ConfigurationError(f"invalid search box p_c={pc_range}, nu={nu_range}")
    args = data.kernel_args()
    pcs = np.linspace(a0, a1, grid)
    nus = np.linspace(b0, b1, grid)
    PC, NU = np.meshgrid(pcs, nus, indexing="ij")
    costs = np.asarray(kernels.collapse_cost_grid(PC.ravel(), NU.ravel(), *args)).reshape(grid, grid)
    if not np.isfinite(costs).any():
        raise FitFailure("collapse cost is non-finite over the whole grid")
    i, j = np.unravel_index(np.nanargmin(np.where(np.isfinite(costs), costs, np.nan)), costs.shape)
    best = (pcs[i], nus[j])

    da, db = a1 - a0, b1 - b0
    trace: list[tuple[float, float, float]] = []

    def f(u):
        pc, nu = a0 + u[0] * da, b0 + u[1] * db
        c = float(kernels.collapse_cost_grid(np.array([pc]), np.array([nu]), *args)[0])
        c = c if np.isfinite(c) else np.inf
        trace.append((pc, nu, c))
        return c

    u0 = np.array([(best[0] - a0) / da, (best[1] - b0) / db])
    step = 1.0 / max(grid - 1, 1)
    simplex = np.array([u0, u0 + [step, 0.0], u0 + [0.0, step]])
    simplex = np.where(simplex > 1.0, simplex - 2 * step, simplex)
    res = minimize(
        f,
        u0,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0), (0.0, 1.0)],
        options={
            "initial_simplex": simplex,
            "xatol": xtol,
            "fatol": np.inf,  # terminate on the box-relative x tolerance alone
            "maxfev": max_evals,
        },
    )
    pc, nu, q = a0 + res.x[0] * da, b0 + res.x[1] * db, float(res.fun)
    if not q <= costs[i, j]:
        pc, nu, q = best[0], best[1], float(costs[i, j])
    return CollapseFit(
        p_c=float(pc),
        nu=float(nu),
        quality=q,
        n_evals=grid * grid + len(trace),
        grid_best=(float(best[0]), float(best[1])),
        grid_pc=pcs,
        grid_nu=nus,
        grid_cost=costs,
        trace=trace,
    )


def bootstrap_collapse(
    data: CollapseInput,
    pc_range: tuple[float, float],
    nu_range: tuple[float, float],
    n_resamples: int = 100,
    level: float = 0.95,
    seed: int = 0,
    grid: int = 41,
    fit: CollapseFit | None = None,
) -> CollapseFit:
    """Fit plus percentile intervals from parametric resampling of y."""
    fit = fit if fit is not None else fit_collapse(data, pc_range, nu_range, grid=grid)
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_resamples):
        try:
            f = fit_collapse(data.resampled(rng), pc_range, nu_range, grid=grid)
        except (FitFailure, DegenerateCollapseError):
            continue
        samples.append((f.p_c, f.nu))
    if not samples:
        raise FitFailure("every bootstrap refit failed")
    s = np.array(samples)
    lo, hi = 50 * (1 - level), 50 * (1 + level)
    fit.pc_interval = tuple(float(v) for v in np.percentile(s[:, 0], [lo, hi]))
    fit.nu_interval = tuple(float(v) for v in np.percentile(s[:, 1], [lo, hi]))
    fit.bootstrap_samples = s
    return fit


def scaled_points(data: CollapseInput, p_c: float, nu: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, Y, L) after the collapse transform, in canonical point order."""
    x = (data.p - p_c) * data.L ** (1.0 / nu)
    Y = data.y.copy()
    if data.subtract_critical:
        _, _, sizes, _, _, _, _, node_p, node_y, node_off = data.kernel_args()
        for g, L in enumerate(sizes):
            yc = np.interp(p_c, node_p[node_off[g]:node_off[g + 1]], node_y[node_off[g]:node_off[g + 1]])
            Y[data.L == L] -= yc
    return x, Y * data.L**data.size_exponent, data.L.copy()
