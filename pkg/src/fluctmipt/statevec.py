"""Pure states restricted to a fixed-magnetization sector.

Bit convention: site ``n`` is bit ``n`` of the integer pattern (site 0 is the
least significant bit) and a set bit means spin up (charge 1). The sector with
``n_up`` up spins is stored as the sorted list of all L-bit patterns with
``n_up`` set bits, and amplitudes live in a dense vector indexed by position
in that list.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, log
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import CapacityError, ConfigurationError, NumericalError
from .gates import TwoQubitGate, check_gate

MIN_L, MAX_L = 2, 24
MAX_DM_SITES = 14
MAX_FULL_L = 14
SPIN_UNITS = {"half": 1.0, "pauli": 2.0}

# Eigenvalues at or below this are treated as exact zeros in entropies.
EIG_ZERO = 1e-12
# Eigenvalues more negative than this are a bug, not roundoff.
EIG_NEG_TOL = 1e-10
# A Born weight below this is treated as a deterministic measurement.
DETERMINISTIC_TOL = 1e-14


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    c = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        c += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return c


def _enumerate_sector(L: int, n_up: int) -> np.ndarray:
    # Gosper's hack on a vector would need a scan; filtering 2^L patterns in
    # chunks is simpler and fast enough up to L=24.
    out = []
    chunk = 1 << 20
    for start in range(0, 1 << L, chunk):
        x = np.arange(start, min(start + chunk, 1 << L), dtype=np.int64)
        out.append(x[_popcount(x) == n_up])
    return np.concatenate(out)


def validate_sites(sites: Iterable[int], L: int) -> tuple[int, ...]:
    """Return ``sites`` as a strictly increasing tuple or raise."""
    s = tuple(int(v) for v in sites)
    if len(set(s)) != len(s):
        raise ConfigurationError(f"duplicate sites in {s}")
    if any(v < 0 or v >= L for v in s):
        raise ConfigurationError(f"sites {s} outside [0, {L})")
    return tuple(sorted(s))


class SectorBasis:
    """Sorted bit patterns of L sites with exactly ``n_up`` up spins.

    Immutable after construction. Index tables for gates and subsystems are
    built lazily and cached; building is idempotent so concurrent readers only
    risk duplicated work.
    """

    def __init__(self, L: int, n_up: int):
        if not (MIN_L <= L <= MAX_L):
            raise CapacityError(f"L={L} outside [{MIN_L}, {MAX_L}]")
        if not (0 <= n_up <= L):
            raise ConfigurationError(f"n_up={n_up} outside [0, {L}]")
        self.L = L
        self.n_up = n_up
        self.states = _enumerate_sector(L, n_up)
        self.states.setflags(write=False)
        self._pairs: dict[tuple[int, int], tuple[np.ndarray, ...]] = {}
        self._subsys: dict[tuple[int, ...], "_Subsystem"] = {}
        self._counts: dict[tuple[int, ...], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, pattern):
        """Dense index of one pattern (or an array of patterns)."""
        pat = np.asarray(pattern, dtype=np.int64)
        idx = np.searchsorted(self.states, pat)
        idx_c = np.minimum(idx, len(self.states) - 1)
        if np.any(self.states[idx_c] != pat):
            raise KeyError(f"pattern not in sector: {pattern}")
        return int(idx_c) if idx_c.ndim == 0 else idx_c

    def pair_tables(self, i: int, j: int) -> tuple[np.ndarray, ...]:
        """Index arrays ``(i00, i11, i01, i10)`` for a gate on sites ``(i, j)``.

        ``i01[k]`` (site i up, site j down) and ``i10[k]`` (site i down, site j
        up) are partners differing only by the swap of the two bits.
        """
        key = (i, j)
        tab = self._pairs.get(key)
        if tab is None:
            s = self.states
            bi = (s >> i) & 1
            bj = (s >> j) & 1
            i00 = np.flatnonzero((bi == 0) & (bj == 0))
            i11 = np.flatnonzero((bi == 1) & (bj == 1))
            i01 = np.flatnonzero((bi == 1) & (bj == 0))
            partner = s[i01] ^ ((1 << i) | (1 << j))
            i10 = np.searchsorted(s, partner)
            tab = tuple(np.ascontiguousarray(a, dtype=np.intc) for a in (i00, i11, i01, i10))
            for a in tab:
                a.setflags(write=False)
            self._pairs[key] = tab
        return tab

    def up_counts(self, sites: tuple[int, ...]) -> np.ndarray:
        """Number of up spins among ``sites`` for every basis state."""
        c = self._counts.get(sites)
        if c is None:
            mask = 0
            for n in sites:
                mask |= 1 << n
            c = _popcount(self.states & mask)
            c.setflags(write=False)
            self._counts[sites] = c
        return c

    def subsystem(self, sites: tuple[int, ...]) -> "_Subsystem":
        sub = self._subsys.get(sites)
        if sub is None:
            sub = _Subsystem(self, sites)
            self._subsys[sites] = sub
        return sub


def _gather_bits(states: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Pack the bits at ``sites`` into a local index (sites[0] -> bit 0)."""
    out = np.zeros(states.shape, dtype=np.int64)
    for k, n in enumerate(sites):
        out |= ((states >> n) & 1) << k
    return out


class _Subsystem:
    """Schmidt block layout of a sector state for a cut A | complement.

    Total charge is conserved, so the amplitude matrix psi[a, e] is block
    diagonal in the charge q of A: block q has rows = A-configurations with
    q ups and columns = complement configurations with n_up - q ups. Blocks of
    equal shape are stacked so their spectra come from one batched call.
    """

    def __init__(self, basis: SectorBasis, sites: tuple[int, ...]):
        L = basis.L
        self.sites = sites
        comp = tuple(n for n in range(L) if n not in set(sites))
        a_cfg = _gather_bits(basis.states, sites)
        e_cfg = _gather_bits(basis.states, comp)
        q = _popcount(a_cfg)
        self.blocks = []
        shapes: dict[tuple[int, int], list] = {}
        for charge in np.unique(q):
            members = np.flatnonzero(q == charge)
            rows, r_inv = np.unique(a_cfg[members], return_inverse=True)
            cols, c_inv = np.unique(e_cfg[members], return_inverse=True)
            self.blocks.append((members, r_inv, c_inv, len(rows), len(cols), rows))
            shapes.setdefault((len(rows), len(cols)), []).append((members, r_inv, c_inv))
        # (shape, source amplitude indices, flat target indices in the stack)
        self.stacks = []
        for (nr, nc), group in shapes.items():
            src = np.concatenate([m for m, _, _ in group])
            dst = np.concatenate([b * nr * nc + r * nc + c for b, (_, r, c) in enumerate(group)])
            self.stacks.append(((len(group), nr, nc), src, dst))

    def block_matrices(self, amps: np.ndarray):
        for members, r, c, nr, nc, rows in self.blocks:
            m = np.zeros((nr, nc), dtype=complex)
            m[r, c] = amps[members]
            yield m, rows

    def schmidt_weights(self, amps: np.ndarray) -> np.ndarray:
        """Eigenvalues of the reduced density matrix (squared Schmidt values).

        Blocks with one row or column contribute a single eigenvalue, their
        squared norm; zero eigenvalues of the larger Gram side are omitted.
        """
        out = []
        for shape, src, dst in self.stacks:
            _, nr, nc = shape
            m = np.zeros(shape, dtype=complex)
            m.reshape(-1)[dst] = amps[src]
            if min(nr, nc) == 1:
                out.append(np.sum(m.real**2 + m.imag**2, axis=(1, 2)))
                continue
            mh = np.conj(np.swapaxes(m, 1, 2))
            g = m @ mh if nr <= nc else mh @ m
            out.append(np.linalg.eigvalsh(g).reshape(-1))
        return np.concatenate(out)


class PureState:
    """Complex amplitudes over a :class:`SectorBasis`.

    Operations mutate in place and also return ``self`` for chaining.
    """

    __slots__ = ("basis", "amplitudes")

    def __init__(self, basis: SectorBasis, amplitudes: np.ndarray):
        amps = np.ascontiguousarray(amplitudes, dtype=complex)
        if amps.shape != (basis.dim,):
            raise ConfigurationError(f"expected {basis.dim} amplitudes, got {amps.shape}")
        self.basis = basis
        self.amplitudes = amps

    @property
    def L(self) -> int:
        return self.basis.L

    def copy(self) -> "PureState":
        return PureState(self.basis, self.amplitudes.copy())

    def norm_sq(self) -> float:
        return kernels.norm_sq(self.amplitudes)

    def renormalize(self) -> "PureState":
        self.amplitudes *= 1.0 / np.sqrt(self.norm_sq())
        return self


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Reduced density matrix on ``sites``; local index packs sites[k] into bit k."""

    sites: tuple[int, ...]
    entries: np.ndarray


@lru_cache(maxsize=None)
def sector_basis(L: int, n_up: int) -> SectorBasis:
    """Shared, cached basis instance (one per process)."""
    return SectorBasis(L, n_up)


def neel_pattern(L: int) -> int:
    """Alternating pattern with site 0 up: bits 0, 2, 4, ... set."""
    return sum(1 << n for n in range(0, L, 2))


def neel_state(L: int) -> PureState:
    if L % 2 or L < 4 or L > MAX_L:
        raise ConfigurationError(f"Neel state needs even L in [4, {MAX_L}], got {L}")
    basis = sector_basis(L, L // 2)
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index_of(neel_pattern(L))] = 1.0
    return PureState(basis, amps)


def product_state(L: int, pattern: int) -> PureState:
    """Computational basis state ``pattern`` in its own magnetization sector."""
    basis = sector_basis(L, bin(pattern).count("1"))
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index_of(pattern)] = 1.0
    return PureState(basis, amps)


def apply_coefficients(state: PureState, coeffs: np.ndarray, i: int, j: int) -> PureState:
    """Apply a gate given by its six nonzero entries (see ``gates.gate_coefficients``)."""
    kernels.apply_gate(state.amplitudes, *state.basis.pair_tables(i, j), coeffs)
    return state


def apply_two_qubit_gate(state: PureState, gate: TwoQubitGate, i: int, j: int) -> PureState:
    L = state.L
    if i == j or not (0 <= i < L and 0 <= j < L):
        raise ConfigurationError(f"invalid site pair ({i}, {j}) for L={L}")
    m = gate.matrix
    check_gate(m)
    coeffs = np.array([m[0, 0], m[1, 1], m[2, 2], m[2, 3], m[3, 2], m[3, 3]], dtype=complex)
    return apply_coefficients(state, coeffs, i, j)


def project_site(state: PureState, n: int, up: bool, weight: float) -> PureState:
    """Project site ``n`` onto up/down and divide by sqrt(weight)."""
    kernels.project(state.amplitudes, state.basis.states, n, up, 1.0 / np.sqrt(weight))
    return state


def measure_z(state: PureState, n: int, u: float) -> tuple[PureState, int, float]:
    """Projective Z measurement of site ``n`` driven by the uniform draw ``u``.

    Returns ``(state, outcome, prob)`` where ``prob`` is the Born probability
    of spin up, the outcome is +1 (up) iff ``u < prob``, and the state is
    collapsed and renormalized in place. An outcome whose Born weight is below
    1e-14 is replaced by the opposite one.
    """
    if not (0 <= n < state.L):
        raise ConfigurationError(f"site {n} outside [0, {state.L})")
    p_up = kernels.prob_up(state.amplitudes, state.basis.states, n)
    p_up = min(max(p_up, 0.0), 1.0)
    up = u < p_up
    if up and p_up < DETERMINISTIC_TOL:
        up = False
    elif not up and 1.0 - p_up < DETERMINISTIC_TOL:
        up = True
    project_site(state, n, up, p_up if up else 1.0 - p_up)
    return state, (1 if up else -1), p_up


def reduced_density_matrix(state: PureState, sites: Iterable[int]) -> DensityMatrix:
    A = validate_sites(sites, state.L)
    if len(A) > MAX_DM_SITES:
        raise CapacityError(f"|A|={len(A)} exceeds density-matrix cap {MAX_DM_SITES}")
    rho = np.zeros((1 << len(A), 1 << len(A)), dtype=complex)
    if not A:
        rho[0, 0] = state.norm_sq()
        return DensityMatrix(A, rho)
    sub = state.basis.subsystem(A)
    for m, rows in sub.block_matrices(state.amplitudes):
        rho[np.ix_(rows, rows)] = m @ m.conj().T
    return DensityMatrix(A, rho)


def entropy_from_eigenvalues(lam: np.ndarray) -> float:
    lam = np.asarray(lam, dtype=float)
    if lam.size and lam.min() < -EIG_NEG_TOL:
        raise NumericalError(f"density matrix eigenvalue {lam.min():.3e} below -{EIG_NEG_TOL}")
    lam = np.clip(lam, 0.0, 1.0)
    # eigenvalues within EIG_ZERO of 0 or 1 contribute below 1e-11; drop them so
    # product states give exactly zero
    lam = lam[(lam > EIG_ZERO) & (lam < 1.0 - EIG_ZERO)]
    return float(-np.sum(lam * np.log(lam))) + 0.0


def von_neumann_entropy(dm: DensityMatrix) -> float:
    """Entropy in nats of a reduced density matrix."""
    return entropy_from_eigenvalues(np.linalg.eigvalsh(dm.entries))


def entanglement_entropy(state: PureState, sites: Iterable[int]) -> float:
    """S_vN of the subsystem ``sites`` via block Schmidt weights.

    Same value as ``von_neumann_entropy(reduced_density_matrix(...))`` but
    without forming the dense matrix, so no size cap applies.
    """
    A = validate_sites(sites, state.L)
    if len(A) in (0, state.L):
        return 0.0
    # The smaller side gives fewer, smaller blocks; the spectra coincide.
    if 2 * len(A) > state.L:
        A = tuple(n for n in range(state.L) if n not in set(A))
    return entropy_from_eigenvalues(state.basis.subsystem(A).schmidt_weights(state.amplitudes))


def sz_moments(state: PureState, sites: Iterable[int], spin_units: str = "half") -> tuple[float, float]:
    """Mean and variance of the subsystem magnetization S_z(A).

    ``spin_units='half'`` uses single-site eigenvalues +-1/2, ``'pauli'`` uses +-1.
    """
    A = validate_sites(sites, state.L)
    try:
        unit = SPIN_UNITS[spin_units]
    except KeyError:
        raise ConfigurationError(f"spin_units must be one of {sorted(SPIN_UNITS)}") from None
    w = state.amplitudes.real ** 2 + state.amplitudes.imag ** 2
    w = w / w.sum()
    m = (2.0 * state.basis.up_counts(A) - len(A)) * (0.5 * unit)
    if m.size and m.min() == m.max():
        # S_z(A) is fixed on the sector (e.g. A = all sites)
        return float(m[0]), 0.0
    mean = float(np.dot(w, m))
    var = float(np.dot(w, (m - mean) ** 2))
    return mean, max(var, 0.0)


def expand_to_full(state: PureState) -> np.ndarray:
    """Scatter sector amplitudes into the 2^L computational basis."""
    if state.L > MAX_FULL_L:
        raise CapacityError(f"L={state.L} exceeds full-basis cap {MAX_FULL_L}")
    full = np.zeros(1 << state.L, dtype=complex)
    full[state.basis.states] = state.amplitudes
    return full


def restrict_from_full(full: np.ndarray, L: int, n_up: int) -> PureState:
    """Inverse of :func:`expand_to_full`; weight outside the sector is dropped."""
    full = np.asarray(full, dtype=complex)
    if full.shape != (1 << L,):
        raise ConfigurationError(f"expected vector of length 2^{L}")
    basis = sector_basis(L, n_up)
    return PureState(basis, full[basis.states].copy())


def max_entropy(n_sites: int, L: int) -> float:
    return min(n_sites, L - n_sites) * log(2.0)


def sector_dimension(L: int, n_up: int) -> int:
    return comb(L, n_up)
