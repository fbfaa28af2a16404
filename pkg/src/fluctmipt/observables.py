"""Bipartite and two-subsystem observables and the standard partition geometries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigurationError
from .statevec import (
    MAX_DM_SITES,
    SPIN_UNITS,
    CapacityError,
    PureState,
    entanglement_entropy,
    sz_moments,
    validate_sites,
)

PRESET_KINDS = ("half_pbc", "quarters_pbc", "edge_pairs_obc")

# Observable names as they appear in records and CSV files.
ENTROPY = "entropy"
VARIANCE = "variance"
MUTUAL_INFORMATION = "mutual_information"
MUTUAL_FLUCTUATION = "mutual_fluctuation"

# Roundoff allowance below zero before mutual information is reported as negative.
MI_NEG_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """Named subsystem ``A`` with an optional disjoint partner ``B``."""

    name: str
    A: tuple[int, ...]
    B: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.B is not None and set(self.A) & set(self.B):
            raise ConfigurationError(f"partition {self.name!r}: A and B overlap")

    @property
    def observables(self) -> tuple[str, str]:
        if self.B is None:
            return (ENTROPY, VARIANCE)
        return (MUTUAL_INFORMATION, MUTUAL_FLUCTUATION)

    def validate(self, L: int) -> "Partition":
        A = validate_sites(self.A, L)
        B = None if self.B is None else validate_sites(self.B, L)
        return Partition(self.name, A, B)

    def to_dict(self) -> dict:
        d = {"name": self.name, "A": list(self.A)}
        if self.B is not None:
            d["B"] = list(self.B)
        return d


def partition_preset(kind: str, L: int) -> Partition:
    """Partition geometries used for the entropy, quarter and edge-pair analyses.

    ``half_pbc``: A = first L/2 sites. ``quarters_pbc``: A = [0, L/4) and the
    antipodal B = [L/2, 3L/4). ``edge_pairs_obc``: A = {0, 1}, B = {L-2, L-1}.
    """
    if kind == "half_pbc":
        if L % 2:
            raise ConfigurationError(f"half_pbc needs even L, got {L}")
        return Partition(kind, tuple(range(L // 2)))
    if kind == "quarters_pbc":
        if L % 4:
            raise ConfigurationError(f"quarters_pbc needs L divisible by 4, got {L}")
        q = L // 4
        return Partition(kind, tuple(range(q)), tuple(range(2 * q, 3 * q)))
    if kind == "edge_pairs_obc":
        if L < 6:
            raise ConfigurationError(f"edge_pairs_obc needs L >= 6, got {L}")
        return Partition(kind, (0, 1), (L - 2, L - 1))
    raise ConfigurationError(f"unknown partition preset {kind!r}; expected one of {PRESET_KINDS}")


def _disjoint(state: PureState, A: Iterable[int], B: Iterable[int]):
    A = validate_sites(A, state.L)
    B = validate_sites(B, state.L)
    if set(A) & set(B):
        raise ConfigurationError(f"subsystems {A} and {B} overlap")
    return A, B, tuple(sorted(A + B))


def mutual_information(state: PureState, A: Iterable[int], B: Iterable[int]) -> float:
    """I(A:B) = S(A) + S(B) - S(A u B) in nats, clamped at 0 within roundoff."""
    A, B, AB = _disjoint(state, A, B)
    if len(AB) > MAX_DM_SITES:
        raise CapacityError(f"|A u B|={len(AB)} exceeds cap {MAX_DM_SITES}")
    i_ab = entanglement_entropy(state, A) + entanglement_entropy(state, B) - entanglement_entropy(state, AB)
    if -MI_NEG_TOL <= i_ab < 0.0:
        return 0.0
    return i_ab


def mutual_fluctuation(state: PureState, A: Iterable[int], B: Iterable[int], spin_units: str = "half") -> float:
    """F(A:B) = var S_z(A) + var S_z(B) - var S_z(A u B)."""
    A, B, AB = _disjoint(state, A, B)
    return (
        sz_moments(state, A, spin_units)[1]
        + sz_moments(state, B, spin_units)[1]
        - sz_moments(state, AB, spin_units)[1]
    )


def sz_covariance(state: PureState, A: Iterable[int], B: Iterable[int], spin_units: str = "half") -> float:
    """Cov(S_z(A), S_z(B)) from the diagonal distribution."""
    A, B, _ = _disjoint(state, A, B)
    unit = 0.5 * SPIN_UNITS[spin_units]
    w = np.abs(state.amplitudes) ** 2
    w = w / w.sum()
    ma = (2.0 * state.basis.up_counts(A) - len(A)) * unit
    mb = (2.0 * state.basis.up_counts(B) - len(B)) * unit
    return float(np.dot(w, (ma - np.dot(w, ma)) * (mb - np.dot(w, mb))))


def evaluate(state: PureState, partition: Partition, spin_units: str = "half") -> dict[str, float]:
    """All observables attached to ``partition`` for the current state."""
    if partition.B is None:
        return {
            ENTROPY: entanglement_entropy(state, partition.A),
            VARIANCE: sz_moments(state, partition.A, spin_units)[1],
        }
    return {
        MUTUAL_INFORMATION: mutual_information(state, partition.A, partition.B),
        MUTUAL_FLUCTUATION: mutual_fluctuation(state, partition.A, partition.B, spin_units),
    }
