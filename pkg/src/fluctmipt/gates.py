"""Random U(1)-conserving two-qubit gates.

A gate is block diagonal in the ordered basis ``{|00>, |11>, |01>, |10>}``::

    U = diag(exp(i phi00), exp(i phi11), M)
    M = exp(i alpha) [[ exp(i psi) cos(theta),  exp(i chi) sin(theta)],
                      [-exp(-i chi) sin(theta), exp(-i psi) cos(theta)]]

For a gate acting on the ordered site pair ``(i, j)`` the two-bit label
``|b_j b_i>`` is read in binary with site ``i`` as the low bit, matching the
state-vector convention that site ``n`` is bit ``n``. So ``|01>`` is site ``i``
up and site ``j`` down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGateError
from .rng import Stream

TWO_PI = 2.0 * np.pi
GATE_MEASURES = ("uniform_phases", "haar_block")
PARAM_NAMES = ("phi00", "phi11", "alpha", "psi", "chi", "theta")


@dataclass(frozen=True)
class GateParams:
    phi00: float
    phi11: float
    alpha: float
    psi: float
    chi: float
    theta: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if not (0.0 <= v < TWO_PI):
                raise InvalidGateError(f"{name}={v!r} outside [0, 2pi)")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])


@dataclass(frozen=True, eq=False)
class TwoQubitGate:
    params: GateParams
    matrix: np.ndarray


def _params_from_uniforms(u: np.ndarray, measure: str) -> np.ndarray:
    """Map draws of shape (..., 6) to gate parameters."""
    out = TWO_PI * np.asarray(u, dtype=float)
    if measure == "haar_block":
        # Haar on U(2): |cos theta|^2 uniform on [0, 1]
        out[..., 5] = np.arccos(np.sqrt(u[..., 5]))
    elif measure != "uniform_phases":
        raise InvalidGateError(f"unknown gate measure {measure!r}; expected one of {GATE_MEASURES}")
    # 2pi * u can round up to 2pi for u within one ulp of 1
    return np.where(out >= TWO_PI, 0.0, out)


def sample_gate_params(stream: Stream, measure: str = "uniform_phases") -> GateParams:
    """Six draws in the fixed order phi00, phi11, alpha, psi, chi, theta."""
    vals = _params_from_uniforms(stream.draw(6), measure)
    return GateParams(*(float(v) for v in vals))


def sample_layer_params(stream: Stream, n_gates: int, measure: str = "uniform_phases") -> np.ndarray:
    """Parameters for ``n_gates`` gates as an (n_gates, 6) array.

    Consumes the stream exactly as ``n_gates`` calls to :func:`sample_gate_params`.
    """
    u = stream.draw(6 * n_gates).reshape(n_gates, 6)
    return _params_from_uniforms(u, measure)


def gate_coefficients(params: np.ndarray) -> np.ndarray:
    """Nonzero gate entries for a batch of parameter rows.

    Returns a complex (n, 6) array with columns
    ``(U00, U11, M00, M01, M10, M11)``; these are the exact values
    :func:`build_gate` places in the matrix.
    """
    params = np.atleast_2d(params)
    phi00, phi11, alpha, psi, chi, theta = params.T
    c, s = np.cos(theta), np.sin(theta)
    ea = np.exp(1j * alpha)
    coeffs = np.empty((params.shape[0], 6), dtype=complex)
    coeffs[:, 0] = np.exp(1j * phi00)
    coeffs[:, 1] = np.exp(1j * phi11)
    coeffs[:, 2] = ea * (np.exp(1j * psi) * c)
    coeffs[:, 3] = ea * (np.exp(1j * chi) * s)
    coeffs[:, 4] = ea * (-np.exp(-1j * chi) * s)
    coeffs[:, 5] = ea * (np.exp(-1j * psi) * c)
    return coeffs


def build_gate(params: GateParams) -> TwoQubitGate:
    c = gate_coefficients(params.as_array())[0]
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0], m[1, 1] = c[0], c[1]
    m[2, 2], m[2, 3], m[3, 2], m[3, 3] = c[2], c[3], c[4], c[5]
    return TwoQubitGate(params, m)


def check_gate(matrix: np.ndarray, atol: float = 1e-12) -> None:
    """Raise :class:`InvalidGateError` unless ``matrix`` is a charge-conserving unitary."""
    m = np.asarray(matrix)
    if m.shape != (4, 4):
        raise InvalidGateError(f"gate must be 4x4, got {m.shape}")
    # Blocks {|00>}, {|11>}, {|01>,|10>} must not couple.
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = mask[1, 1] = False
    mask[2:, 2:] = False
    if np.any(m[mask] != 0):
        raise InvalidGateError("gate couples different charge sectors")
    err = np.max(np.abs(m.conj().T @ m - np.eye(4)))
    if err >= atol:
        raise InvalidGateError(f"gate not unitary: max|U^dag U - I| = {err:.3e}")
