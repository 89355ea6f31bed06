"""One-dimensional scattering off a delta barrier coupled to qubit 1.

The incident particle couples through ``g * sigma_x^(1) * delta(x)``. With
``K = sqrt(2m(E - H))`` (diagonal in the eigenbasis, evanescent channels on
the positive imaginary axis) the transmission matrix is

    s(+) = K^{1/2} (K + i m g V)^{-1} K^{1/2},      s(-) = s(+) - 1,

which is algebraically the same as ``K^{1/2}[1 + i m g K^{-1} V]^{-1} K^{-1/2}``
but stays finite when an incoming channel sits at threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import SIGMA_X, ChainSpec, Spectrum, site_operator
from .errors import (
    InvalidMomentum,
    LinearSolveFailure,
    NoOpenChannel,
    SingularKMatrix,
    ThresholdEnergy,
)

THRESHOLD_TOL = 1e-12
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SMatrixPair:
    energy: float
    transmitted: np.ndarray
    reflected: np.ndarray
    open_mask: np.ndarray

    def flux_defect(self) -> float:
        """Max deviation of ``s+^dag s+ + s-^dag s- = 1`` on open channels."""
        o = self.open_mask
        sp = self.transmitted[np.ix_(o, o)]
        sm = self.reflected[np.ix_(o, o)]
        gram = sp.conj().T @ sp + sm.conj().T @ sm
        return float(np.max(np.abs(gram - np.eye(o.sum()))))

    def symmetry_defect(self) -> float:
        return float(
            max(
                np.max(np.abs(self.transmitted - self.transmitted.T)),
                np.max(np.abs(self.reflected - self.reflected.T)),
            )
        )


def coupling_operator(spectrum: Spectrum, n_qubits: int | None = None) -> np.ndarray:
    """``sigma_x`` on qubit 1 written in the eigenbasis."""
    if n_qubits is None:
        n_qubits = int(round(np.log2(spectrum.dim)))
    return spectrum.to_eigen(site_operator(SIGMA_X, 0, n_qubits))


def wavenumbers(energy, levels, mass):
    """Principal-branch ``sqrt(2m(E - e_l))``; closed channels give ``i*kappa``."""
    arg = 2.0 * mass * (np.asarray(energy, dtype=float)[..., None] - np.asarray(levels)[None, :])
    return np.sqrt(arg + 0j)


def smatrix_general(E: float, spectrum: Spectrum, spec: ChainSpec) -> SMatrixPair:
    levels = spectrum.energies
    if E <= levels.min():
        raise NoOpenChannel(f"no open channel at E={E}")
    if np.any(np.abs(E - levels) < THRESHOLD_TOL):
        raise SingularKMatrix(f"E={E} sits on a channel threshold")
    open_mask = E > levels
    k = wavenumbers(E, levels, spec.mass)[0]
    V = coupling_operator(spectrum, spec.n_qubits)
    d = len(levels)
    sqrt_k = np.sqrt(k)
    reduced = np.eye(d) + 1j * spec.mass * spec.g * V / (sqrt_k[:, None] * sqrt_k[None, :])
    if np.linalg.cond(reduced) > MAX_CONDITION:
        raise LinearSolveFailure(f"ill-conditioned scattering system at E={E}")
    s_plus = np.linalg.inv(reduced)
    closed = ~open_mask
    s_plus[closed, :] = 0
    s_plus[:, closed] = 0
    s_minus = s_plus - np.diag(open_mask.astype(float))
    return SMatrixPair(float(E), s_plus, s_minus, open_mask)


def smatrix_single_qubit(E: float, spec: ChainSpec) -> SMatrixPair:
    """Closed forms for one qubit, basis order (|0>, |1>)."""
    h, m, g = spec.h, spec.mass, spec.g
    if E <= 0 or abs(E - h) < THRESHOLD_TOL:
        raise ThresholdEnergy(f"E={E} is not a valid scattering energy")
    if E > h:
        c = g * np.sqrt(m / 2) / (E * (E - h)) ** 0.25
        s_plus = np.array([[1, -1j * c], [-1j * c, 1]]) / (1 + c**2)
        open_mask = np.array([True, True])
    else:
        c2 = -1j * g**2 * m / 2 / np.sqrt(E * (h - E))
        s_plus = np.zeros((2, 2), dtype=complex)
        s_plus[0, 0] = 1 / (1 + c2)
        open_mask = np.array([True, False])
    s_minus = s_plus - np.diag(open_mask.astype(float))
    return SMatrixPair(float(E), s_plus, s_minus, open_mask)


@dataclass(frozen=True)
class LocalAmplitudes:
    """Single-flip amplitudes of the ``epsilon -> 0`` chain (transmitted set).

    ``a0``/``a1``: elastic amplitude with qubit 1 in |0>/|1>.
    ``a_plus``: excitation 0 -> 1, ``a_minus``: relaxation 1 -> 0. All are
    functions of the incoming momentum only. Reflected amplitudes follow from
    ``s(-) = s(+) - 1``.
    """

    p: np.ndarray
    energy: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray

    def reflected(self) -> "LocalAmplitudes":
        return LocalAmplitudes(self.p, self.energy, self.a0 - 1, self.a1 - 1, self.a_plus, self.a_minus)

    def matrix(self, index=()) -> np.ndarray:
        """2x2 one-qubit operator ``a0 P0 + a1 P1 + a_plus|1><0| + a_minus|0><1|``."""
        return np.array(
            [[self.a0[index], self.a_minus[index]], [self.a_plus[index], self.a1[index]]],
            dtype=complex,
        )


def c_plus(p, spec: ChainSpec):
    p = np.asarray(p, dtype=float)
    gm = spec.g * spec.mass / spec.hbar
    return gm / np.sqrt(p * np.sqrt(p**2 + 2 * spec.mass * spec.h))


def c_minus_squared(p, spec: ChainSpec):
    """``c_-(p)^2``; imaginary below the excitation threshold ``p^2 < 2mh``."""
    p = np.asarray(p, dtype=float)
    gm = spec.g * spec.mass / spec.hbar
    return gm**2 / (p * np.sqrt(p**2 - 2 * spec.mass * spec.h + 0j))


def smatrix_local_limit(p, n_excitations: int, spec: ChainSpec) -> LocalAmplitudes:
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p_arr <= 0) or np.any(~np.isfinite(p_arr)):
        raise InvalidMomentum("momentum must be positive")
    if n_excitations < 0:
        raise ValueError("n_excitations must be >= 0")
    m, h = spec.mass, spec.h
    cp = c_plus(p_arr, spec)
    cm2 = c_minus_squared(p_arr, spec)
    above = p_arr**2 > 2 * m * h
    cm = np.sqrt(cm2)
    a1 = 1 / (1 + cp**2) + 0j
    a0 = 1 / (1 + cm2)
    a_minus = -1j * cp / (1 + cp**2)
    a_plus = np.where(above, -1j * cm / (1 + cm2), 0)
    energy = p_arr**2 / (2 * m) + n_excitations * h
    shape = np.shape(p)
    return LocalAmplitudes(
        p_arr.reshape(shape),
        energy.reshape(shape),
        a0.reshape(shape),
        a1.reshape(shape),
        a_plus.reshape(shape),
        a_minus.reshape(shape),
    )


def outgoing_rows(q: np.ndarray, levels: np.ndarray, V: np.ndarray, mass: float, g: float):
    """Reduced amplitudes on an outgoing-momentum grid.

    For each node ``q`` and outgoing level ``a`` the total energy is
    ``q^2/2m + e_a``. Returns ``u[alpha, node, a, b] = s(alpha)_{ab} / sqrt(k_b)``
    where ``k_b`` is the incoming wavenumber of level ``b``; only entries with
    an open incoming channel are meaningful. Dividing out ``sqrt(k_b)`` keeps
    the values finite at incoming thresholds.
    """
    q = np.asarray(q, dtype=float)
    d = len(levels)
    nq = len(q)
    u = np.empty((2, nq, d, d), dtype=complex)
    eye = np.eye(d)
    coupling = 1j * mass * g * V
    for a in range(d):
        k = np.sqrt(q[:, None] ** 2 + 2 * mass * (levels[a] - levels[None, :]) + 0j)
        M = coupling[None, :, :] + k[:, :, None] * eye[None, :, :]
        rhs = np.broadcast_to(eye[:, a], (nq, d))[..., None]
        row = np.linalg.solve(np.swapaxes(M, 1, 2), rhs)[..., 0]
        u[0, :, a, :] = np.sqrt(q)[:, None] * row
    u[1] = u[0]
    idx = np.arange(d)
    u[1][:, idx, idx] -= 1 / np.sqrt(q)[:, None]
    return u
