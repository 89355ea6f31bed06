"""Qubit-chain Hamiltonian, its spectrum and reference thermal states.

Local product basis: ``|s_1 s_2 ... s_N>`` with ``s_1`` the most significant
bit, so basis index ``i = sum_k s_k 2**(N-k)``. ``|0>`` is the qubit ground
state. Ladder operators follow ``sigma_pm = sigma_x +- i sigma_y`` and carry a
factor 2: ``sigma_+ = 2|1><0|``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import InvalidSpec, NonIntegerExcitation

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [2, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
PROJ_0 = np.diag([1.0, 0.0]).astype(complex)
PROJ_1 = np.diag([0.0, 1.0]).astype(complex)


class DegenerateSpectrumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ChainSpec:
    """Physical parameters of the chain and of the reservoir particles.

    Defaults are the reference parameter set (natural units, hbar = 1).
    """

    n_qubits: int = 3
    h: float = 4.0
    epsilon: float = 0.1
    g: float = 50.0
    mass: float = 0.1
    beta: float = 0.1
    sigma_p: float = 0.5
    gamma: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        problems = []
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            problems.append("n_qubits must be a positive integer")
        if not self.h > 0:
            problems.append("h must be > 0")
        if not self.epsilon >= 0:
            problems.append("epsilon must be >= 0")
        if not self.mass > 0:
            problems.append("mass must be > 0")
        if not self.beta > 0:
            problems.append("beta must be > 0")
        if not self.sigma_p > 0:
            problems.append("sigma_p must be > 0")
        if not self.gamma >= 0:
            problems.append("gamma must be >= 0")
        if self.hbar != 1.0:
            problems.append("hbar is fixed to 1")
        if not np.isfinite(self.g):
            problems.append("g must be finite")
        if problems:
            raise InvalidSpec("; ".join(problems))

    @property
    def dim(self) -> int:
        return 2 ** int(self.n_qubits)

    def replace(self, **changes) -> "ChainSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class HamiltonianTriple:
    h_loc: np.ndarray
    h_int: np.ndarray
    h_total: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of the chain Hamiltonian.

    ``eigenvectors[:, j]`` is ``|j>`` written in the local product basis.
    """

    energies: np.ndarray
    eigenvectors: np.ndarray
    excitations: np.ndarray
    local_energies: np.ndarray
    h: float
    degenerate: bool = False
    band_index: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def gaps(self) -> np.ndarray:
        """Bohr matrix ``gaps[a, b] = e_a - e_b``."""
        return self.energies[:, None] - self.energies[None, :]

    def to_eigen(self, op: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v.conj().T @ op @ v

    def to_local(self, op: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v @ op @ v.conj().T


@dataclass
class DensityMatrix:
    data: np.ndarray
    basis: str = "eigen"

    def check(self, atol: float = 1e-12, neg_tol: float = 1e-10) -> None:
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(rho) - 1) > atol:
            raise ValueError("density matrix trace != 1")
        if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -neg_tol:
            raise ValueError("density matrix not positive")

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()


def site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a one-qubit operator at ``site`` (0-based, site 0 = qubit 1)."""
    factors = [np.eye(2, dtype=complex)] * n_qubits
    factors = list(factors)
    factors[site] = op
    return reduce(np.kron, factors)


def number_operator(n_qubits: int) -> np.ndarray:
    return sum(site_operator(PROJ_1, i, n_qubits) for i in range(n_qubits))


def excitation_counts(n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    return np.array([bin(i).count("1") for i in idx])


def build_chain_hamiltonian(spec: ChainSpec) -> HamiltonianTriple:
    """XX chain with local splitting ``h`` and open-chain hopping ``epsilon``."""
    if not isinstance(spec, ChainSpec):
        raise InvalidSpec("expected a ChainSpec")
    n = int(spec.n_qubits)
    h_loc = sum(spec.h * (site_operator(SIGMA_Z, i, n) + np.eye(2**n)) / 2 for i in range(n))
    h_int = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n - 1):
        hop = site_operator(SIGMA_PLUS, i, n) @ site_operator(SIGMA_MINUS, i + 1, n)
        h_int += hop + hop.conj().T
    h_loc = np.asarray(h_loc, dtype=complex)
    return HamiltonianTriple(h_loc, h_int, h_loc + spec.epsilon * h_int)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        k = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        out[:, j] = col * (abs(col[k]) / col[k])
    return out


def diagonalize(triple: HamiltonianTriple, spec: ChainSpec) -> Spectrum:
    """Diagonalize sector by sector in the excitation number.

    ``H_int`` conserves the excitation number, so every eigenvector has an
    integer label by construction; blocks that are already diagonal (the
    ``epsilon = 0`` case) keep the local product basis.
    """
    H = triple.h_total
    if np.max(np.abs(H - H.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
        raise ValueError("h_total is not Hermitian")
    d = H.shape[0]
    n_op = number_operator(int(spec.n_qubits))
    counts = excitation_counts(int(spec.n_qubits))

    energies = np.empty(d)
    vecs = np.zeros((d, d), dtype=complex)
    col = 0
    for n in range(int(spec.n_qubits) + 1):
        idx = np.flatnonzero(counts == n)
        block = H[np.ix_(idx, idx)]
        off = block - np.diag(np.diag(block))
        if np.max(np.abs(off), initial=0.0) == 0.0:
            w = np.real(np.diag(block))
            u = np.eye(len(idx), dtype=complex)
        else:
            w, u = np.linalg.eigh(block)
        for a in range(len(idx)):
            energies[col] = w[a]
            vecs[idx, col] = u[:, a]
            col += 1
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    vecs = _fix_phase(vecs[:, order])

    n_expect = np.real(np.einsum("ij,ik,kj->j", vecs.conj(), n_op, vecs))
    excitations = np.rint(n_expect).astype(int)
    if np.max(np.abs(n_expect - excitations)) > 1e-6:
        raise NonIntegerExcitation("eigenvector without integer excitation number")

    degenerate = bool(np.any(np.diff(energies) < 1e-12 * spec.h))
    if degenerate:
        warnings.warn("spectrum has degenerate levels", DegenerateSpectrumWarning, stacklevel=2)
    bands = {int(n): np.flatnonzero(excitations == n) for n in np.unique(excitations)}
    return Spectrum(
        energies=energies,
        eigenvectors=vecs,
        excitations=excitations,
        local_energies=excitations * spec.h,
        h=spec.h,
        degenerate=degenerate,
        band_index=bands,
    )


def spectrum_for(spec: ChainSpec) -> Spectrum:
    """Convenience: build and diagonalize, silencing the degeneracy warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        return diagonalize(build_chain_hamiltonian(spec), spec)


def boltzmann_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    energies = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def gibbs_state(spectrum: Spectrum, beta: float) -> DensityMatrix:
    """``exp(-beta H)/Z`` in the eigenbasis."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return DensityMatrix(np.diag(boltzmann_weights(spectrum.energies, beta)).astype(complex), "eigen")


def local_thermal_state(spec: ChainSpec) -> DensityMatrix:
    """First qubit thermal, the rest in the ground state (local basis)."""
    n = int(spec.n_qubits)
    d = 2**n
    excited = 1.0 / (1.0 + np.exp(spec.beta * spec.h))
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0 - excited
    rho[2 ** (n - 1), 2 ** (n - 1)] = excited
    return DensityMatrix(rho, "local")
