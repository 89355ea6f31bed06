"""Lindblad generators, propagation, steady states and chain observables.

Vectorization is column-major throughout: ``vec(A rho B) = (B^T kron A) vec(rho)``
and ``vec(rho)[j + k d] = rho[j, k]``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .chain import DensityMatrix, Spectrum, boltzmann_weights
from .collision import CollisionTensor
from .errors import (
    DegenerateGap,
    DegenerateSteadyState,
    DimensionMismatch,
    IllConditionedSpectral,
)

TRAJECTORY_FORMAT_VERSION = 1
MAX_EIGVEC_CONDITION = 1e10


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def _left(A):
    return np.kron(np.eye(A.shape[0]), A)


def _right(B):
    return np.kron(B.T, np.eye(B.shape[0]))


def commutator_superop(H: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> -i[H, rho]``."""
    return -1j * (_left(H) - _right(H))


class Liouvillian:
    """Dense generator on column-stacked density matrices.

    The eigen-decomposition is computed on first use and then reused.
    """

    def __init__(self, matrix: np.ndarray, gamma: float = 0.0, source: str = ""):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.gamma = gamma
        self.source = source
        self._eig = None

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def eig(self):
        if self._eig is None:
            lam, V = np.linalg.eig(self.matrix)
            self._eig = (lam, V)
        return self._eig

    def trace_defect(self) -> float:
        """Max of ``vec(I)^dag L``; zero for a trace-preserving generator."""
        return float(np.max(np.abs(vec(np.eye(self.dim)).conj() @ self.matrix)))

    def max_real_eigenvalue(self) -> float:
        return float(self.eig()[0].real.max())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


def _check_dims(H, d):
    if H.shape != (d, d):
        raise DimensionMismatch(f"operator of shape {H.shape} does not match dimension {d}")


def poisson_generator(H: np.ndarray, tensor: CollisionTensor, gamma: float) -> Liouvillian:
    """``-i[H, .] + gamma (S - 1)``."""
    H = np.asarray(H, dtype=complex)
    _check_dims(H, tensor.dim)
    d = tensor.dim
    L = commutator_superop(H) + gamma * (tensor.superoperator() - np.eye(d * d))
    return Liouvillian(L, gamma, f"poisson:{tensor.variant.value}")


def generic_generator(H: np.ndarray, ops, gamma: float) -> Liouvillian:
    """``-i[H, .] + gamma sum_l (L rho L^dag - {L^dag L, rho}/2)``."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    _check_dims(H, d)
    L = commutator_superop(H)
    for op in ops:
        op = np.asarray(op, dtype=complex)
        _check_dims(op, d)
        LdL = op.conj().T @ op
        L = L + gamma * (np.kron(op.conj(), op) - 0.5 * (_left(LdL) + _right(LdL)))
    return Liouvillian(L, gamma, "lindblad")


def repeated_interaction_generator(H, V, b_second_moment: float, g: float) -> Liouvillian:
    """Short-collision limit: a single jump operator ``V`` at rate ``g^2 <B^2>``."""
    if b_second_moment < 0:
        raise ValueError("b_second_moment must be >= 0")
    gamma = g**2 * b_second_moment
    out = generic_generator(H, [V], gamma)
    out.source = "repeated-interaction"
    return out


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    method: str = "spectral"
    records: list = field(default_factory=list)

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tjj->tj", self.states))

    def trace_defect(self) -> float:
        return float(np.max(np.abs(np.einsum("tjj->t", self.states) - 1)))


def _rk4(L: np.ndarray, v0: np.ndarray, times: np.ndarray) -> np.ndarray:
    norm = max(np.linalg.norm(L, 2), 1e-300)
    max_step = 0.1 / norm
    out = np.empty((len(times), len(v0)), dtype=complex)
    v = v0.copy()
    t = times[0]
    out[0] = v
    for i, target in enumerate(times[1:], start=1):
        span = target - t
        n = max(int(np.ceil(span / max_step)), 1) if span > 0 else 0
        if n:
            dt = span / n
            for _ in range(n):
                k1 = L @ v
                k2 = L @ (v + dt / 2 * k1)
                k3 = L @ (v + dt / 2 * k2)
                k4 = L @ (v + dt * k3)
                v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = target
        out[i] = v
    return out


def evolve(L: Liouvillian, rho0, times, method: str = "spectral") -> Trajectory:
    """Propagate ``rho0`` (eigenbasis) to every time in ``times``.

    ``method`` is ``"spectral"`` (one eigen-decomposition, exact at any time)
    or ``"rk4"`` (fixed steps of at most ``0.1/||L||``).
    """
    rho0 = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    d = L.dim
    v0 = vec(rho0).astype(complex)
    if method == "spectral":
        lam, V = L.eig()
        cond = np.linalg.cond(V)
        if cond > MAX_EIGVEC_CONDITION:
            raise IllConditionedSpectral(f"eigenvector condition {cond:.2e}; use rk4")
        c = np.linalg.solve(V, v0)
        # real parts of decaying modes only underflow to zero, never overflow
        phases = np.exp(np.outer(times, lam))
        vs = (phases * c[None, :]) @ V.T
    elif method == "rk4":
        vs = _rk4(L.matrix, v0, times)
    else:
        raise ValueError(f"unknown method {method!r}")
    states = np.array([unvec(v, d) for v in vs])
    states = (states + np.conj(np.transpose(states, (0, 2, 1)))) / 2
    return Trajectory(times, states, method)


def steady_state(L: Liouvillian, gap_tol: float = 1e-10, clip: float = -1e-10) -> DensityMatrix:
    lam, V = L.eig()
    order = np.argsort(np.abs(lam))
    d = L.dim

    def as_state(v):
        rho = unvec(v, d)
        rho = (rho + rho.conj().T) / 2
        return rho / np.trace(rho)

    if len(lam) > 1 and abs(lam[order[1]]) < gap_tol:
        raise DegenerateSteadyState(
            f"two eigenvalues below {gap_tol}: {lam[order[0]]:.3e}, {lam[order[1]]:.3e}",
            candidates=[as_state(V[:, order[0]]), as_state(V[:, order[1]])],
        )
    rho = _refine_null(L.matrix, V[:, order[0]], d)
    w, U = np.linalg.eigh(rho)
    if w.min() < clip:
        raise ValueError(f"steady state has eigenvalue {w.min():.3e} below {clip}")
    w = np.clip(w, 0, None)
    rho = (U * w) @ U.conj().T
    return DensityMatrix(rho / np.trace(rho).real, "eigen")


def _refine_null(M, v, d):
    """Normalize to unit trace and polish with a bordered least-squares solve."""
    rho = unvec(v, d)
    rho = rho / np.trace(rho)
    border = np.vstack([M, vec(np.eye(d)).conj()[None, :]])
    rhs = np.zeros(d * d + 1, dtype=complex)
    rhs[-1] = 1
    sol, *_ = np.linalg.lstsq(border, rhs, rcond=None)
    cand = unvec(sol, d)
    cand = (cand + cand.conj().T) / 2
    if np.linalg.norm(M @ vec(cand)) <= np.linalg.norm(M @ vec(rho)) * 10:
        rho = cand
    return (rho + rho.conj().T) / 2


def perturbative_coherences(tensor: CollisionTensor, spectrum: Spectrum, beta: float, gamma: float = 1.0, tol_gap: float = 1e-10):
    """First-order off-diagonal correction to the Gibbs state, already multiplied by ``gamma``.

    ``rho1[j, k] = -i sum_j' S[j, k, j', j'] w_j' / (e_j - e_k)``.
    """
    e = spectrum.energies
    d = len(e)
    w = boltzmann_weights(e, beta)
    source = np.einsum("jkaa,a->jk", tensor.entries, w)
    gaps = e[:, None] - e[None, :]
    off = ~np.eye(d, dtype=bool)
    # an exact degeneracy makes the correction 0/0 even where the source vanishes
    if np.any(np.abs(gaps[off]) < tol_gap * spectrum.h):
        raise DegenerateGap("degenerate Bohr frequency; first-order coherence undefined")
    rho1 = np.zeros((d, d), dtype=complex)
    rho1[off] = -1j * source[off] / gaps[off]
    return gamma * rho1


def beta_eff(rho: np.ndarray, energies: np.ndarray, j: int, k: int, floor: float = 1e-14):
    """``log(rho_jj / rho_kk) / (e_k - e_j)``; NaN marks an undefined value."""
    pj, pk = rho[j, j].real, rho[k, k].real
    if pj <= floor or pk <= floor or energies[k] == energies[j]:
        return float("nan")
    return float(np.log(pj / pk) / (energies[k] - energies[j]))


def default_beta_pair(spectrum: Spectrum):
    """Ground state and the middle eigenstate of the one-excitation band."""
    band = spectrum.band_index.get(1, np.array([0]))
    return 0, int(band[len(band) // 2])


def observables(rho, spectrum: Spectrum, coherences=((2, 3),), beta_pair=None) -> dict:
    rho = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    pops = np.real(np.diag(rho))
    bands = {n: float(pops[idx].sum()) for n, idx in spectrum.band_index.items()}
    ratio = bands.get(1, 0.0) / pops[0] if pops[0] > 1e-300 else float("nan")
    pair = beta_pair or default_beta_pair(spectrum)
    out = {
        "populations": pops,
        "band_populations": bands,
        "rho123_over_rho00": ratio,
        "beta_eff": beta_eff(rho, spectrum.energies, *pair),
        "beta_pair": pair,
        "coherences": {(j, k): complex(rho[j, k]) for j, k in coherences if max(j, k) < len(pops)},
    }
    return out


def trajectory_csv(traj: Trajectory, spectrum: Spectrum, coherences=((2, 3),), beta_pair=None, meta=None) -> str:
    """CSV text with a '#' preamble; floats carry 17 significant digits."""
    d = spectrum.dim
    coherences = [c for c in coherences if max(c) < d]
    buf = io.StringIO()
    buf.write(f"# format_version: {TRAJECTORY_FORMAT_VERSION}\n")
    for key, val in (meta or {}).items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t"] + [f"rho_{j}{j}" for j in range(d)]
    for j, k in coherences:
        header += [f"re_rho_{j}{k}", f"im_rho_{j}{k}"]
    header += ["rho123_over_rho00", "beta_eff"]
    writer.writerow(header)
    fmt = lambda x: format(float(x), ".17g")
    for t, rho in zip(traj.times, traj.states):
        obs = observables(rho, spectrum, coherences, beta_pair)
        row = [fmt(t)] + [fmt(p) for p in obs["populations"]]
        for c in coherences:
            z = obs["coherences"][c]
            row += [fmt(z.real), fmt(z.imag)]
        row += [fmt(obs["rho123_over_rho00"]), fmt(obs["beta_eff"])]
        writer.writerow(row)
    return buf.getvalue()


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``Tr rho (log rho - log sigma)`` for full-rank ``sigma``."""
    w, U = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    log_rho = (U * np.log(np.where(w > 0, w, 1.0))) @ U.conj().T
    log_sigma = scipy.linalg.logm(sigma)
    return float(np.real(np.trace(rho @ (log_rho - log_sigma))))
