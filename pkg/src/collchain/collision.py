"""Collision superoperator of the bombarded chain in the Hamiltonian eigenbasis.

Entries are stored as ``entries[j', k', j, k]`` so that

    <j'| S(rho) |k'> = sum_{j,k} entries[j', k', j, k] rho[j, k].

Exact, Narrow and BandResolved tensors are integrated over the outgoing
momentum ``q`` of the particle. Both scattering amplitudes of an entry are
then evaluated at total energies ``q^2/2m + e_j'`` and ``q^2/2m + e_k'``, so
one S-matrix row per (node, outgoing level) serves every entry. The
incoming momenta are ``p = sqrt(q^2 + 2m(e_j' - e_j))`` and
``pi = sqrt(q^2 + 2m(e_k' - e_k))`` and the measure becomes
``rho_U(p, pi) q / sqrt(p pi) dq``.
"""
from __future__ import annotations

import hashlib
import dataclasses
import io
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .chain import PROJ_0, PROJ_1, ChainSpec, Spectrum, site_operator
from .errors import BandOverlap, NotCompletelyPositive, QuadratureNotConverged, WrongVariant
from .quadrature import QuadratureConfig, breakpoints, composite_rule, momentum_cutoff, refine_edges
from .scattering import coupling_operator, outgoing_rows, smatrix_local_limit

TENSOR_FORMAT_VERSION = 1
# panel doublings tried before a failed convergence check is reported
PANEL_REFINEMENTS = 2


class Variant(str, Enum):
    EXACT = "Exact"
    NARROW = "Narrow"
    BAND_RESOLVED = "BandResolved"
    LOCAL = "Local"

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        for v in cls:
            if v.value.lower() == key:
                return v
        raise ValueError(f"unknown variant {name!r}")


@dataclass(frozen=True)
class UnitKernel:
    beta: float
    mass: float
    sigma_p: float

    def __post_init__(self):
        if min(self.beta, self.mass, self.sigma_p) <= 0:
            raise ValueError("beta, mass and sigma_p must be positive")

    @classmethod
    def from_spec(cls, spec: ChainSpec) -> "UnitKernel":
        return cls(spec.beta, spec.mass, spec.sigma_p)


def effusion_pdf(p, kernel: UnitKernel):
    """Effusion momentum density ``(beta p / m) exp(-beta p^2 / 2m)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("momentum must be >= 0")
    return kernel.beta * p / kernel.mass * np.exp(-kernel.beta * p**2 / (2 * kernel.mass))


def unit_kernel(p, p_prime, kernel: UnitKernel):
    p = np.asarray(p, dtype=float)
    p_prime = np.asarray(p_prime, dtype=float)
    gauss = np.exp(-((p - p_prime) ** 2) / (2 * kernel.sigma_p**2))
    return effusion_pdf((p + p_prime) / 2, kernel) * gauss


@dataclass
class CollisionTensor:
    entries: np.ndarray
    variant: Variant
    params: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    element_error: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("abce,ce->ab", self.entries, rho)

    def superoperator(self) -> np.ndarray:
        """Matrix acting on column-stacked ``vec(rho)`` (index ``j + k d``)."""
        d = self.dim
        return self.entries.transpose(1, 0, 3, 2).reshape(d * d, d * d)

    def choi(self) -> np.ndarray:
        """``C[(j', j), (k', k)] = entries[j', k', j, k]``."""
        d = self.dim
        return self.entries.transpose(0, 2, 1, 3).reshape(d * d, d * d)

    def choi_min_eigenvalue(self) -> float:
        C = self.choi()
        return float(np.linalg.eigvalsh((C + C.conj().T) / 2).min())

    def tp_defect(self) -> float:
        traced = np.einsum("aajk->jk", self.entries)
        return float(np.max(np.abs(traced - np.eye(self.dim))))

    def hermiticity_defect(self) -> float:
        partner = np.conj(self.entries.transpose(1, 0, 3, 2))
        return float(np.max(np.abs(self.entries - partner)))

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.entries).tobytes()).hexdigest()

    def trace_projected(self) -> "CollisionTensor":
        """Copy with the trace defect removed from the diagonal ``j' = k'`` block.

        Optional repair; assembly never applies it by itself.
        """
        d = self.dim
        entries = self.entries.copy()
        defect = np.einsum("aajk->jk", entries) - np.eye(d)
        for a in range(d):
            entries[a, a] -= defect / d
        return CollisionTensor(entries, self.variant, dict(self.params), dict(self.quadrature), self.element_error)


def identity_tensor(d: int, variant: Variant = Variant.EXACT) -> CollisionTensor:
    eye = np.eye(d)
    return CollisionTensor(np.einsum("ab,ce->acbe", eye, eye).astype(complex), Variant.parse(variant))


def _bohr_labels(delta: np.ndarray, tol: float) -> np.ndarray:
    """Cluster Bohr frequencies closer than ``tol``; returns integer labels."""
    flat = delta.ravel()
    order = np.argsort(flat, kind="stable")
    labels = np.empty(flat.size, dtype=np.int64)
    current = 0
    prev = flat[order[0]]
    for idx in order:
        if flat[idx] - prev > tol:
            current += 1
        labels[idx] = current
        prev = flat[idx]
    return labels.reshape(delta.shape)


def band_class(delta: np.ndarray, h: float) -> np.ndarray:
    """0 intra-band, 1 excitation (+h), 2 relaxation (-h), -1 anything else."""
    cls = np.full(delta.shape, -1, dtype=np.int64)
    cls[np.abs(delta) < h / 2] = 0
    cls[np.abs(delta - h) < h / 2] = 1
    cls[np.abs(delta + h) < h / 2] = 2
    return cls


def _first_qubit_ops(spectrum: Spectrum, n_qubits: int):
    """``P0, P1, |1><0|, |0><1|`` on qubit 1, in the eigenbasis."""
    raise_ = np.array([[0, 0], [1, 0]], dtype=complex)
    ops = [PROJ_0, PROJ_1, raise_, raise_.T.copy()]
    return [spectrum.to_eigen(site_operator(op, 0, n_qubits)) for op in ops]


def flat_profile(p_max: float):
    """Uniform momentum density on [0, p_max]; a deliberately non-thermal kernel."""

    def profile(p):
        return np.where((np.asarray(p) >= 0) & (np.asarray(p) <= p_max), 1.0 / p_max, 0.0)

    return profile


def _exact_rows(q, spectrum, spec):
    V = coupling_operator(spectrum, spec.n_qubits)
    return outgoing_rows(q, spectrum.energies, V, spec.mass, spec.g)


def _band_rows(q, spectrum, spec):
    delta = spectrum.gaps()
    p0, p1, up, down = _first_qubit_ops(spectrum, int(spec.n_qubits))
    p2 = q[:, None, None] ** 2 + 2 * spec.mass * delta[None]
    p = np.sqrt(np.where(p2 > 0, p2, 1.0))
    amp = smatrix_local_limit(p, 0, spec)
    inv = 1 / np.sqrt(p)
    u = np.empty((2,) + p.shape, dtype=complex)
    hop = amp.a_plus * up[None] + amp.a_minus * down[None]
    u[0] = (amp.a0 * p0[None] + amp.a1 * p1[None] + hop) * inv
    u[1] = ((amp.a0 - 1) * p0[None] + (amp.a1 - 1) * p1[None] + hop) * inv
    return u


def _local_tensor(spectrum, spec, quad: QuadratureConfig, nodes: int, profile=None):
    m, h = spec.mass, spec.h
    p_max = momentum_cutoff(m, spec.beta, quad.W)
    edges = breakpoints([2 * m * h, -2 * m * h], p_max, quad.panels)
    p, w = composite_rule(edges, nodes)
    kern = UnitKernel(spec.beta, m, spec.sigma_p)
    dens = effusion_pdf(p, kern) if profile is None else profile(p)
    amp = smatrix_local_limit(p, 0, spec)
    p0, p1, up, down = _first_qubit_ops(spectrum, int(spec.n_qubits))
    A = lambda coeff, op: coeff[:, None, None] * op[None]
    ops = np.concatenate(
        [
            A(amp.a0, p0) + A(amp.a1, p1),
            A(amp.a0 - 1, p0) + A(amp.a1 - 1, p1),
            A(amp.a_plus, up),
            A(amp.a_plus, up),
            A(amp.a_minus, down),
            A(amp.a_minus, down),
        ]
    )
    weights = np.tile(w * dens, 6)
    entries = np.einsum("n,naj,nck->acjk", weights, ops, ops.conj())
    return kernels._assemble_py.symmetrize_from_canonical(entries), len(p), p_max


def _grid_tensor(variant, spectrum, spec, quad, nodes, n_threads, backend, profile):
    levels = spectrum.energies
    delta = spectrum.gaps()
    m = spec.mass
    spread = float(levels.max() - levels.min())
    if variant is Variant.BAND_RESOLVED:
        spread += spec.h
    q_max = momentum_cutoff(m, spec.beta, quad.W, spread)
    sing = 2 * m * delta.ravel()
    if variant is Variant.BAND_RESOLVED:
        sing = np.concatenate([sing, 2 * m * (spec.h - delta.ravel()), -2 * m * (spec.h + delta.ravel())])
    rows = _band_rows if variant is Variant.BAND_RESOLVED else _exact_rows

    def probe(x):
        # thermally weighted squared amplitudes resolve narrow resonances
        weight = (spec.beta / m) * x * x * np.exp(-spec.beta * x * x / (2 * m))
        return np.abs(rows(x, spectrum, spec)[0]) ** 2 * weight[:, None, None]

    edges = refine_edges(breakpoints(sing, q_max, quad.panels), probe, tol=0.1 * quad.tol_quad)
    q, wq = composite_rule(edges, nodes)
    u = rows(q, spectrum, spec)

    sigma = None
    if variant is Variant.EXACT:
        labels = np.zeros(delta.shape, dtype=np.int64)
        sigma = spec.sigma_p
    elif variant is Variant.NARROW:
        labels = _bohr_labels(delta, 1e-8 * spec.h)
    else:
        labels = band_class(delta, spec.h)
    entries = kernels.contract(
        q, wq, u, delta, labels, m, spec.beta, sigma, n_threads=n_threads, backend=backend, profile=profile
    )
    return entries, len(q), q_max


def assemble_tensor(
    spec: ChainSpec,
    spectrum: Spectrum,
    variant="Exact",
    quad: QuadratureConfig | None = None,
    n_threads: int = 1,
    backend: str | None = None,
    profile=None,
) -> CollisionTensor:
    """Build the collision tensor of ``variant`` for the chain ``spec``.

    With ``quad.check_convergence`` the tensor is assembled twice, the second
    time with doubled nodes per panel; the finer result is returned and the
    entrywise change is kept as the error estimate.
    """
    variant = Variant.parse(variant)
    quad = quad or QuadratureConfig()
    if variant is not Variant.EXACT and spec.epsilon >= spec.h / 4:
        raise BandOverlap(f"{variant.value} needs epsilon < h/4")
    if spectrum.dim != spec.dim:
        raise ValueError("spectrum does not match spec")

    def build(q, nodes):
        if variant is Variant.LOCAL:
            return _local_tensor(spectrum, spec, q, nodes, profile)
        return _grid_tensor(variant, spectrum, spec, q, nodes, n_threads, backend, profile)

    t0 = time.perf_counter()
    error = None
    for attempt in range(PANEL_REFINEMENTS + 1):
        entries, n_nodes, cutoff = build(quad, quad.nodes)
        if not quad.check_convergence:
            break
        fine, n_nodes, cutoff = build(quad, 2 * quad.nodes)
        error = np.abs(fine - entries)
        entries = fine
        if error.max() <= quad.tol_quad:
            break
        if attempt == PANEL_REFINEMENTS:
            raise QuadratureNotConverged(
                f"node doubling changed an entry by {error.max():.3e} > {quad.tol_quad:.1e}"
                f" with {quad.panels} panels",
                max_change=float(error.max()),
            )
        # sharp resonances need narrower panels, not more nodes per panel
        quad = dataclasses.replace(quad, panels=2 * quad.panels)
    params = {
        "n_qubits": int(spec.n_qubits),
        "h": spec.h,
        "epsilon": spec.epsilon,
        "g": spec.g,
        "mass": spec.mass,
        "beta": spec.beta,
        "sigma_p": spec.sigma_p,
    }
    meta = {
        "node_count": int(n_nodes),
        "momentum_cutoff": float(cutoff),
        "panels": quad.panels,
        "nodes_per_panel": quad.nodes * (2 if quad.check_convergence else 1),
        "W": quad.W,
        "max_element_error": float(error.max()) if error is not None else float("nan"),
        "profile": "effusion" if profile is None else "custom",
        "seconds": time.perf_counter() - t0,
        "backend": "python" if profile is not None or variant is Variant.LOCAL else (backend or kernels.DEFAULT_BACKEND),
    }
    return CollisionTensor(entries, variant, params, meta, error)


@dataclass
class KrausSet:
    operators: list
    weights: np.ndarray

    def normalization_defect(self) -> float:
        if not self.operators:
            return float("inf")
        d = self.operators[0].shape[0]
        total = sum(M.conj().T @ M for M in self.operators)
        return float(np.max(np.abs(total - np.eye(d))))

    def tensor(self) -> np.ndarray:
        ops = np.array(self.operators)
        return np.einsum("laj,lck->acjk", ops, ops.conj())


def _choi_blocks(C: np.ndarray, tol: float) -> list:
    """Index sets of the connected components of the Choi sparsity pattern."""
    from scipy.sparse.csgraph import connected_components

    pattern = np.abs(C) > tol * max(np.abs(C).max(), 1e-300)
    n, labels = connected_components(pattern, directed=False)
    return [np.flatnonzero(labels == b) for b in range(n)]


def kraus_decomposition(
    tensor: CollisionTensor, rank_tol: float = 1e-10, neg_tol: float = 1e-8, block_tol: float = 1e-14
) -> KrausSet:
    """Kraus operators from the eigen-decomposition of the Choi matrix.

    The Choi matrix is split into the connected blocks of its sparsity
    pattern first, so operators never mix sectors the tensor keeps apart
    (energy-transfer sectors of a secular tensor, for instance).
    """
    d = tensor.dim
    C = tensor.choi()
    C = (C + C.conj().T) / 2
    pairs = []
    for idx in _choi_blocks(C, block_tol):
        lam, vecs = np.linalg.eigh(C[np.ix_(idx, idx)])
        if lam.min() < -neg_tol:
            raise NotCompletelyPositive(f"Choi matrix eigenvalue {lam.min():.3e} < -{neg_tol:.0e}")
        for i in np.flatnonzero(lam > rank_tol):
            full = np.zeros(d * d, dtype=complex)
            full[idx] = vecs[:, i]
            pairs.append((lam[i], full))
    pairs.sort(key=lambda x: -x[0])
    ops = [np.sqrt(l) * v.reshape(d, d) for l, v in pairs]
    return KrausSet(ops, np.array([l for l, _ in pairs]))


def check_detailed_balance(tensor: CollisionTensor, spectrum: Spectrum, beta: float, floor: float = 1e-14) -> float:
    """Worst relative violation of ``S^{jj}_{j'j'} e^{beta(e_j' - e_j)} = S^{j'j'}_{jj}``."""
    S = tensor.entries
    e = spectrum.energies
    worst = 0.0
    d = len(e)
    for j in range(d):
        for jp in range(d):
            if j == jp:
                continue
            fwd = S[jp, jp, j, j].real
            bwd = S[j, j, jp, jp].real
            if abs(fwd) < floor and abs(bwd) < floor:
                continue
            res = abs(fwd * np.exp(beta * (e[jp] - e[j])) - bwd) / max(abs(bwd), floor)
            worst = max(worst, res)
    return worst


def check_sum_rule(tensor: CollisionTensor, spectrum: Spectrum, beta: float) -> float:
    """Residual of ``sum_j S^{jj}_{j'k'} w_j = delta_{j'k'} w_j'`` with local Boltzmann weights."""
    if tensor.variant is not Variant.LOCAL:
        raise WrongVariant("the sum rule applies to the Local tensor")
    w = np.exp(-beta * (spectrum.local_energies - spectrum.local_energies.min()))
    w = w / w.sum()
    lhs = np.einsum("acjj,j->ac", tensor.entries, w)
    return float(np.max(np.abs(lhs - np.diag(w))))


# wall-clock data stays out of the file so identical runs give identical bytes
VOLATILE_METADATA = ("seconds",)


def save_tensor(tensor: CollisionTensor, path) -> None:
    """Text table: '#' header lines, then ``j' k' j k re im`` rows."""
    d = tensor.dim
    buf = io.StringIO()
    buf.write(f"# format_version: {TENSOR_FORMAT_VERSION}\n")
    buf.write(f"# variant: {tensor.variant.value}\n")
    buf.write(f"# dim: {d}\n")
    for key, val in tensor.params.items():
        buf.write(f"# param.{key}: {val!r}\n")
    for key, val in tensor.quadrature.items():
        if key in VOLATILE_METADATA:
            continue
        buf.write(f"# quadrature.{key}: {val!r}\n")
    buf.write("# columns: jp kp j k re im\n")
    idx = np.indices(tensor.entries.shape).reshape(4, -1).T
    flat = tensor.entries.reshape(-1)
    for (a, c, b, e), z in zip(idx, flat):
        buf.write(f"{a} {c} {b} {e} {z.real:.17g} {z.imag:.17g}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_tensor(path) -> CollisionTensor:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            elif line.strip():
                rows.append(line.split())
    if int(header.get("format_version", -1)) != TENSOR_FORMAT_VERSION:
        raise ValueError("unsupported tensor format version")
    d = int(header["dim"])
    entries = np.zeros((d, d, d, d), dtype=complex)
    for a, c, b, e, re, im in rows:
        entries[int(a), int(c), int(b), int(e)] = complex(float(re), float(im))
    params, quad = {}, {}
    for key, val in header.items():
        if key.startswith("param."):
            params[key[6:]] = _literal(val)
        elif key.startswith("quadrature."):
            quad[key[11:]] = _literal(val)
    return CollisionTensor(entries, Variant.parse(header["variant"]), params, quad)


def _literal(text):
    import ast

    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if text == "nan":
            return float("nan")
        return text
