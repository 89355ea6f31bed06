"""Classification of collision maps and their Kraus sets.

Every check is tolerance based and reports the worst violation together with
the entry that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import Spectrum, boltzmann_weights
from .collision import CollisionTensor, KrausSet
from .dynamics import trace_distance
from .errors import NegativeRate

REPORT_FORMAT_VERSION = 1
DEFAULT_TOL = 1e-8


@dataclass
class ClassificationReport:
    flags: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def merge(self, name: str, flag: bool, residual: float, witness=None) -> None:
        self.flags[name] = bool(flag)
        self.residuals[name] = float(residual)
        self.witnesses[name] = witness

    def to_text(self) -> str:
        lines = [f"format_version: {REPORT_FORMAT_VERSION}"]
        for name in self.flags:
            lines.append(f"{name}: {str(self.flags[name]).lower()}")
            lines.append(f"{name}.residual: {self.residuals[name]:.17g}")
            if self.witnesses.get(name) is not None:
                lines.append(f"{name}.witness: {self.witnesses[name]}")
        for key, val in self.extra.items():
            lines.append(f"{key}: {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ClassificationReport":
        rep = cls()
        for line in text.splitlines():
            key, _, val = line.partition(":")
            key, val = key.strip(), val.strip()
            if key == "format_version" or not key:
                continue
            if key.endswith(".residual"):
                rep.residuals[key[:-9]] = float(val)
            elif key.endswith(".witness"):
                rep.witnesses[key[:-8]] = val
            elif val in ("true", "false"):
                rep.flags[key] = val == "true"
            else:
                rep.extra[key] = val
        return rep


def _spread(mats: np.ndarray, axis: int):
    """Second-largest over largest magnitude along ``axis``, per operator."""
    mags = np.sort(np.abs(mats), axis=axis)
    return np.take(mags, -2, axis=axis) if mats.shape[axis] > 1 else np.zeros(np.delete(mats.shape, axis))


def classify_incoherent(kraus: KrausSet, tol: float = DEFAULT_TOL) -> dict:
    """IO: every column of every operator has at most one entry above ``tol``
    relative to that operator's largest entry. SIO: the same for rows too."""
    worst = {"io": (0.0, None), "sio": (0.0, None)}
    for l, M in enumerate(kraus.operators):
        scale = np.abs(M).max()
        if scale == 0:
            continue
        col = _spread(M, 0) / scale
        row = _spread(M, 1) / scale
        c = int(np.argmax(col))
        r = int(np.argmax(row))
        if col[c] > worst["io"][0]:
            worst["io"] = (float(col[c]), f"operator {l} column {c}")
        sio = max(col[c], row[r])
        if sio > worst["sio"][0]:
            where = f"operator {l} column {c}" if col[c] >= row[r] else f"operator {l} row {r}"
            worst["sio"] = (float(sio), where)
    return {
        "is_IO": worst["io"][0] <= tol,
        "is_SIO": worst["sio"][0] <= tol,
        "residual_IO": worst["io"][0],
        "residual_SIO": worst["sio"][0],
        "witness_IO": worst["io"][1],
        "witness_SIO": worst["sio"][1],
    }


def classify_tio(tensor: CollisionTensor, spectrum: Spectrum, tol: float = DEFAULT_TOL, delta_omega: float | None = None) -> dict:
    """Entries above ``tol * max|S|`` must conserve the Bohr frequency.

    The residual is the largest violating entry relative to ``max|S|``.
    """
    if delta_omega is None:
        delta_omega = 1e-8 * spectrum.h
    S = tensor.entries
    scale = np.abs(S).max()
    gaps = spectrum.gaps()
    # mismatch[j', k', j, k] = (e_j' - e_j) - (e_k' - e_k)
    mismatch = gaps[:, None, :, None] - gaps[None, :, None, :]
    bad = (np.abs(S) > tol * scale) & (np.abs(mismatch) > delta_omega)
    if not bad.any():
        return {"is_TIO": True, "residual": 0.0, "witness": None}
    mags = np.where(bad, np.abs(S), 0)
    idx = np.unravel_index(int(np.argmax(mags)), S.shape)
    return {
        "is_TIO": False,
        "residual": float(mags[idx] / scale),
        "witness": f"entry {tuple(int(i) for i in idx)} frequency mismatch {mismatch[idx]:.3e}",
    }


def _local_labels(n_qubits: int):
    idx = np.arange(2**n_qubits)
    first = idx >> (n_qubits - 1)
    rest = idx & ((1 << (n_qubits - 1)) - 1)
    counts = np.array([bin(i).count("1") for i in idx])
    return first, rest, counts


def _operator_locality(M: np.ndarray, n_qubits: int, tol: float):
    """Residuals of one operator, written in the local basis.

    Returns (nonlocal, grouping, diagonal_link, L1, lambda_table, witness).
    """
    first, rest, counts = _local_labels(n_qubits)
    scale = np.abs(M).max()
    if scale == 0:
        return 0.0, 0.0, 0.0, np.zeros((2, 2), complex), {}, None
    A = M / scale
    same_rest = rest[:, None] == rest[None, :]
    off = np.where(same_rest, 0, np.abs(A))
    nonlocal_res = float(off.max())
    witness = None
    if nonlocal_res > tol:
        a, b = np.unravel_index(int(np.argmax(off)), A.shape)
        witness = f"<{a}|M|{b}> couples qubits beyond the first"

    # entries sharing (s1', s1, n', n) must coincide
    groups: dict = {}
    for a, b in zip(*np.nonzero(same_rest)):
        key = (int(first[a]), int(first[b]), int(counts[a]), int(counts[b]))
        groups.setdefault(key, []).append(A[a, b])
    grouping = 0.0
    value = {}
    for key, vals in groups.items():
        vals = np.array(vals)
        value[key] = vals.mean()
        grouping = max(grouping, float(np.abs(vals - vals.mean()).max()))

    # L1[s1', s1] * lambda(n', n): the two diagonal blocks share lambda(n, n)
    L1 = np.zeros((2, 2), dtype=complex)
    for (x1, x0, _, _), v in value.items():
        if abs(v) > abs(L1[x1, x0]):
            L1[x1, x0] = v
    diag_link = 0.0
    shared = sorted({k[2] for k in value if k[0] == 0 and k[1] == 0} & {k[2] for k in value if k[0] == 1 and k[1] == 1})
    for n1 in shared:
        for n2 in shared:
            v00a, v11a = value[(0, 0, n1, n1)], value[(1, 1, n1, n1)]
            v00b, v11b = value[(0, 0, n2, n2)], value[(1, 1, n2, n2)]
            diag_link = max(diag_link, float(abs(v11a * v00b - v11b * v00a)))
    lam = {}
    for (x1, x0, n1, n0), v in value.items():
        ref = L1[x1, x0]
        if abs(ref) > tol:
            lam[(n1, n0)] = v / ref
    return nonlocal_res, grouping, diag_link, L1 * scale, lam, witness


def classify_generalized_local(kraus: KrausSet, spectrum: Spectrum, tol: float = 1e-6) -> dict:
    """Locality of the Kraus operators in the local product basis.

    An operator is generalized local when its local-basis matrix acts on
    qubit 1 only, with entries ``lambda(n', n) <s1'|L1|s1>`` where ``n`` and
    ``n'`` are the excitation counts of the two basis states. It is
    strictly local when ``lambda`` is constant. ``residual_unrestricted``
    drops the requirement that ``lambda`` depend on excitation counts alone.
    """
    n_qubits = int(round(np.log2(spectrum.dim)))
    worst_nonlocal = 0.0
    worst_general = 0.0
    strict = True
    witness = None
    tables = []
    L1s = []
    for l, M in enumerate(kraus.operators):
        M_loc = spectrum.to_local(M)
        nonlocal_res, grouping, link, L1, lam, wit = _operator_locality(M_loc, n_qubits, tol)
        general = max(nonlocal_res, grouping, link)
        if nonlocal_res > worst_nonlocal:
            worst_nonlocal = nonlocal_res
        if general > worst_general:
            worst_general = general
            witness = wit or f"operator {l}: lambda not a function of excitation counts"
        vals = np.array(list(lam.values()))
        if vals.size and np.abs(vals - vals[0]).max() > tol:
            strict = False
        tables.append(lam)
        L1s.append(L1)
    is_local = worst_general <= tol
    return {
        "is_generalized_local": is_local,
        "is_strictly_local": bool(is_local and strict),
        "residual": worst_general,
        "residual_unrestricted": worst_nonlocal,
        "witness": witness,
        "L1": L1s,
        "lambda": tables,
    }


def transition_rates(tensor: CollisionTensor, gamma: float = 1.0, neg_tol: float = 1e-10, imag_tol: float = 1e-10) -> np.ndarray:
    """``rates[j, j'] = gamma * S[j', j', j, j]``, the rate of ``j -> j'``."""
    pops = np.einsum("aajj->ja", tensor.entries)
    if np.abs(pops.imag).max() > imag_tol:
        raise NegativeRate("population transfer has a non-negligible imaginary part")
    pops = pops.real
    if pops.min() < -neg_tol:
        j, a = np.unravel_index(int(np.argmin(pops)), pops.shape)
        raise NegativeRate(f"rate {j}->{a} is {pops[j, a]:.3e}")
    return gamma * np.clip(pops, 0, None)


def gibbs_invariance(tensor: CollisionTensor, spectrum: Spectrum, beta: float, energies=None) -> float:
    """Trace distance between ``S(G)`` and ``G`` for the Gibbs state ``G``.

    ``energies`` defaults to the spectrum; pass the local energies to test
    the local Gibbs state.
    """
    e = spectrum.energies if energies is None else np.asarray(energies)
    G = np.diag(boltzmann_weights(e, beta)).astype(complex)
    return trace_distance(tensor.apply(G), G)


def classify(tensor: CollisionTensor, spectrum: Spectrum, beta: float, kraus: KrausSet | None = None, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """Run every classifier and collect the results in one report."""
    from .collision import kraus_decomposition

    kraus = kraus if kraus is not None else kraus_decomposition(tensor)
    rep = ClassificationReport()
    inc = classify_incoherent(kraus, tol)
    rep.merge("is_IO", inc["is_IO"], inc["residual_IO"], inc["witness_IO"])
    rep.merge("is_SIO", inc["is_SIO"], inc["residual_SIO"], inc["witness_SIO"])
    tio = classify_tio(tensor, spectrum, tol)
    rep.merge("is_TIO", tio["is_TIO"], tio["residual"], tio["witness"])
    loc = classify_generalized_local(kraus, spectrum)
    rep.merge("is_generalized_local", loc["is_generalized_local"], loc["residual"], loc["witness"])
    rep.merge("is_strictly_local", loc["is_strictly_local"], loc["residual"], None)
    defect = gibbs_invariance(tensor, spectrum, beta)
    rep.merge("gibbs_invariant", defect <= 1e-6, defect, None)
    rep.extra["variant"] = tensor.variant.value
    rep.extra["kraus_rank"] = len(kraus.operators)
    rep.extra["locality_residual_unrestricted"] = f"{loc['residual_unrestricted']:.17g}"
    return rep
