"""Composite Gauss-Legendre rules on [0, q_max] with breakpoints.

Every panel is integrated in an angle variable through the map
``x = a + L*phi(s)``, ``s = sin^2(theta/2)``, ``phi(s) = s^2 (3 - 2 s)``.
The map flattens both panel ends to fourth order, so endpoint factors such
as ``(x - a)^{k/4}`` (k >= -3) become analytic in ``theta`` and Gauss-Legendre
keeps converging geometrically across channel thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureConfig:
    panels: int = 8
    nodes: int = 32
    W: float = 40.0
    tol_quad: float = 1e-7
    check_convergence: bool = True

    def __post_init__(self):
        if self.panels < 1 or self.nodes < 2:
            raise ValueError("need at least one panel and two nodes")
        if not self.W > 0 or not self.tol_quad > 0:
            raise ValueError("W and tol_quad must be positive")

    def doubled(self) -> "QuadratureConfig":
        return QuadratureConfig(self.panels, 2 * self.nodes, self.W, self.tol_quad, False)


def _reference_rule(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = np.pi * (x + 1) / 2
    s = np.sin(theta / 2) ** 2
    phi = s * s * (3 - 2 * s)
    # dphi/dtheta = 6 s (1 - s) * ds/dtheta, ds/dtheta = sin(theta)/2
    dphi = 3 * s * (1 - s) * np.sin(theta)
    return phi, w * (np.pi / 2) * dphi


def breakpoints(singular_sq, q_max: float, panels: int) -> np.ndarray:
    """Panel edges: thresholds, a uniform partition and geometric grading.

    ``singular_sq`` holds ``q_s^2`` for every point where the integrand has a
    square-root branch; negative entries are points on the imaginary axis and
    only steer the grading near the origin.
    """
    sq = np.asarray(singular_sq, dtype=float).ravel()
    sing = np.concatenate([np.sqrt(sq[sq > 0]) + 0j, 1j * np.sqrt(-sq[sq < 0])])
    real_pts = np.sqrt(sq[(sq > 0) & (sq < q_max**2)])
    edges = np.concatenate([[0.0, q_max], np.linspace(0, q_max, panels + 1), real_pts])
    edges = _dedupe(np.sort(edges), q_max)
    extra = []
    for a, b in zip(edges[:-1], edges[1:]):
        half = (b - a) / 2
        for end, direction in ((a, 1.0), (b, -1.0)):
            dist = np.abs(sing - end)
            dist = dist[dist > 1e-13 * max(q_max, 1.0)]
            if dist.size == 0:
                continue
            r = dist.min()
            while r < half:
                extra.append(end + direction * r)
                r *= 2
    if extra:
        edges = _dedupe(np.sort(np.concatenate([edges, extra])), q_max)
    return edges


def refine_edges(edges, probe, nodes: int = 16, tol: float = 1e-8, max_rounds: int = 30) -> np.ndarray:
    """Bisect panels until a vector-valued ``probe`` integrates stably.

    A panel is split when doubling its node count changes any component of
    the probe integral by more than ``tol``. Only the children of split
    panels are examined again, so smooth regions cost one probe pass.
    """
    edges = np.asarray(edges, dtype=float)
    coarse, fine = _reference_rule(nodes), _reference_rule(2 * nodes)
    active = np.ones(len(edges) - 1, dtype=bool)

    def panel_integrals(a, L, rule):
        phi, w = rule
        vals = probe((a[:, None] + L[:, None] * phi[None, :]).ravel())
        vals = np.asarray(vals).reshape(len(a), len(phi), -1)
        return np.einsum("pn,pnk->pk", L[:, None] * w[None, :], vals)

    for _ in range(max_rounds):
        a = edges[:-1][active]
        L = np.diff(edges)[active]
        if a.size == 0:
            break
        change = np.abs(panel_integrals(a, L, fine) - panel_integrals(a, L, coarse)).max(axis=1)
        bad = change > tol
        if not bad.any():
            break
        mids = a[bad] + L[bad] / 2
        edges = np.sort(np.concatenate([edges, mids]))
        active = np.isin(edges[:-1], np.concatenate([a[bad], mids]))
    return edges


def _dedupe(edges, scale):
    keep = [edges[0]]
    for e in edges[1:]:
        if e - keep[-1] > 1e-14 * max(scale, 1.0):
            keep.append(e)
    return np.array(keep)


def composite_rule(edges: np.ndarray, nodes: int):
    """Nodes and weights for the panels delimited by ``edges``."""
    phi, w = _reference_rule(nodes)
    a = edges[:-1, None]
    L = np.diff(edges)[:, None]
    return (a + L * phi[None, :]).ravel(), (L * w[None, :]).ravel()


def momentum_cutoff(mass: float, beta: float, W: float, spread: float = 0.0) -> float:
    """Largest outgoing momentum such that every incoming kinetic energy exceeds ``W/beta``."""
    return float(np.sqrt(2 * mass * (W / beta + max(spread, 0.0))))
