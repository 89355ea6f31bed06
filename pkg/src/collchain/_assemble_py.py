"""Pure numpy implementation of the collision-tensor contraction."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _row(a, q, wq, u, delta, labels, mass, beta, sigma_p, profile):
    d = delta.shape[0]
    p2 = q[:, None] ** 2 + 2 * mass * delta[a][None, :]
    pi2 = q[:, None, None] ** 2 + 2 * mass * delta[None, :, :]
    p = np.sqrt(np.clip(p2, 0, None))[:, :, None, None]
    pi = np.sqrt(np.clip(pi2, 0, None))[:, None, :, :]
    valid = (p2 > 0)[:, :, None, None] & (pi2 > 0)[:, None, :, :]
    mid = (p + pi) / 2
    if profile is None:
        kern = (beta / mass) * mid * np.exp(-beta * mid**2 / (2 * mass))
    else:
        kern = profile(mid)
    if sigma_p is not None:
        kern = kern * np.exp(-((p - pi) ** 2) / (2 * sigma_p**2))
    lab = labels[a][:, None, None]
    allowed = (lab == labels[None, :, :]) & (lab >= 0)
    weight = np.where(valid & allowed[None], kern, 0.0) * (wq * q)[:, None, None, None]
    block = np.einsum("qbce,xqb,xqce->cbe", weight, u[:, :, a, :], u.conj())
    return a, block


def contract(q, wq, u, delta, labels, mass, beta, sigma_p=None, n_threads=1, profile=None):
    """Collision tensor ``S[j', k', j, k]`` from reduced amplitudes on a grid.

    ``u[alpha, node, a, b]`` are amplitudes divided by the square root of the
    incoming wavenumber, ``delta[a, b] = e_a - e_b``, and entries couple only
    when ``labels[j', j] == labels[k', k] >= 0``. ``sigma_p=None`` drops the
    Gaussian coherence factor of the incident momentum state. ``profile``
    replaces the effusion density evaluated at the mean momentum.
    """
    q = np.ascontiguousarray(q, dtype=float)
    wq = np.ascontiguousarray(wq, dtype=float)
    d = delta.shape[0]
    S = np.zeros((d, d, d, d), dtype=complex)
    args = (q, wq, u, delta, labels, mass, beta, sigma_p, profile)
    if n_threads and n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            results = list(pool.map(lambda a: _row(a, *args), range(d)))
    else:
        results = [_row(a, *args) for a in range(d)]
    for a, block in results:
        S[a] = block
    return symmetrize_from_canonical(S)


def symmetrize_from_canonical(S):
    """Overwrite non-canonical entries with the conjugate of their partner.

    Canonical means ``j'*d + j <= k'*d + k``; the partner of
    ``S[j', k', j, k]`` is ``S[k', j', k, j]``.
    """
    d = S.shape[0]
    flat = np.arange(d)[:, None] * d + np.arange(d)[None, :]
    first = flat[:, None, :, None]
    second = flat[None, :, None, :]
    lower = np.broadcast_to(first > second, S.shape)
    partner = np.conj(np.transpose(S, (1, 0, 3, 2)))
    S = np.where(lower, partner, S)
    diag = np.broadcast_to(first == second, S.shape)
    return np.where(diag, S.real + 0j, S)
