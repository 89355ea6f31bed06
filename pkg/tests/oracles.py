"""Independent reference computations used by several test modules."""
import numpy as np
from scipy import integrate

from collchain.scattering import smatrix_general


def _off_threshold(E, levels, gap=1e-9):
    """The general solver refuses energies on a threshold; step just above it."""
    near = np.abs(E - levels) < gap
    return E + 2 * gap if near.any() else E


def entry_by_incoming_momentum(spec, spectrum, jp, kp, j, k, sigma_p=None):
    """One Exact-tensor entry integrated over the incoming momentum ``p`` with scipy.

    ``pi(p)^2 = p^2 + 2m[(e_j - e_j') - (e_k - e_k')]`` and the measure is
    ``rho_U(p, pi) sqrt(p/pi) dp``; full S-matrices come from the general solver.
    """
    m, beta = spec.mass, spec.beta
    sigma = spec.sigma_p if sigma_p is None else sigma_p
    e = spectrum.energies
    shift = 2 * m * ((e[j] - e[jp]) - (e[k] - e[kp]))
    lo2 = max(0.0, 2 * m * (e[jp] - e[j]), -shift)
    p_max = np.sqrt(2 * m * (40 / beta + e.max() - e.min()))

    def integrand(x, part):
        # integrate over whichever momentum stays nonzero at the lower limit
        if shift >= 0:
            p, pi = x, np.sqrt(x * x + shift)
            jac = np.sqrt(p / pi)
        else:
            pi, p = x, np.sqrt(x * x - shift)
            jac = np.sqrt(pi / p)
        mid = (p + pi) / 2
        kern = (beta / m) * mid * np.exp(-beta * mid**2 / (2 * m) - (p - pi) ** 2 / (2 * sigma**2))
        a = smatrix_general(_off_threshold(p * p / (2 * m) + e[j], e), spectrum, spec)
        b = smatrix_general(_off_threshold(pi * pi / (2 * m) + e[k], e), spectrum, spec)
        val = sum(x_[jp, j] * np.conj(y[kp, k]) for x_, y in ((a.transmitted, b.transmitted), (a.reflected, b.reflected)))
        val *= kern * jac
        return val.real if part == 0 else val.imag

    # channel thresholds and limits, first as p^2, then in the integration variable
    to_x = 0.0 if shift >= 0 else shift
    pts = []
    for lev in e:
        for p2 in (2 * m * (lev - e[j]), 2 * m * (lev - e[k]) - shift):
            if p2 + to_x > lo2 + to_x:
                pts.append(np.sqrt(p2 + to_x))
    pts = sorted(set(pts))
    lo = np.sqrt(lo2 + to_x)
    x_max = np.sqrt(p_max**2 + to_x)

    # u = sqrt(x - lo) removes the inverse square-root endpoint
    def in_u(u, part):
        return 2 * u * integrand(lo + u * u, part) if u > 0 else 0.0

    u_pts = [np.sqrt(x - lo) for x in pts if lo < x < x_max]
    out = []
    for part in (0, 1):
        val, _ = integrate.quad(in_u, 0, np.sqrt(x_max - lo), args=(part,), points=u_pts or None, limit=400, epsabs=1e-10, epsrel=1e-10)
        out.append(val)
    return complex(out[0], out[1])
