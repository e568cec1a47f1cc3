"""Small dense linear-algebra routines shared by the diagnostics."""
import math

import numpy as np
from scipy import optimize

RANK_RTOL = 1e-10


def psd_range(G, rtol=RANK_RTOL):
    """Eigenpairs of a symmetric PSD matrix split into range and null space."""
    G = 0.5 * (G + G.T)
    lam, V = np.linalg.eigh(G)
    scale = max(lam.max(initial=0.0), 0.0)
    keep = lam > rtol * max(scale, 1e-300)
    if scale == 0.0:
        keep[:] = False
    return lam[keep], V[:, keep], V[:, ~keep]


def max_rayleigh(G_num, G_den, rtol=RANK_RTOL):
    """sup_z (z' G_num z) / (z' G_den z) over z with z' G_den z > 0.

    Returns ``math.inf`` when some direction in the null space of ``G_den``
    has a nonzero numerator; ``0.0`` when ``G_den`` vanishes and so does the
    numerator.
    """
    lam, V, N = psd_range(G_den, rtol)
    num_scale = max(np.abs(G_num).max(initial=0.0), np.abs(G_den).max(initial=0.0), 1.0)
    if N.shape[1]:
        null_part = N.T @ G_num @ N
        if np.abs(null_part).max() > rtol * num_scale:
            return math.inf
    if not lam.size:
        return 0.0
    W = V / np.sqrt(lam)
    R = W.T @ G_num @ W
    return float(max(np.linalg.eigvalsh(0.5 * (R + R.T)).max(), 0.0))


def max_norm_on_ball(K, h, radius):
    """Maximise ||K y + h|| over ||y|| <= radius.

    Maximising a convex quadratic over a ball is the non-convex trust-region
    subproblem; with K = U S V' the maximiser is y = V z,
    z_i = s_i b_i / (lam - s_i^2), b = U'h, where lam > max s_i^2 solves the
    secular equation ||z|| = radius.  Returns ``(value, y)``.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    h = np.asarray(h, dtype=float)
    k = K.shape[1]
    if radius <= 0 or k == 0:
        return float(np.linalg.norm(h)), np.zeros(k)
    U, s, Vt = np.linalg.svd(K, full_matrices=False)
    keep = s > RANK_RTOL * max(s.max(initial=0.0), 1e-300)
    if not keep.any():
        return float(np.linalg.norm(h)), np.zeros(k)
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    b = U.T @ h
    s2 = s**2
    lmax = s2.max()
    top = s2 >= lmax * (1 - 1e-12)
    scale = s.max() * radius + np.linalg.norm(h)

    def z_of(t):
        return s * b / (lmax + t - s2)

    def excess(t):
        return np.linalg.norm(z_of(t)) - radius

    if np.linalg.norm(b[top]) <= 1e-14 * scale:
        # hard case: the leading singular direction is orthogonal to h
        z = np.zeros_like(s)
        z[~top] = s[~top] * b[~top] / (lmax - s2[~top])
        rest = radius**2 - z @ z
        if rest >= 0:
            z[np.argmax(top)] = math.sqrt(rest)
            y = Vt.T @ z
            return float(np.linalg.norm(K @ y + h)), y
    # ||z(t)|| decreases in t > 0 and is at most s_max ||b|| / t
    t_hi = s.max() * np.linalg.norm(b) / radius * (1 + 1e-12) + 1e-300
    t_lo = t_hi
    while excess(t_lo) < 0 and t_lo > 1e-300:
        t_lo *= 0.5
    if excess(t_lo) < 0:
        t = t_lo
    elif excess(t_hi) >= 0:
        t = t_hi
    else:
        t = optimize.brentq(excess, t_lo, t_hi, xtol=1e-300, rtol=8 * np.finfo(float).eps, maxiter=2000)
    z = z_of(t)
    z *= radius / max(np.linalg.norm(z), 1e-300)
    y = Vt.T @ z
    return float(np.linalg.norm(K @ y + h)), y
