"""Structural constants of a (class, MDP, policy, data distribution) problem.

Everything here needs the true MDP; values are exact up to floating point.
Unbounded suprema are reported as ``math.inf`` and serialised as ``"inf"``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .classes import FiniteClass, LinearClass, check_realizability, member_distances, project, projection_matrix
from .linalg import max_norm_on_ball, max_rayleigh
from .mdp import (backup_variance, bellman_backup, exact_q, next_value, occupancy, policy_transition,
                  prediction_error, weighted_norm)

BE_TOL = 1e-10  # Bellman errors below this count as exact fixed points
M_TOL = 1e-13
E_TOL = 1e-9
N_GRID = 21


@dataclass
class DiagnosticsReport:
    beta: float
    concentrability: float
    opc: float
    inherent_be: float | None
    curve: list = field(default_factory=list)  # [(r, I(r) or None when F(r) is empty)]
    bounds: tuple = (math.nan, math.nan)
    realizable: bool = False

    def to_json(self):
        return {
            "beta": _num(self.beta),
            "concentrability": _num(self.concentrability),
            "opc": _num(self.opc),
            "inherent_be": _num(self.inherent_be),
            "curve": [{"r": _num(r), "I": _num(v), "empty": v is None} for r, v in self.curve],
            "bounds": [_num(b) for b in self.bounds],
            "realizable": bool(self.realizable),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            beta=_unnum(obj["beta"]),
            concentrability=_unnum(obj["concentrability"]),
            opc=_unnum(obj["opc"]),
            inherent_be=_unnum(obj["inherent_be"]),
            curve=[(_unnum(p["r"]), None if p["empty"] else _unnum(p["I"])) for p in obj["curve"]],
            bounds=tuple(_unnum(b) for b in obj["bounds"]),
            realizable=obj["realizable"],
        )


def _num(x):
    if x is None:
        return None
    x = float(x)
    return "inf" if math.isinf(x) else x


def _unnum(x):
    return math.inf if x == "inf" else x


# ---------------------------------------------------------------------------
# finite classes: exhaustive tables


@dataclass
class FiniteTables:
    fstar: np.ndarray
    backups: np.ndarray   # T f_k
    be_mu: np.ndarray     # ||f_k - T f_k||_mu
    dist: np.ndarray      # dist[k, j] = ||f_j - T f_k||_mu
    resid: np.ndarray     # min_j dist[k, j]
    best: np.ndarray      # argmin_j dist[k, j]


def backups_of(members, mdp, policy):
    V = np.einsum("ksa,sa->ks", members, policy)
    return mdp.mean_reward[None] + mdp.discount * np.einsum("sat,kt->ksa", mdp.transition, V)


def pairwise_distances(targets, members, w, chunk=256):
    """out[k, j] = ||members[j] - targets[k]||_w."""
    out = np.empty((len(targets), len(members)))
    for i in range(0, len(targets), chunk):
        diff = members[None] - targets[i:i + chunk, None]
        out[i:i + chunk] = np.sqrt(np.einsum("kjsa,sa->kj", diff**2, w))
    return out


def finite_tables(cls, mdp, policy, mu):
    F = cls.members
    TF = backups_of(F, mdp, policy)
    dist = pairwise_distances(TF, F, mu)
    be = np.sqrt(np.einsum("ksa,sa->k", (F - TF) ** 2, mu))
    best = np.argmin(dist, axis=1)
    resid = dist[np.arange(len(F)), best]
    resid = np.where(be <= BE_TOL, 0.0, np.minimum(resid, be))
    return FiniteTables(exact_q(mdp, policy), TF, be, dist, resid, best)


# ---------------------------------------------------------------------------
# linear classes: affine maps of the weight vector
#   f - T f        = B w - rbar
#   Pi T f - T f   = A w + (Pi - I) rbar


@dataclass
class LinearMaps:
    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    b: np.ndarray
    Pi: np.ndarray


def linear_maps(cls, mdp, policy, mu):
    Phi = cls.design
    n = Phi.shape[0]
    g = mdp.discount
    P = policy_transition(mdp, policy)
    Pi = projection_matrix(cls, mu)
    rbar = mdp.mean_reward.ravel()
    I = np.eye(n)
    return LinearMaps(A=g * (Pi - I) @ P @ Phi, a=(Pi - I) @ rbar, B=(I - g * P) @ Phi, b=-rbar, Pi=Pi)


def _gram(M, w):
    return M.T @ (w.ravel()[:, None] * M)


def _homog(M, v):
    return np.column_stack([M, v])


# ---------------------------------------------------------------------------
# public operations


def population_minimax_loss(cls, mdp, policy, mu, f):
    """M(f) = ||f - Tf||^2 - min_g ||g - Tf||^2 (clipped at 0)."""
    Tf = bellman_backup(mdp, policy, f)
    g = project(cls, Tf, mu)
    return max(weighted_norm(f - Tf, mu) ** 2 - weighted_norm(g - Tf, mu) ** 2, 0.0)


def inherent_bellman_error(cls, mdp, policy, mu):
    """sup_f inf_g ||g - T f||_mu."""
    if isinstance(cls, FiniteClass):
        return float(finite_tables(cls, mdp, policy, mu).resid.max())
    L = linear_maps(cls, mdp, policy, mu)
    sw = np.sqrt(mu.ravel())
    K, h = L.A * sw[:, None], L.a * sw
    if cls.weight_radius is None:
        if np.abs(K).max(initial=0.0) > 1e-12 * max(1.0, np.abs(h).max(initial=0.0)):
            raise ValueError("sup not finite: linear class without a weight radius")
        return float(np.linalg.norm(h))
    return max_norm_on_ball(K, h, cls.weight_radius)[0]


def default_r_grid(cls, mdp, policy, mu, n=N_GRID):
    if isinstance(cls, FiniteClass):
        rmax = float(finite_tables(cls, mdp, policy, mu).be_mu.max())
    else:
        rmax = 1.0
    if rmax <= 0:
        return np.zeros(1)
    return np.concatenate([[0.0], np.geomspace(1e-3 * rmax, rmax, n - 1)])


def incompleteness_function(cls, mdp, policy, mu, r_grid=None):
    """[(r, I(r))] with I(r) = None where F(r) is empty."""
    if r_grid is None:
        r_grid = default_r_grid(cls, mdp, policy, mu)
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid < 0) or np.any(np.diff(r_grid) < 0):
        raise ValueError("r_grid must be nonnegative and sorted ascending")
    if isinstance(cls, FiniteClass):
        t = finite_tables(cls, mdp, policy, mu)
        out = []
        for r in r_grid:
            inside = t.be_mu <= r + BE_TOL
            out.append((float(r), float(t.resid[inside].max()) if inside.any() else None))
        return out
    return [(float(r), _linear_localized(cls, mdp, policy, mu, r)) for r in r_grid]


def _linear_localized(cls, mdp, policy, mu, r, L=None):
    """sup ||A w + a||_mu subject to ||B w + b||_mu <= r, solved as a
    trust-region problem on the range of B."""
    L = L or linear_maps(cls, mdp, policy, mu)
    sw = np.sqrt(mu.ravel())
    N, c = L.B * sw[:, None], L.b * sw
    M, a = L.A * sw[:, None], L.a * sw
    w0, *_ = np.linalg.lstsq(N, -c, rcond=None)
    base = float(np.linalg.norm(N @ w0 + c))
    if r < base - BE_TOL:
        return None
    U, s, Vt = np.linalg.svd(N, full_matrices=True)
    keep = s > 1e-10 * max(s.max(initial=0.0), 1e-300)
    k = int(keep.sum())
    V_null = Vt[k:].T
    if V_null.shape[1] and np.abs(M @ V_null).max() > 1e-9 * max(1.0, np.abs(M).max()):
        return math.inf
    rho = math.sqrt(max(r * r - base * base, 0.0))
    K = M @ (Vt[:k].T / s[:k])
    return max_norm_on_ball(K, M @ w0 + a, rho)[0]


def beta(cls, mdp, policy, mu):
    """Incompleteness factor sup_f inf_g ||g - Tf|| / ||f - Tf||, in [0, 1]."""
    if isinstance(cls, FiniteClass):
        t = finite_tables(cls, mdp, policy, mu)
        pos = t.be_mu > BE_TOL
        if not pos.any():
            return 0.0
        return float(min(1.0, (t.resid[pos] / t.be_mu[pos]).max()))
    L = linear_maps(cls, mdp, policy, mu)
    Ah, Bh = _homog(L.A, L.a), _homog(L.B, L.b)
    q = max_rayleigh(_gram(Ah, mu), _gram(Bh, mu))
    return 1.0 if math.isinf(q) else float(min(1.0, math.sqrt(q)))


def concentrability(cls, mdp, policy, mu, s0):
    """sup_f ||f - Tf||^2_{d^pi} / ||f - Tf||^2_mu."""
    d = occupancy(mdp, policy, s0)
    if isinstance(cls, FiniteClass):
        t = finite_tables(cls, mdp, policy, mu)
        be_pi = np.sqrt(np.einsum("ksa,sa->k", (cls.members - t.backups) ** 2, d))
        pos = t.be_mu > BE_TOL
        if np.any(~pos & (be_pi > BE_TOL)):
            return math.inf
        return float(((be_pi[pos] / t.be_mu[pos]) ** 2).max()) if pos.any() else 0.0
    L = linear_maps(cls, mdp, policy, mu)
    Bh = _homog(L.B, L.b)
    return max_rayleigh(_gram(Bh, d), _gram(Bh, mu))


def concentrability_upper_bounds(mu, dpi):
    """Class-free bounds (E_mu[(d/mu)^2], sup d/mu) over the support of mu."""
    mu, dpi = np.asarray(mu, dtype=float), np.asarray(dpi, dtype=float)
    supp = mu > 0
    if np.any(~supp & (dpi > 0)):
        return math.inf, math.inf
    ratio = dpi[supp] / mu[supp]
    return float(np.sum(mu[supp] * ratio**2)), float(ratio.max())


def opc(cls, mdp, policy, mu, s0):
    """Off-policy cost coefficient sup_f E(f)^2 / M(f)."""
    fstar = exact_q(mdp, policy)
    if isinstance(cls, FiniteClass):
        t = finite_tables(cls, mdp, policy, mu)
        M = t.be_mu**2 - t.resid**2
        E = np.array([prediction_error(f, fstar, policy, s0) for f in cls.members])
        pos = M > M_TOL
        if np.any(~pos & (np.abs(E) > E_TOL)):
            return math.inf
        return float((E[pos] ** 2 / M[pos]).max()) if pos.any() else 0.0
    L = linear_maps(cls, mdp, policy, mu)
    Ah, Bh = _homog(L.A, L.a), _homog(L.B, L.b)
    G_M = _gram(Bh, mu) - _gram(Ah, mu)
    phi0 = cls.features[s0]
    e = np.concatenate([-(policy[s0] @ phi0), [float(policy[s0] @ fstar[s0])]])
    return max_rayleigh(np.outer(e, e), G_M, rtol=1e-9)


def sigma_sq(mdp, policy, mu, f):
    """E_mu Var[r + gamma f(s', pi)]: the double-sampling bias of the TD cost."""
    return float(np.sum(mu * backup_variance(mdp, policy, f)))


def expected_cost(mdp, policy, mu, g, f):
    """E c(g, f) by summation over every (s, a, r, s') atom."""
    v = next_value(f, policy)
    target = mdp.reward_values[:, :, :, None] + mdp.discount * v[None, None, None, :]
    prob = mu[:, :, None, None] * mdp.reward_probs[:, :, :, None] * mdp.transition[:, :, None, :]
    return float(np.sum(prob * (np.asarray(g)[:, :, None, None] - target) ** 2))


@dataclass
class ProcessMoments:
    px: float
    var_x: float
    py: float
    var_y: float
    realizable: bool


def _cost_moments(mdp, policy, mu, f_next, current, alt):
    """Mean and variance of c(current, f_next) - c(alt, f_next) over the data law."""
    v = next_value(f_next, policy)
    target = mdp.reward_values[:, :, :, None] + mdp.discount * v[None, None, None, :]
    prob = mu[:, :, None, None] * mdp.reward_probs[:, :, :, None] * mdp.transition[:, :, None, :]
    x = (current[:, :, None, None] - target) ** 2 - (alt[:, :, None, None] - target) ** 2
    mean = float(np.sum(prob * x))
    return mean, max(float(np.sum(prob * x**2)) - mean**2, 0.0)


def exact_process_moments(cls, mdp, policy, mu, f, g=None):
    """Moments of X(f) = c(f,f) - c(g_f,f) and Y(g) = c(f*,f*) - c(g,f*).

    ``g`` defaults to ``f``.  The Y moments always use the exact f*; the
    ``realizable`` flag records whether f* actually belongs to the class.
    """
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    fstar = exact_q(mdp, policy)
    gf = project(cls, bellman_backup(mdp, policy, f), mu)
    px, vx = _cost_moments(mdp, policy, mu, f, f, gf)
    py, vy = _cost_moments(mdp, policy, mu, fstar, fstar, g)
    return ProcessMoments(px, vx, py, vy, check_realizability(cls, mdp, policy, mu).is_realizable)


def diagnose(cls, mdp, policy, mu, s0, r_grid=None):
    """Assemble the full report."""
    d = occupancy(mdp, policy, s0)
    try:
        ibe = inherent_bellman_error(cls, mdp, policy, mu)
    except ValueError:
        ibe = None  # linear class without a weight radius: beta carries the information
    return DiagnosticsReport(
        beta=beta(cls, mdp, policy, mu),
        concentrability=concentrability(cls, mdp, policy, mu, s0),
        opc=opc(cls, mdp, policy, mu, s0),
        inherent_be=ibe,
        curve=incompleteness_function(cls, mdp, policy, mu, r_grid),
        bounds=concentrability_upper_bounds(mu, d),
        realizable=check_realizability(cls, mdp, policy, mu).is_realizable,
    )
