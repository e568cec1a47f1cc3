"""Slow reference implementations written with explicit loops.

They share no code with the package beyond reading the MDP arrays, so an
agreement between the two is evidence for both.
"""
import math

import numpy as np


def q_by_iteration(mdp, pi, iters=None):
    S, A = mdp.shape
    g = mdp.discount
    if iters is None:
        iters = int(math.ceil(60 / -math.log(g))) if g > 0 else 1
    f = np.zeros((S, A))
    for _ in range(iters):
        f = backup_loops(mdp, pi, f)
    return f


def backup_loops(mdp, pi, f):
    S, A = mdp.shape
    out = np.zeros((S, A))
    for s in range(S):
        for a in range(A):
            rbar = sum(v * p for v, p in zip(mdp.reward_values[s, a], mdp.reward_probs[s, a]))
            nxt = 0.0
            for s2 in range(S):
                nxt += mdp.transition[s, a, s2] * sum(pi[s2, b] * f[s2, b] for b in range(A))
            out[s, a] = rbar + mdp.discount * nxt
    return out


def norm_loops(f, w):
    return math.sqrt(sum(w[s, a] * f[s, a] ** 2 for s in range(f.shape[0]) for a in range(f.shape[1])))


def occupancy_rollout(mdp, pi, s0, horizon=None):
    """(1 - gamma) sum_t gamma^t Pr(s_t, a_t) by forward propagation."""
    S, A = mdp.shape
    g = mdp.discount
    if horizon is None:
        horizon = int(math.ceil(80 / -math.log(g))) if g > 0 else 1
    state = np.zeros(S)
    state[s0] = 1.0
    d = np.zeros((S, A))
    for t in range(horizon):
        sa = state[:, None] * pi
        d += (1 - g) * g**t * sa
        state = np.einsum("sa,sat->t", sa, mdp.transition)
    return d


def finite_constants(members, mdp, pi, mu, s0, r_grid):
    """beta, C, C*, I(r) on the grid, and inherent BE for a finite class."""
    fstar = q_by_iteration(mdp, pi)
    d = occupancy_rollout(mdp, pi, s0)
    be, resid, be_pi, err = [], [], [], []
    for f in members:
        Tf = backup_loops(mdp, pi, f)
        be.append(norm_loops(f - Tf, mu))
        be_pi.append(norm_loops(f - Tf, d))
        resid.append(min(norm_loops(g - Tf, mu) for g in members))
        err.append(sum(pi[s0, a] * (fstar[s0, a] - f[s0, a]) for a in range(f.shape[1])))
    beta = 0.0
    C = 0.0
    cstar = 0.0
    for k in range(len(members)):
        if be[k] > 1e-10:
            beta = max(beta, resid[k] / be[k])
            C = max(C, be_pi[k] ** 2 / be[k] ** 2)
        elif be_pi[k] > 1e-10:
            C = math.inf
        M = be[k] ** 2 - resid[k] ** 2
        if M > 1e-13:
            cstar = max(cstar, err[k] ** 2 / M)
        elif abs(err[k]) > 1e-9:
            cstar = math.inf
    curve = []
    for r in r_grid:
        inside = [resid[k] for k in range(len(members)) if be[k] <= r + 1e-10]
        curve.append((r, max(inside) if inside else None))
    return {"beta": min(beta, 1.0), "C": C, "opc": cstar, "curve": curve, "inherent_be": max(resid),
            "fstar": fstar, "occupancy": d}


def empirical_loss_loops(g, f, tuples, weights, pi, gamma):
    tot = wsum = 0.0
    for (s, a, r, s2), w in zip(tuples, weights):
        y = r + gamma * sum(pi[s2, b] * f[s2, b] for b in range(f.shape[1]))
        tot += w * (g[s, a] - y) ** 2
        wsum += w
    return tot / wsum


def minimax_loops(members, tuples, weights, pi, gamma):
    """argmin_f [L(f, f) - min_g L(g, f)] by double enumeration (lowest index wins)."""
    best, best_k = math.inf, None
    for k, f in enumerate(members):
        own = empirical_loss_loops(f, f, tuples, weights, pi, gamma)
        inner = min(empirical_loss_loops(g, f, tuples, weights, pi, gamma) for g in members)
        if own - inner < best - 1e-15:
            best, best_k = own - inner, k
    return best_k, best


def linear_sphere_samples(features, mdp, pi, mu, step=2e-3):
    """Bellman error, projected residual and t for a 2-feature class on a grid
    of the homogenized sphere {(w, t): |w|^2 + t^2 = 1, t >= 0}.

    The point (w, t) with t > 0 stands for the predictor with weights w / t;
    Bellman error and residual are homogeneous of degree one in (w, t).
    """
    S, A, d = features.shape
    assert d == 2
    zero = np.zeros((S, A))
    T0 = backup_loops(mdp, pi, zero).ravel()
    L = [backup_loops(mdp, pi, features[:, :, j]).ravel() - T0 for j in range(2)]
    Phi = features.reshape(-1, 2)
    m = mu.ravel()
    G = Phi.T @ (m[:, None] * Phi)
    polar = np.arange(0.0, math.pi / 2 + step / 2, step)  # angle away from the t axis
    azim = np.arange(0.0, 2 * math.pi, step)
    th, ph = np.meshgrid(polar, azim, indexing="ij")
    t = np.cos(th).ravel()
    w1 = (np.sin(th) * np.cos(ph)).ravel()
    w2 = (np.sin(th) * np.sin(ph)).ravel()
    f = np.outer(w1, Phi[:, 0]) + np.outer(w2, Phi[:, 1])
    Tf = np.outer(t, T0) + np.outer(w1, L[0]) + np.outer(w2, L[1])
    be = np.sqrt(((f - Tf) ** 2) @ m)
    coef = np.linalg.solve(G, ((Tf * m) @ Phi).T).T
    resid = np.sqrt(((Tf - coef @ Phi.T) ** 2) @ m)
    return be, resid, t
