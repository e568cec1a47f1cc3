"""Problem generators: random bounded instances, complete classes, and the
two-state line geometry whose incompleteness factor is sin(theta)."""
import math

import numpy as np
from scipy import optimize

from .classes import FiniteClass, LinearClass
from .diagnostics import beta
from .mdp import TabularMdp, exact_q
from .specio import ProblemSpec


def random_mdp(rng, n_states, n_actions, gamma, max_atoms=3, reward_scale=None):
    """Random MDP whose rewards lie in [0, reward_scale].

    The default scale ``1 - gamma`` keeps every value function and every
    sampled backup r + gamma f(s') inside [-1, 1] for sup-norm-1 predictors.
    """
    scale = 1 - gamma if reward_scale is None else reward_scale
    P = rng.dirichlet(np.full(n_states, 0.5), size=(n_states, n_actions))
    laws = []
    for s in range(n_states):
        row = []
        for a in range(n_actions):
            k = int(rng.integers(1, max_atoms + 1))
            vals = rng.uniform(0, scale, size=k)
            probs = rng.dirichlet(np.ones(k))
            row.append(list(zip(vals.tolist(), probs.tolist())))
        laws.append(row)
    # renormalise the Dirichlet rows exactly
    P = P / P.sum(-1, keepdims=True)
    return TabularMdp.from_laws(P, laws, gamma)


def random_finite_class(rng, fstar, size, realizable=True, spread=None):
    """Bounded finite class mixing local perturbations of f* with far members."""
    S, A = fstar.shape
    members = []
    if realizable:
        members.append(fstar.copy())
    while len(members) < size:
        if rng.random() < 0.6:
            eps = rng.uniform(0.01, 0.5) if spread is None else spread
            f = fstar + eps * rng.uniform(-1, 1, size=(S, A))
        else:
            f = rng.uniform(-1, 1, size=(S, A))
        members.append(np.clip(f, -1, 1))
    members = np.array(members)
    perm = rng.permutation(len(members))
    return FiniteClass(members[perm], bounded=True)


def random_instance(rng, gamma=None, n_states=None, n_actions=None, size=None, realizable=True):
    """A random bounded problem with a finite class of 3-20 members."""
    S = int(rng.integers(2, 11)) if n_states is None else n_states
    A = int(rng.integers(2, 5)) if n_actions is None else n_actions
    gamma = float(rng.choice([0.5, 0.9])) if gamma is None else gamma
    K = int(rng.integers(3, 21)) if size is None else size
    mdp = random_mdp(rng, S, A, gamma)
    policy = rng.dirichlet(np.ones(A), size=S)
    policy /= policy.sum(1, keepdims=True)
    mu = rng.dirichlet(np.ones(S * A)).reshape(S, A)
    mu /= mu.sum()
    fstar = exact_q(mdp, policy)
    fclass = random_finite_class(rng, fstar, K, realizable=realizable)
    return ProblemSpec(mdp, policy, mu, int(rng.integers(S)), fclass, name="random")


def random_linear_instance(rng, dim=None, gamma=None, n_states=None, n_actions=None):
    """Random realizable linear class: f* plus random features, d <= 4."""
    S = int(rng.integers(2, 7)) if n_states is None else n_states
    A = int(rng.integers(2, 4)) if n_actions is None else n_actions
    d = int(rng.integers(1, 5)) if dim is None else dim
    d = min(d, S * A)
    gamma = float(rng.choice([0.5, 0.9])) if gamma is None else gamma
    mdp = random_mdp(rng, S, A, gamma)
    policy = rng.dirichlet(np.ones(A), size=S)
    policy /= policy.sum(1, keepdims=True)
    mu = rng.dirichlet(np.ones(S * A)).reshape(S, A)
    mu /= mu.sum()
    fstar = exact_q(mdp, policy)
    extra = rng.normal(size=(S, A, d - 1))
    feats = np.concatenate([fstar[:, :, None], extra], axis=2)
    mix = rng.normal(size=(d, d)) + 3 * np.eye(d)  # f* sits in the span, not on an axis
    return ProblemSpec(mdp, policy, mu, int(rng.integers(S)), LinearClass(feats @ mix), name="random-linear")


def complete_finite_class(mdp, policy, rng, size):
    """Finite class closed under T: f* plus shifts on actions the (deterministic)
    target policy never takes, so T maps every member back to f*."""
    fstar = exact_q(mdp, policy)
    off = policy == 0
    if not off.any():
        raise ValueError("need a policy with zero-probability actions")
    members = [fstar]
    while len(members) < size:
        shift = np.where(off, rng.uniform(-0.5, 0.5, size=fstar.shape), 0.0)
        members.append(np.clip(fstar + shift, -1, 1))
    return FiniteClass(np.array(members))


# ---------------------------------------------------------------------------
# line geometry

GEOMETRY_GAMMA = 0.9


def geometry_problem(state_weight, reward_mean=0.1, weight_radius=1.0, gamma=GEOMETRY_GAMMA):
    """Two states, two identical actions, every pair moves to state 0.

    State 0 pays a two-point reward with the given mean, state 1 pays nothing.
    The class is span{f*}; mu puts ``1 - state_weight`` on state 0 and
    ``state_weight`` on state 1 (uniform over actions), which tilts the
    Bellman error direction rbar away from the class by an angle that grows
    from 0 to 90 degrees as ``state_weight`` goes from 0 to 1.
    """
    m = float(state_weight)
    hi = 2 * reward_mean
    if hi > 1:
        raise ValueError("reward_mean must be at most 0.5")
    P = np.zeros((2, 2, 2))
    P[:, :, 0] = 1.0
    laws = [[[(0.0, 0.5), (hi, 0.5)]] * 2, [[(0.0, 1.0)]] * 2]
    mdp = TabularMdp.from_laws(P, laws, gamma)
    policy = np.array([[0.7, 0.3], [0.7, 0.3]])
    mu = np.array([[(1 - m) / 2, (1 - m) / 2], [m / 2, m / 2]])
    fstar = exact_q(mdp, policy)
    fclass = LinearClass(fstar[:, :, None], weight_radius=weight_radius)
    return ProblemSpec(mdp, policy, mu, 0, fclass, name=f"geometry-m{m:.6g}")


def geometry_instance(theta_deg, **kw):
    """Geometry problem whose diagnosed beta equals sin(theta).

    The state weight is found by root finding on the diagnosed beta, so the
    construction never assumes the closed form.
    """
    target = math.sin(math.radians(theta_deg))
    if not 0 <= theta_deg < 90:
        raise ValueError("theta must lie in [0, 90) degrees")

    def gap(m):
        p = geometry_problem(m, **kw)
        return beta(p.fclass, p.mdp, p.policy, p.mu) - target

    if target == 0:
        return geometry_problem(0.0, **kw)
    m = optimize.brentq(gap, 0.0, 1 - 1e-12, xtol=1e-15, rtol=1e-15)
    return geometry_problem(m, **kw)


# ---------------------------------------------------------------------------
# realizable line class with a tunable beta


def line_class_problem(target_beta=0.5, half_size=600, radius=0.2, seed=11, gamma=0.5):
    """Realizable finite class on the line f* + t u, t on a symmetric log grid.

    ``u`` mixes a direction on the never-taken action (which T annihilates)
    with an on-policy direction; the mixing weight is tuned so the class has
    the requested beta.  The log grid keeps the relative resolution of the
    estimate roughly constant from n = 1e2 to 1e5.
    """
    rng = np.random.default_rng(seed)
    S, A = 3, 2
    mdp = random_mdp(rng, S, A, gamma)
    policy = np.zeros((S, A))
    policy[:, 0] = 1.0
    mu = np.full((S, A), 1.0 / (S * A))
    fstar = exact_q(mdp, policy)
    u_off = np.zeros((S, A))
    u_off[:, 1] = [1.0, -0.8, 0.6]
    u_on = np.zeros((S, A))
    u_on[:, 0] = [1.0, 0.7, 0.9]
    pos = np.geomspace(1e-5, radius, half_size)
    ts = np.concatenate([-pos[::-1], [0.0], pos])

    def make(w):
        u = w * u_off + u_on
        return FiniteClass(fstar[None] + ts[:, None, None] * u[None])

    w = optimize.brentq(lambda w: beta(make(w), mdp, policy, mu) - target_beta, 1.0, 2.0, xtol=1e-12)
    return ProblemSpec(mdp, policy, mu, 0, make(w), name="consistency")
