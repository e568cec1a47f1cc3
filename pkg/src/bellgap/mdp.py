"""Tabular discounted MDPs evaluated under a fixed target policy.

Q-functions, policies and state-action distributions are plain ``(S, A)``
arrays.  Pair-indexed linear algebra flattens them row-major, so pair
``(s, a)`` sits at position ``s * A + a``.
"""
from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-12


@dataclass(frozen=True)
class TabularMdp:
    """Finite MDP with finite-support reward laws.

    ``reward_values`` and ``reward_probs`` have shape ``(S, A, K)``; laws with
    fewer than ``K`` atoms are padded with zero-probability entries.
    """

    transition: np.ndarray
    reward_values: np.ndarray
    reward_probs: np.ndarray
    discount: float
    mean_reward: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        rv = np.asarray(self.reward_values, dtype=float)
        rp = np.asarray(self.reward_probs, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if rv.ndim != 3 or rv.shape != rp.shape or rv.shape[:2] != P.shape[:2]:
            raise ValueError("reward_values/reward_probs must have shape (S, A, K)")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(rv)) and np.all(np.isfinite(rp))):
            raise ValueError("non-finite entries in MDP")
        if np.any(P < 0) or np.any(np.abs(P.sum(-1) - 1) > ATOL):
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if np.any(rp < 0) or np.any(np.abs(rp.sum(-1) - 1) > ATOL):
            raise ValueError("reward law probabilities must be nonnegative and sum to 1")
        if np.any((rv < 0) | (rv > 1)):
            raise ValueError("reward values must lie in [0, 1]")
        if not 0 <= self.discount < 1:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        for name, arr in (("transition", P), ("reward_values", rv), ("reward_probs", rp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "discount", float(self.discount))
        mean = (rv * rp).sum(-1)
        mean.setflags(write=False)
        object.__setattr__(self, "mean_reward", mean)

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_actions(self):
        return self.transition.shape[1]

    @property
    def shape(self):
        return self.transition.shape[:2]

    @classmethod
    def from_laws(cls, transition, reward_laws, discount):
        """Build from nested ``reward_laws[s][a] = [(value, prob), ...]``."""
        S, A = len(reward_laws), len(reward_laws[0])
        K = max(len(reward_laws[s][a]) for s in range(S) for a in range(A))
        rv, rp = np.zeros((S, A, K)), np.zeros((S, A, K))
        for s in range(S):
            for a in range(A):
                for k, (v, p) in enumerate(reward_laws[s][a]):
                    rv[s, a, k], rp[s, a, k] = v, p
        return cls(np.asarray(transition, dtype=float), rv, rp, discount)

    def reward_laws(self):
        """Nested ``[(value, prob), ...]`` lists with padding atoms dropped."""
        S, A = self.shape
        return [[[(float(v), float(p)) for v, p in zip(self.reward_values[s, a], self.reward_probs[s, a]) if p > 0]
                 for a in range(A)] for s in range(S)]


def check_policy(policy, n_states=None, n_actions=None):
    pi = np.asarray(policy, dtype=float)
    if pi.ndim != 2:
        raise ValueError("policy must be an (S, A) table")
    if n_states is not None and pi.shape != (n_states, n_actions):
        raise ValueError(f"policy shape {pi.shape} does not match MDP {(n_states, n_actions)}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(1) - 1) > ATOL):
        raise ValueError("policy rows must be nonnegative and sum to 1")
    return pi


def check_distribution(dist, shape=None):
    w = np.asarray(dist, dtype=float)
    if shape is not None and w.shape != tuple(shape):
        raise ValueError(f"distribution shape {w.shape} does not match {tuple(shape)}")
    if np.any(w < 0) or abs(w.sum() - 1) > ATOL:
        raise ValueError("state-action distribution must be nonnegative and sum to 1")
    return w


def next_value(f, policy):
    """f(s, pi) for every state."""
    return (np.asarray(f) * policy).sum(1)


def policy_transition(mdp, policy):
    """Pair-to-pair kernel P_pi[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')."""
    S, A = mdp.shape
    return (mdp.transition[:, :, :, None] * policy[None, None, :, :]).reshape(S * A, S * A)


def exact_q(mdp, policy):
    """Action-value function of ``policy`` from a dense linear solve."""
    S, A = mdp.shape
    M = np.eye(S * A) - mdp.discount * policy_transition(mdp, policy)
    return np.linalg.solve(M, mdp.mean_reward.ravel()).reshape(S, A)


def bellman_backup(mdp, policy, f):
    return mdp.mean_reward + mdp.discount * mdp.transition @ next_value(f, policy)


def bellman_error(mdp, policy, f):
    return np.asarray(f) - bellman_backup(mdp, policy, f)


def td_error(f, transition, policy, discount):
    """Temporal difference error f(s,a) - r - gamma f(s', pi) of one tuple."""
    s, a, r, s_next = transition
    return f[s, a] - r - discount * np.dot(policy[s_next], f[s_next])


def backup_variance(mdp, policy, f):
    """Per-pair variance of r + gamma f(s', pi) with r and s' drawn independently."""
    v = next_value(f, policy)
    rv, rp = mdp.reward_values, mdp.reward_probs
    var_r = (rp * rv**2).sum(-1) - mdp.mean_reward**2
    ev = mdp.transition @ v
    var_v = mdp.transition @ v**2 - ev**2
    return np.maximum(var_r, 0) + mdp.discount**2 * np.maximum(var_v, 0)


def occupancy(mdp, policy, s0):
    """Discounted state-action occupancy of ``policy`` started from ``s0``."""
    S, _ = mdp.shape
    if not 0 <= s0 < S:
        raise ValueError(f"start state {s0} out of range")
    g = mdp.discount
    P_state = np.einsum("sa,sat->st", policy, mdp.transition)
    e = np.zeros(S)
    e[s0] = 1.0
    d_state = (1 - g) * np.linalg.solve(np.eye(S) - g * P_state.T, e)
    d = d_state[:, None] * policy
    return np.clip(d, 0.0, None)


def prediction_error(f, fstar, policy, s0):
    """Signed error (f* - f)(s0, pi)."""
    return float(np.dot(policy[s0], np.asarray(fstar)[s0] - np.asarray(f)[s0]))


def weighted_norm(f, w):
    return float(np.sqrt(np.sum(w * np.asarray(f) ** 2)))
