"""Datasets, empirical minimax losses, fitted Q iteration and error bounds."""
import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .classes import FiniteClass, LinearClass, project, project_weights
from .diagnostics import pairwise_distances
from .mdp import next_value

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


def mu_hash(mu):
    return hashlib.sha256(np.ascontiguousarray(mu, dtype=float).tobytes()).hexdigest()[:16]


def seed_sequence(seed):
    """Accept an int, a tuple of ints (e.g. ``(master, index)``) or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence([int(x) for x in seed])
    return np.random.SeedSequence(int(seed))


@dataclass
class PairStats:
    """Per-pair sufficient statistics of a (weighted) dataset."""

    weight: np.ndarray       # (S, A), sums to 1
    reward_mean: np.ndarray  # (S, A), zero where unvisited
    trans: np.ndarray        # (S, A, S) empirical successor law

    def mean_target(self, f, policy, discount):
        """Average regression target r + gamma f(s', pi) at every pair."""
        return self.reward_mean + discount * self.trans @ next_value(f, policy)


@dataclass
class Dataset:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    shape: tuple
    discount: float
    weights: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.int64)
        self.a = np.asarray(self.a, dtype=np.int64)
        self.r = np.asarray(self.r, dtype=float)
        self.s_next = np.asarray(self.s_next, dtype=np.int64)
        S, A = self.shape
        n = len(self.s)
        if not (len(self.a) == len(self.r) == len(self.s_next) == n):
            raise ValueError("dataset columns have different lengths")
        if n and (self.s.min() < 0 or self.s.max() >= S or self.s_next.min() < 0 or self.s_next.max() >= S
                  or self.a.min() < 0 or self.a.max() >= A):
            raise ValueError("dataset index out of range")
        if n and (self.r.min() < 0 or self.r.max() > 1):
            raise ValueError("dataset rewards must lie in [0, 1]")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if len(self.weights) != n or np.any(self.weights < 0) or abs(self.weights.sum() - 1) > 1e-9:
                raise ValueError("dataset weights must be a probability vector")

    @property
    def n(self):
        return len(self.s)

    def tuple_weights(self):
        return np.full(self.n, 1.0 / self.n) if self.weights is None else self.weights

    def pair_stats(self):
        S, A = self.shape
        w = self.tuple_weights()
        pair = self.s * A + self.a
        W = np.bincount(pair, weights=w, minlength=S * A)
        R = np.bincount(pair, weights=w * self.r, minlength=S * A)
        T = np.bincount(pair * S + self.s_next, weights=w, minlength=S * A * S).reshape(S * A, S)
        seen = W > 0
        R[seen] /= W[seen]
        T[seen] /= W[seen, None]
        return PairStats(W.reshape(S, A), R.reshape(S, A), T.reshape(S, A, S))

    def to_csv(self):
        buf = io.StringIO()
        meta = {k: v for k, v in self.provenance.items()}
        meta.update(n_states=self.shape[0], n_actions=self.shape[1], discount=repr(self.discount))
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["s", "a", "r", "s_next"] + (["weight"] if self.weights is not None else [])
        writer.writerow(cols)
        for i in range(self.n):
            row = [int(self.s[i]), int(self.a[i]), repr(float(self.r[i])), int(self.s_next[i])]
            if self.weights is not None:
                row.append(repr(float(self.weights[i])))
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("dataset CSV must start with a '# key=value' header comment")
        meta = dict(item.split("=", 1) for item in lines[0][1:].split())
        rows = list(csv.DictReader(lines[1:]))
        weights = np.array([float(r["weight"]) for r in rows]) if rows and "weight" in rows[0] else None
        shape = (int(meta.pop("n_states")), int(meta.pop("n_actions")))
        discount = float(meta.pop("discount"))
        return cls(
            s=[int(r["s"]) for r in rows], a=[int(r["a"]) for r in rows], r=[float(r["r"]) for r in rows],
            s_next=[int(r["s_next"]) for r in rows], shape=shape, discount=discount, weights=weights,
            provenance=meta,
        )


def sample_dataset(mdp, mu, n, seed):
    """n i.i.d. tuples: (s, a) ~ mu, r ~ R(s, a), s' ~ P(s, a)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ss = seed_sequence(seed)
    rng = np.random.default_rng(ss)
    S, A = mdp.shape
    mu = np.asarray(mu, dtype=float)
    cdf = np.cumsum(mu.ravel())
    pair = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), S * A - 1)
    s, a = np.divmod(pair, A)
    rcdf = np.cumsum(mdp.reward_probs, axis=-1)[s, a]
    k = (rng.random(n)[:, None] * rcdf[:, -1:] >= rcdf).sum(1)
    k = np.minimum(k, mdp.reward_values.shape[-1] - 1)
    r = mdp.reward_values[s, a, k]
    tcdf = np.cumsum(mdp.transition, axis=-1)[s, a]
    s_next = np.minimum((rng.random(n)[:, None] * tcdf[:, -1:] >= tcdf).sum(1), S - 1)
    ent = ss.entropy
    prov = {"kind": "sampled", "seed": "-".join(map(str, ent)) if isinstance(ent, (list, tuple)) else str(ent),
            "mu_hash": mu_hash(mu)}
    return Dataset(s, a, r, s_next, (S, A), mdp.discount, provenance=prov)


def population_dataset(mdp, mu):
    """Every (s, a, r, s') atom weighted by its probability under (mu, R, P).

    Empirical quantities computed on it equal their population counterparts.
    """
    S, A = mdp.shape
    K = mdp.reward_values.shape[-1]
    prob = mu[:, :, None, None] * mdp.reward_probs[:, :, :, None] * mdp.transition[:, :, None, :]
    idx = np.nonzero(prob > 0)
    s, a, k, t = idx
    w = prob[idx]
    return Dataset(s, a, mdp.reward_values[s, a, k], t, (S, A), mdp.discount, weights=w / w.sum(),
                   provenance={"kind": "population", "mu_hash": mu_hash(mu)})


def _check_nonempty(dataset):
    if dataset.n == 0:
        raise ValueError("empty dataset")


def empirical_loss(g, f, dataset, policy):
    """Weighted mean over tuples of (g(s,a) - r - gamma f(s', pi))^2."""
    _check_nonempty(dataset)
    v = next_value(f, policy)
    resid = np.asarray(g)[dataset.s, dataset.a] - dataset.r - dataset.discount * v[dataset.s_next]
    return float(np.sum(dataset.tuple_weights() * resid**2))


def _targets(members, stats, policy, discount):
    V = np.einsum("ksa,sa->ks", members, policy)
    return stats.reward_mean[None] + discount * np.einsum("sat,kt->ksa", stats.trans, V)


def _finite_loss_table(cls, stats, policy, discount):
    """D[k, j] = sum_sa W (f_j - ybar_{f_k})^2, the tuple loss up to a k-only constant."""
    Y = _targets(cls.members, stats, policy, discount)
    return pairwise_distances(Y, cls.members, stats.weight) ** 2


def empirical_minimax(f, dataset, cls, policy):
    """M_hat(f) = L_hat(f, f) - min_g L_hat(g, f)."""
    _check_nonempty(dataset)
    stats = dataset.pair_stats()
    f = np.asarray(f, dtype=float)
    y = stats.mean_target(f, policy, dataset.discount)
    g = project(cls, y, stats.weight)
    return float(np.sum(stats.weight * (f - y) ** 2) - np.sum(stats.weight * (g - y) ** 2))


@dataclass
class FitResult:
    estimate: np.ndarray
    program_value: float
    converged: bool = True
    iterations: int = 0
    history: list = field(default_factory=list)
    index: int | None = None           # finite classes
    weights: np.ndarray | None = None  # linear classes
    degenerate: bool = False

    def to_json(self):
        return {
            "estimate": self.estimate.tolist(),
            "program_value": self.program_value,
            "converged": self.converged,
            "iterations": self.iterations,
            "history": list(self.history),
            "index": self.index,
            "weights": None if self.weights is None else self.weights.tolist(),
            "degenerate": self.degenerate,
        }


def _lstd_system(cls, stats, policy, discount):
    """Weighted least-squares system whose residual norm squared is M_hat(w).

    With H the W-orthogonal projector onto span(Phi) and ybar(w) = rhat + gamma Q w,
    M_hat(w) = ||Phi w - H ybar(w)||_W^2 by Pythagoras.
    """
    Phi = cls.design
    sw = np.sqrt(stats.weight.ravel())
    S, A = stats.weight.shape
    Psi = np.einsum("sa,sad->sd", policy, cls.features)
    Q = stats.trans.reshape(S * A, S) @ Psi
    H = Phi @ np.linalg.pinv(Phi * sw[:, None]) * sw[None, :]
    lhs = (Phi - discount * H @ Q) * sw[:, None]
    rhs = (H @ stats.reward_mean.ravel()) * sw
    return lhs, rhs


def minimize_minimax(cls, dataset, policy):
    """Empirical minimiser of M_hat over the class."""
    _check_nonempty(dataset)
    stats = dataset.pair_stats()
    if isinstance(cls, FiniteClass):
        D = _finite_loss_table(cls, stats, policy, dataset.discount)
        m_hat = np.diag(D) - D.min(axis=1)
        k = int(np.argmin(m_hat))
        return FitResult(cls.members[k].copy(), float(m_hat[k]), index=k)
    lhs, rhs = _lstd_system(cls, stats, policy, dataset.discount)
    w, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    f = cls.evaluate(w)
    return FitResult(f, empirical_minimax(f, dataset, cls, policy), weights=w, degenerate=rank < cls.dim)


def fitted_q(cls, dataset, policy, f0=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Iterate f_{k+1} = empirically projected backup of f_k until the sup-norm
    change drops to ``tol``.

    ``f0`` is a member index (finite) or a weight vector (linear); the default
    is the member closest to zero, respectively the zero weights.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_nonempty(dataset)
    stats = dataset.pair_stats()
    g = dataset.discount
    history = []
    if isinstance(cls, FiniteClass):
        D = _finite_loss_table(cls, stats, policy, g)
        nxt = np.argmin(D, axis=1)
        m_hat = np.diag(D) - D[np.arange(len(cls)), nxt]
        k = int(np.argmin(np.abs(cls.members).max(axis=(1, 2)))) if f0 is None else int(f0)
        for it in range(1, max_iter + 1):
            k_new = int(nxt[k])
            history.append(float(m_hat[k_new]))
            change = np.abs(cls.members[k_new] - cls.members[k]).max()
            k = k_new
            if change <= tol:
                return FitResult(cls.members[k].copy(), float(m_hat[k]), True, it, history, index=k)
        return FitResult(cls.members[k].copy(), float(m_hat[k]), False, max_iter, history, index=k)

    Phi = cls.design
    sw = np.sqrt(stats.weight.ravel())
    fit = np.linalg.pinv(Phi * sw[:, None]) * sw[None, :]
    w = np.zeros(cls.dim) if f0 is None else np.asarray(f0, dtype=float)
    f = cls.evaluate(w)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = stats.mean_target(f, policy, g)
        w = fit @ y.ravel()
        f_new = cls.evaluate(w)
        change = np.abs(f_new - f).max()
        f = f_new
        history.append(empirical_minimax(f, dataset, cls, policy))
        if change <= tol:
            converged = True
            break
        if not np.all(np.isfinite(f)):
            break
    return FitResult(f, history[-1], converged, it, history, weights=w)


# ---------------------------------------------------------------------------
# bounds


def bound_finite(card, delta, n, discount, beta, C):
    """(1/(1-gamma)) (1/(1-beta)) sqrt(C ln(|F|/delta) / n)."""
    if not (card >= 1 and 0 < delta < 1 and n >= 1):
        raise ValueError("need card >= 1, delta in (0, 1), n >= 1")
    if beta >= 1 or math.isinf(C):
        return math.inf
    return math.sqrt(C * math.log(card / delta) / n) / ((1 - discount) * (1 - beta))


def bound_classic(card, delta, n, discount, C, inherent_be):
    """Statistical error plus the inherent-Bellman-error floor."""
    if math.isinf(C) or math.isinf(inherent_be):
        return math.inf
    stat = math.sqrt(C * math.log(card / delta) / n) / (1 - discount)
    return stat + math.sqrt(C) * inherent_be / (1 - discount)


@dataclass(frozen=True)
class BoundReport:
    new_bound: float
    classic_bound: float

    @property
    def tighter(self):
        return "new" if self.new_bound <= self.classic_bound else "classic"

    def to_json(self):
        num = lambda x: "inf" if math.isinf(x) else x
        return {"new_bound": num(self.new_bound), "classic_bound": num(self.classic_bound), "tighter": self.tighter}


def compare_bounds(card, delta, n, discount, beta, C, inherent_be):
    return BoundReport(bound_finite(card, delta, n, discount, beta, C),
                       bound_classic(card, delta, n, discount, C, inherent_be))
