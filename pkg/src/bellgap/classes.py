"""Finite and linear predictor classes and their weighted projections."""
from dataclasses import dataclass

import numpy as np

from .mdp import bellman_backup, exact_q, weighted_norm

SUP_TOL = 1e-12


@dataclass(frozen=True)
class FiniteClass:
    """An explicit list of Q-functions, stacked as ``members[k, s, a]``."""

    members: np.ndarray
    bounded: bool = True

    def __post_init__(self):
        F = np.array(self.members, dtype=float)
        if F.ndim != 3 or F.shape[0] == 0:
            raise ValueError("finite class needs a nonempty (K, S, A) member array")
        if not np.all(np.isfinite(F)):
            raise ValueError("finite class members must be finite")
        if self.bounded and np.abs(F).max() > 1 + SUP_TOL:
            raise ValueError("bounded class has a member with sup norm above 1")
        F.setflags(write=False)
        object.__setattr__(self, "members", F)

    def __len__(self):
        return self.members.shape[0]

    @property
    def shape(self):
        return self.members.shape[1:]


@dataclass(frozen=True)
class LinearClass:
    """The span {phi' w : w in R^d} of a feature map ``features[s, a, :]``.

    ``weight_radius`` restricts to the Euclidean weight ball; it is only used
    for the sup in the inherent Bellman error.
    """

    features: np.ndarray
    weight_radius: float | None = None

    def __post_init__(self):
        phi = np.array(self.features, dtype=float)
        if phi.ndim != 3 or phi.shape[2] < 1:
            raise ValueError("features must have shape (S, A, d) with d >= 1")
        if not np.all(np.isfinite(phi)):
            raise ValueError("features must be finite")
        if self.weight_radius is not None and self.weight_radius < 0:
            raise ValueError("weight_radius must be nonnegative")
        phi.setflags(write=False)
        object.__setattr__(self, "features", phi)

    @property
    def dim(self):
        return self.features.shape[2]

    @property
    def shape(self):
        return self.features.shape[:2]

    @property
    def design(self):
        """Pair-by-feature matrix."""
        return self.features.reshape(-1, self.dim)

    @property
    def rank(self):
        return int(np.linalg.matrix_rank(self.design))

    def evaluate(self, w):
        return self.features @ np.asarray(w, dtype=float)


@dataclass(frozen=True)
class RealizabilityCheck:
    is_realizable: bool
    witness_distance: float


def mu_norm(f, w):
    return weighted_norm(f, w)


def member_distances(members, target, w):
    """||member_k - target||_w for every member."""
    return np.sqrt(np.einsum("ksa,sa->k", (members - target) ** 2, w))


def project_weights(cls, target, w):
    """Min-norm weights of the w-weighted least-squares fit of ``target``."""
    sw = np.sqrt(np.asarray(w, dtype=float)).ravel()
    coef, *_ = np.linalg.lstsq(cls.design * sw[:, None], np.asarray(target).ravel() * sw, rcond=None)
    return coef


def project_index(cls, target, w):
    """Index of the closest finite-class member (lowest index on ties)."""
    return int(np.argmin(member_distances(cls.members, target, w)))


def project(cls, target, w):
    """argmin over the class of ||g - target||_w."""
    if isinstance(cls, FiniteClass):
        return cls.members[project_index(cls, target, w)]
    return cls.evaluate(project_weights(cls, target, w))


def projection_matrix(cls, w):
    """Pair-space matrix of the w-orthogonal projection onto a linear class."""
    Phi = cls.design
    sw = np.sqrt(np.asarray(w, dtype=float)).ravel()
    return Phi @ np.linalg.pinv(Phi * sw[:, None]) * sw[None, :]


def projected_backup(cls, mdp, policy, f, mu):
    """g_f: the projection of the Bellman backup T f onto the class."""
    return project(cls, bellman_backup(mdp, policy, f), mu)


def empirical_projected_backup(cls, f, dataset, policy):
    """Empirically projected backup: least squares on the regression targets
    r + gamma f(s', pi) of the dataset tuples."""
    if dataset.n == 0:
        raise ValueError("empty dataset")
    stats = dataset.pair_stats()
    target = stats.mean_target(f, policy, dataset.discount)
    return project(cls, target, stats.weight)


def check_realizability(cls, mdp, policy, mu, tol=1e-9):
    fstar = exact_q(mdp, policy)
    if isinstance(cls, FiniteClass):
        dist = float(member_distances(cls.members, fstar, mu).min())
    else:
        dist = mu_norm(project(cls, fstar, mu) - fstar, mu)
    return RealizabilityCheck(dist <= tol, dist)
