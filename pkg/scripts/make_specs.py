"""Regenerate the specs bundled in src/bellgap/data."""
import json
import math
from pathlib import Path

import numpy as np

from bellgap.classes import FiniteClass
from bellgap.instances import (complete_finite_class, geometry_instance, line_class_problem, random_finite_class,
                               random_instance, random_mdp)
from bellgap.mdp import exact_q, occupancy
from bellgap.specio import ProblemSpec, dump_spec

DATA = Path(__file__).resolve().parents[1] / "src" / "bellgap" / "data"


def demo():
    # members packed tightly around f*, so small samples pick a wrong member
    rng = np.random.default_rng(19)
    mdp = random_mdp(rng, 2, 2, 0.9)
    policy = rng.dirichlet(np.ones(2), size=2)
    mu = rng.dirichlet(np.full(4, 3.0)).reshape(2, 2)
    fclass = random_finite_class(rng, exact_q(mdp, policy), 6, spread=0.003)
    return ProblemSpec(mdp, policy, mu, 0, fclass, name="demo")


def complete():
    rng = np.random.default_rng(7)
    mdp = random_mdp(rng, 3, 2, 0.9)
    policy = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    mu = np.full((3, 2), 1 / 6)
    return ProblemSpec(mdp, policy, mu, 0, complete_finite_class(mdp, policy, rng, 6), name="complete")


def on_policy():
    rng = np.random.default_rng(8)
    spec = random_instance(rng, gamma=0.9, n_states=3, n_actions=2, size=6)
    d = occupancy(spec.mdp, spec.policy, spec.s0)
    return ProblemSpec(spec.mdp, spec.policy, d / d.sum(), spec.s0, spec.fclass, name="on_policy")


def singleton():
    spec = demo()
    fstar = exact_q(spec.mdp, spec.policy)
    return ProblemSpec(spec.mdp, spec.policy, spec.mu, 0, FiniteClass(fstar[None]), name="singleton")


def misspecified():
    rng = np.random.default_rng(9)
    spec = random_instance(rng, gamma=0.5, n_states=4, n_actions=2, size=8, realizable=False)
    spec.name = "misspecified"
    return spec


def crossover():
    spec = geometry_instance(math.degrees(math.asin(0.7)), weight_radius=4.0)
    spec.name = "crossover"
    return spec


SWEEP = {"n_values": [100, 1000, 10000, 100000], "seeds": 50, "delta": 0.1,
         "estimator": "minimax", "master_seed": 20240601}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for build in (demo, complete, on_policy, singleton, misspecified, crossover, line_class_problem):
        spec = build()
        dump_spec(spec, DATA / f"{spec.name}.json")
        print("wrote", spec.name)
    (DATA / "consistency_sweep.json").write_text(json.dumps(SWEEP, indent=1) + "\n")


if __name__ == "__main__":
    main()
