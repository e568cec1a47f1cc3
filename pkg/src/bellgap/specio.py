"""JSON problem specs and sweep configs.

A problem spec is a single JSON document::

    {
      "name": "demo",
      "gamma": 0.9,
      "mdp": {"gamma": 0.9,
              "transition": [[[p(s'|s,a), ...], ...], ...],
              "rewards": [[[[value, prob], ...], ...], ...]},
      "policy": [[pi(a|s), ...], ...],
      "mu": [[mu(s,a), ...], ...],
      "s0": 0,
      "class": {"kind": "finite", "bounded": true, "members": [[[f(s,a)]]]}
            or {"kind": "linear", "features": [[[phi_j(s,a)]]], "weight_radius": null}
    }

The top-level ``gamma`` is an audit echo and must match ``mdp.gamma``.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .classes import FiniteClass, LinearClass
from .mdp import TabularMdp, check_distribution, check_policy

_NUM_ARRAY = {"type": "array"}

SPEC_SCHEMA = {
    "type": "object",
    "required": ["gamma", "mdp", "policy", "mu", "s0", "class"],
    "properties": {
        "name": {"type": "string"},
        "gamma": {"type": "number"},
        "mdp": {
            "type": "object",
            "required": ["gamma", "transition", "rewards"],
            "properties": {"gamma": {"type": "number"}, "transition": _NUM_ARRAY, "rewards": _NUM_ARRAY},
        },
        "policy": _NUM_ARRAY,
        "mu": _NUM_ARRAY,
        "s0": {"type": "integer", "minimum": 0},
        "class": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {"properties": {"kind": {"const": "finite"}, "members": _NUM_ARRAY, "bounded": {"type": "boolean"}},
                 "required": ["members"]},
                {"properties": {"kind": {"const": "linear"}, "features": _NUM_ARRAY,
                                "weight_radius": {"type": ["number", "null"]}},
                 "required": ["features"]},
            ],
        },
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["n_values", "seeds"],
    "properties": {
        "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "seeds": {"type": "integer", "minimum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "estimator": {"enum": ["minimax", "fitted_q"]},
        "output": {"type": ["string", "null"]},
        "master_seed": {"type": "integer", "minimum": 0},
    },
}


class SpecError(ValueError):
    """Malformed or inconsistent input file."""


@dataclass
class ProblemSpec:
    mdp: TabularMdp
    policy: np.ndarray
    mu: np.ndarray
    s0: int
    fclass: FiniteClass | LinearClass
    name: str = ""

    def __post_init__(self):
        S, A = self.mdp.shape
        self.policy = check_policy(self.policy, S, A)
        self.mu = check_distribution(self.mu, (S, A))
        if not 0 <= self.s0 < S:
            raise ValueError(f"s0={self.s0} out of range for {S} states")
        if self.fclass.shape != (S, A):
            raise ValueError(f"class is defined on {self.fclass.shape} pairs, MDP has {(S, A)}")

    @property
    def gamma(self):
        return self.mdp.discount

    def to_json(self):
        if isinstance(self.fclass, FiniteClass):
            cls = {"kind": "finite", "bounded": self.fclass.bounded, "members": self.fclass.members.tolist()}
        else:
            cls = {"kind": "linear", "features": self.fclass.features.tolist(),
                   "weight_radius": self.fclass.weight_radius}
        return {
            "name": self.name,
            "gamma": self.gamma,
            "mdp": {"gamma": self.gamma, "transition": self.mdp.transition.tolist(),
                    "rewards": [[[list(atom) for atom in law] for law in row] for row in self.mdp.reward_laws()]},
            "policy": self.policy.tolist(),
            "mu": self.mu.tolist(),
            "s0": int(self.s0),
            "class": cls,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            jsonschema.validate(obj, SPEC_SCHEMA)
        except jsonschema.ValidationError as err:
            where = "/".join(map(str, err.absolute_path)) or "<root>"
            raise SpecError(f"field {where}: {err.message}") from None
        if obj["gamma"] != obj["mdp"]["gamma"]:
            raise SpecError("field gamma: audit echo does not match mdp/gamma")
        field_name = "mdp"
        try:
            mdp = TabularMdp.from_laws(obj["mdp"]["transition"], obj["mdp"]["rewards"], obj["mdp"]["gamma"])
            field_name = "class"
            c = obj["class"]
            if c["kind"] == "finite":
                fclass = FiniteClass(np.array(c["members"], dtype=float), bool(c.get("bounded", True)))
            else:
                fclass = LinearClass(np.array(c["features"], dtype=float), c.get("weight_radius"))
            field_name = "policy/mu/s0"
            return cls(mdp, np.array(obj["policy"], dtype=float), np.array(obj["mu"], dtype=float),
                       int(obj["s0"]), fclass, obj.get("name", ""))
        except (ValueError, TypeError, IndexError) as err:
            raise SpecError(f"field {field_name}: {err}") from None


def _read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"line {err.lineno} column {err.colno}: {err.msg}") from None


def load_spec(path):
    try:
        return ProblemSpec.from_json(_read_json(path))
    except SpecError as err:
        raise SpecError(f"{path}: {err}") from None


def dump_spec(spec, path=None):
    text = json.dumps(spec.to_json(), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


@dataclass
class SweepConfig:
    n_values: list
    seeds: int
    delta: float = 0.1
    estimator: str = "minimax"
    output: str | None = None
    master_seed: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj):
        try:
            jsonschema.validate(obj, SWEEP_SCHEMA)
        except jsonschema.ValidationError as err:
            where = "/".join(map(str, err.absolute_path)) or "<root>"
            raise SpecError(f"field {where}: {err.message}") from None
        known = {"n_values", "seeds", "delta", "estimator", "output", "master_seed"}
        return cls(**{k: v for k, v in obj.items() if k in known},
                   extra={k: v for k, v in obj.items() if k not in known})


def load_sweep(path):
    try:
        return SweepConfig.from_json(_read_json(path))
    except SpecError as err:
        raise SpecError(f"{path}: {err}") from None


def bundled_spec_path(name):
    """Path of a spec shipped in ``bellgap/data``."""
    return Path(__file__).parent / "data" / f"{name}.json"
