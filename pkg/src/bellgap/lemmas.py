"""Exact checks of the identities and inequalities behind the error bounds.

Each check reports a margin: ``rhs - lhs`` for inequalities and
``-|lhs - rhs|`` for identities.  A check passes when its margin is at least
``-MARGIN_TOL`` (scaled by ``max(1, r)`` for the linear-rate law).
"""
import math
from dataclasses import dataclass

import numpy as np

from .classes import FiniteClass, LinearClass, check_realizability, project
from .diagnostics import (_cost_moments, beta, concentrability, expected_cost, incompleteness_function,
                          opc, population_minimax_loss, sigma_sq)
from .mdp import bellman_backup, exact_q, occupancy, prediction_error, weighted_norm

MARGIN_TOL = 1e-9
VAR_CONST = 16.0

LEMMAS = (
    "cost_expectation",
    "modified_cost",
    "px_equals_m",
    "py_equals_loss",
    "weak_simulation",
    "beta_effect",
    "var_x",
    "var_y",
    "opc_bound",
    "i_monotone",
    "i_zero",
    "i_below_beta_r",
    "i_linear_rate",
)


@dataclass
class LemmaResult:
    lemma: str
    instance: str
    margin: float | None
    skipped: str | None = None
    tol: float = MARGIN_TOL

    @property
    def passed(self):
        return self.skipped is not None or self.margin >= -self.tol


def _members(spec, rng):
    if isinstance(spec.fclass, FiniteClass):
        return list(spec.fclass.members)
    # a handful of span members for linear classes
    fstar = exact_q(spec.mdp, spec.policy)
    out = [project(spec.fclass, fstar, spec.mu)]
    for _ in range(8):
        out.append(spec.fclass.evaluate(rng.normal(size=spec.fclass.dim)))
    return out


def check_instance(spec, instance_id="spec", r_grid=None, seed=0):
    """Run every applicable check on one problem; returns ``LemmaResult`` rows."""
    mdp, pi, mu, s0, cls = spec.mdp, spec.policy, spec.mu, spec.s0, spec.fclass
    rng = np.random.default_rng(seed)
    g = mdp.discount
    fstar = exact_q(mdp, pi)
    d = occupancy(mdp, pi, s0)
    members = _members(spec, rng)
    bounded = isinstance(cls, FiniteClass) and cls.bounded
    realizable = check_realizability(cls, mdp, pi, mu).is_realizable
    b = beta(cls, mdp, pi, mu)
    out = []

    def add(name, margin, skipped=None, tol=MARGIN_TOL):
        out.append(LemmaResult(name, instance_id, None if skipped else float(margin), skipped, tol))

    backups = [bellman_backup(mdp, pi, f) for f in members]
    be_mu = [weighted_norm(f - Tf, mu) for f, Tf in zip(members, backups)]
    sig = [sigma_sq(mdp, pi, mu, f) for f in members]

    cost_dev = mod_dev = 0.0
    for f, Tf, s2 in zip(members, backups, sig):
        for gg in members:
            lhs = expected_cost(mdp, pi, mu, gg, f)
            cost_dev = max(cost_dev, abs(lhs - (weighted_norm(gg - Tf, mu) ** 2 + s2)))
            diff, _ = _cost_moments(mdp, pi, mu, f, f, gg)
            mod_dev = max(mod_dev, abs(diff - (weighted_norm(f - Tf, mu) ** 2 - weighted_norm(gg - Tf, mu) ** 2)))
    add("cost_expectation", -cost_dev)
    add("modified_cost", -mod_dev)

    px_dev = py_dev = 0.0
    ws = be = vx = vy = math.inf
    for f, Tf, e_mu in zip(members, backups, be_mu):
        m = population_minimax_loss(cls, mdp, pi, mu, f)
        gf = project(cls, Tf, mu)
        px, var_x = _cost_moments(mdp, pi, mu, f, f, gf)
        py, var_y = _cost_moments(mdp, pi, mu, fstar, fstar, f)
        px_dev = max(px_dev, abs(px - m))
        py_dev = max(py_dev, abs(py + weighted_norm(f - fstar, mu) ** 2))
        ws = min(ws, weighted_norm(f - Tf, d) / (1 - g) - abs(prediction_error(f, fstar, pi, s0)))
        be = min(be, m - (1 - b) * e_mu**2)
        vx = min(vx, VAR_CONST * weighted_norm(f - gf, mu) ** 2 - var_x)
        vy = min(vy, VAR_CONST * (-py) - var_y)
    add("px_equals_m", -px_dev)
    add("py_equals_loss", -py_dev)
    add("weak_simulation", ws)
    add("beta_effect", be)
    add("var_x", vx, None if bounded else "class not sup-norm bounded")
    add("var_y", vy, None if bounded else "class not sup-norm bounded")

    C = concentrability(cls, mdp, pi, mu, s0)
    cstar = opc(cls, mdp, pi, mu, s0)
    if b >= 1:
        add("opc_bound", None, "beta = 1")
    elif math.isinf(C) or math.isinf(cstar):
        add("opc_bound", None, "infinite sentinel")
    else:
        rhs = C / ((1 - g) ** 2 * (1 - b))
        add("opc_bound", rhs - cstar, tol=MARGIN_TOL * max(1.0, rhs))

    curve = incompleteness_function(cls, mdp, pi, mu, r_grid)
    vals = [(r, v) for r, v in curve if v is not None]
    if len(vals) >= 2:
        add("i_monotone", min(v2 - v1 for (_, v1), (_, v2) in zip(vals, vals[1:])))
    else:
        add("i_monotone", None, "fewer than two nonempty F(r)")
    if curve[0][1] is None:
        add("i_zero", None, "F(r) empty")
    elif not realizable:
        add("i_zero", None, "not realizable")
    else:
        add("i_zero", -curve[0][1])
    if vals:
        add("i_below_beta_r", min((b * r - v) / max(1.0, r) for r, v in vals))
    else:
        add("i_below_beta_r", None, "F(r) empty")
    if isinstance(cls, LinearClass) and realizable:
        add("i_linear_rate", -max(abs(v - b * r) / max(1.0, r) for r, v in vals))
    else:
        add("i_linear_rate", None, "not a realizable linear class")
    return out


def format_table(results):
    lines = [f"{'lemma':<18} {'instance':<14} {'margin':>14}  status"]
    for r in results:
        status = f"skip ({r.skipped})" if r.skipped else ("pass" if r.passed else "FAIL")
        margin = "-" if r.margin is None else f"{r.margin:.3e}"
        lines.append(f"{r.lemma:<18} {r.instance:<14} {margin:>14}  {status}")
    return "\n".join(lines)
