import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellgap.classes import FiniteClass, LinearClass, project
from bellgap.diagnostics import (DiagnosticsReport, beta, concentrability, concentrability_upper_bounds, diagnose,
                                 exact_process_moments, expected_cost, incompleteness_function,
                                 inherent_bellman_error, opc, population_minimax_loss, sigma_sq)
from bellgap.instances import (complete_finite_class, geometry_instance, random_instance, random_linear_instance,
                               random_mdp)
from bellgap.lemmas import check_instance
from bellgap.mdp import TabularMdp, bellman_backup, exact_q, occupancy, weighted_norm

from conftest import finite_problems, linear_problems
from oracles import finite_constants, linear_sphere_samples, norm_loops


def _complete(rng, S=4, A=3, K=8):
    mdp = random_mdp(rng, S, A, 0.9)
    pi = np.zeros((S, A))
    pi[np.arange(S), rng.integers(0, A, size=S)] = 1
    mu = rng.dirichlet(np.ones(S * A)).reshape(S, A)
    return mdp, pi, mu, complete_finite_class(mdp, pi, rng, K)


def _close(a, b, tol):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(b))


@given(finite_problems())
def test_finite_constants_match_loop_oracle(spec):
    rep = diagnose(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0)
    grid = [r for r, _ in rep.curve]
    ora = finite_constants(spec.fclass.members, spec.mdp, spec.policy, spec.mu, spec.s0, grid)
    assert _close(rep.beta, ora["beta"], 1e-9)
    assert _close(rep.concentrability, ora["C"], 1e-8)
    assert _close(rep.opc, ora["opc"], 1e-7)
    assert rep.inherent_be == pytest.approx(ora["inherent_be"], abs=1e-10)
    for (r, v), (_, w) in zip(rep.curve, ora["curve"]):
        assert (v is None) == (w is None)
        if v is not None:
            assert v == pytest.approx(w, abs=1e-10)


@given(finite_problems())
def test_report_invariants(spec):
    rep = diagnose(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0)
    assert 0 <= rep.beta <= 1
    vals = [v for _, v in rep.curve if v is not None]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    for r, v in rep.curve:
        if v is not None:
            assert v <= rep.beta * r + 1e-9 * max(1.0, r)
    if rep.realizable:
        assert rep.curve[0][1] == 0.0
    g = spec.gamma
    if rep.beta < 1 and not math.isinf(rep.opc):
        assert rep.opc <= rep.concentrability / ((1 - g) ** 2 * (1 - rep.beta)) * (1 + 1e-9) + 1e-9


def test_report_json_roundtrip(rng):
    spec = random_instance(rng, realizable=False)
    rep = diagnose(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0)
    obj = rep.to_json()
    assert list(obj) == ["beta", "concentrability", "opc", "inherent_be", "curve", "bounds", "realizable"]
    assert DiagnosticsReport.from_json(obj) == rep
    inf_rep = DiagnosticsReport(1.0, math.inf, math.inf, 0.0, [(0.0, None)], (math.inf, math.inf), False)
    obj = inf_rep.to_json()
    assert obj["opc"] == "inf" and obj["curve"][0]["empty"] is True
    assert DiagnosticsReport.from_json(obj) == inf_rep


def test_complete_class(rng):
    mdp, pi, mu, F = _complete(rng)
    assert beta(F, mdp, pi, mu) <= 1e-9
    assert inherent_bellman_error(F, mdp, pi, mu) <= 1e-10
    assert all(v <= 1e-10 for _, v in incompleteness_function(F, mdp, pi, mu))
    for f in F.members:
        M = population_minimax_loss(F, mdp, pi, mu, f)
        assert M == pytest.approx(weighted_norm(f - bellman_backup(mdp, pi, f), mu) ** 2, abs=1e-12)


def test_complete_class_beta_effect_margin_is_M(rng):
    mdp, pi, mu, F = _complete(rng)
    from bellgap.specio import ProblemSpec
    res = {r.lemma: r for r in check_instance(ProblemSpec(mdp, pi, mu, 0, F), "complete")}
    worst = min(population_minimax_loss(F, mdp, pi, mu, f) - weighted_norm(f - bellman_backup(mdp, pi, f), mu) ** 2
                for f in F.members)
    assert res["beta_effect"].margin == pytest.approx(worst, abs=1e-12)
    assert abs(res["beta_effect"].margin) <= 1e-12


def test_singleton_fstar(rng):
    mdp = random_mdp(rng, 3, 2, 0.9)
    pi = rng.dirichlet(np.ones(2), size=3)
    mu = rng.dirichlet(np.ones(6)).reshape(3, 2)
    F = FiniteClass(exact_q(mdp, pi)[None])
    assert beta(F, mdp, pi, mu) == 0.0
    assert opc(F, mdp, pi, mu, 0) == 0.0
    assert inherent_bellman_error(F, mdp, pi, mu) <= 1e-12
    assert population_minimax_loss(F, mdp, pi, mu, F.members[0]) == 0.0


def test_single_member_concentrability_is_norm_ratio(rng):
    mdp = random_mdp(rng, 3, 2, 0.5)
    pi = rng.dirichlet(np.ones(2), size=3)
    mu = rng.dirichlet(np.ones(6)).reshape(3, 2)
    f = rng.uniform(-1, 1, size=(3, 2))
    e = f - bellman_backup(mdp, pi, f)
    d = occupancy(mdp, pi, 1)
    assert concentrability(FiniteClass(f[None]), mdp, pi, mu, 1) == pytest.approx(
        norm_loops(e, d) ** 2 / norm_loops(e, mu) ** 2, rel=1e-10)


def test_on_policy_mu_gives_unit_constants(rng):
    spec = random_instance(rng, n_states=4, n_actions=2)
    d = occupancy(spec.mdp, spec.policy, spec.s0)
    assert concentrability(spec.fclass, spec.mdp, spec.policy, d, spec.s0) == pytest.approx(1.0, abs=1e-9)
    chi, sup = concentrability_upper_bounds(d, d)
    assert chi == pytest.approx(1.0) and sup == pytest.approx(1.0)


def test_upper_bound_examples():
    mu = np.full((2, 2), 0.25)
    d = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert concentrability_upper_bounds(mu, d)[1] == pytest.approx(4.0)
    mu0 = np.array([[0.5, 0.5], [0.0, 0.0]])
    assert concentrability_upper_bounds(mu0, np.full((2, 2), 0.25)) == (math.inf, math.inf)


@given(finite_problems())
def test_upper_bounds_order(spec):
    d = occupancy(spec.mdp, spec.policy, spec.s0)
    chi, sup = concentrability_upper_bounds(spec.mu, d)
    assert chi <= sup * (1 + 1e-12)
    assert concentrability(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0) <= sup * (1 + 1e-9)


def test_chi_bound_does_not_dominate_class_constant():
    # one Bellman-error direction on the pair with the largest ratio: C = sup ratio > E_mu[(d/mu)^2]
    mu = np.array([[0.5, 0.5]])
    d = np.array([[0.9, 0.1]])
    chi, sup = concentrability_upper_bounds(mu, d)
    e = np.array([[1.0, 0.0]])
    C = norm_loops(e, d) ** 2 / norm_loops(e, mu) ** 2
    assert chi == pytest.approx(1.64) and C == pytest.approx(sup) == pytest.approx(1.8)
    assert C > chi


def test_sigma_sq_examples():
    P = np.zeros((2, 1, 2))
    P[:, :, 0] = 1.0
    det = TabularMdp.from_laws(P, [[[(0.2, 1.0)]], [[(0.7, 1.0)]]], 0.9)
    pi = np.ones((2, 1))
    mu = np.array([[0.5], [0.5]])
    assert sigma_sq(det, pi, mu, np.array([[0.3], [-0.4]])) == 0.0
    p = np.array([0.3, 0.8])
    bern = TabularMdp.from_laws(P, [[[(0.0, 1 - p[0]), (1.0, p[0])]], [[(0.0, 1 - p[1]), (1.0, p[1])]]], 0.0)
    assert sigma_sq(bern, pi, mu, np.zeros((2, 1))) == pytest.approx(np.mean(p * (1 - p)), abs=1e-15)


@given(finite_problems(), st.integers(0, 2**31))
def test_cost_expectation_identity(spec, seed):
    r = np.random.default_rng(seed)
    f = spec.fclass.members[seed % len(spec.fclass)]
    Tf = bellman_backup(spec.mdp, spec.policy, f)
    s2 = sigma_sq(spec.mdp, spec.policy, spec.mu, f)
    for _ in range(10):
        g = r.uniform(-1, 1, size=f.shape)
        lhs = expected_cost(spec.mdp, spec.policy, spec.mu, g, f)
        assert lhs == pytest.approx(weighted_norm(g - Tf, spec.mu) ** 2 + s2, abs=1e-10)


@given(finite_problems(realizable=True), st.integers(0, 2**31))
def test_process_moments(spec, seed):
    mdp, pi, mu, F = spec.mdp, spec.policy, spec.mu, spec.fclass
    fstar = exact_q(mdp, pi)
    m0 = exact_process_moments(F, mdp, pi, mu, fstar)
    assert abs(m0.px) <= 1e-12 and m0.var_x <= 1e-12
    assert abs(m0.py) <= 1e-12 and m0.var_y <= 1e-12 and m0.realizable
    f = F.members[seed % len(F)]
    m = exact_process_moments(F, mdp, pi, mu, f)
    assert m.px == pytest.approx(population_minimax_loss(F, mdp, pi, mu, f), abs=1e-10)
    assert m.py == pytest.approx(-weighted_norm(f - fstar, mu) ** 2, abs=1e-10)
    gf = project(F, bellman_backup(mdp, pi, f), mu)
    assert m.var_x <= 16 * weighted_norm(f - gf, mu) ** 2 + 1e-12
    assert m.var_y <= 16 * (-m.py) + 1e-12


def test_population_minimax_loss_two_scans(rng):
    spec = random_instance(rng, realizable=False)
    mdp, pi, mu, F = spec.mdp, spec.policy, spec.mu, spec.fclass
    for f in F.members:
        Tf = bellman_backup(mdp, pi, f)
        brute = norm_loops(f - Tf, mu) ** 2 - min(norm_loops(g - Tf, mu) for g in F.members) ** 2
        assert population_minimax_loss(F, mdp, pi, mu, f) == pytest.approx(brute, abs=1e-12)


def test_three_member_inherent_be(rng):
    spec = random_instance(rng, size=3)
    mdp, pi, mu, F = spec.mdp, spec.policy, spec.mu, spec.fclass
    brute = max(min(norm_loops(g - bellman_backup(mdp, pi, f), mu) for g in F.members) for f in F.members)
    assert inherent_bellman_error(F, mdp, pi, mu) == pytest.approx(brute, abs=1e-12)


def test_five_member_curve_enumerates(rng):
    spec = random_instance(rng, size=5)
    mdp, pi, mu, F = spec.mdp, spec.policy, spec.mu, spec.fclass
    grid = np.linspace(0, 2, 41)
    for r, v in incompleteness_function(F, mdp, pi, mu, grid):
        inside = [f for f in F.members if norm_loops(f - bellman_backup(mdp, pi, f), mu) <= r + 1e-10]
        want = max((min(norm_loops(g - bellman_backup(mdp, pi, f), mu) for g in F.members) for f in inside),
                   default=None)
        assert (v is None) == (want is None)
        if v is not None:
            assert v == pytest.approx(want, abs=1e-12)


def test_misspecified_curve_marks_empty(rng):
    spec = random_instance(rng, realizable=False)
    curve = incompleteness_function(spec.fclass, spec.mdp, spec.policy, spec.mu)
    assert curve[0][1] is None


def test_r_grid_validation(rng):
    spec = random_instance(rng)
    with pytest.raises(ValueError):
        incompleteness_function(spec.fclass, spec.mdp, spec.policy, spec.mu, [0.5, 0.1])


@given(linear_problems())
def test_linear_rate_law(spec):
    cls, mdp, pi, mu = spec.fclass, spec.mdp, spec.policy, spec.mu
    b = beta(cls, mdp, pi, mu)
    for r, v in incompleteness_function(cls, mdp, pi, mu, np.concatenate([[0.0], np.geomspace(1e-3, 10, 15)])):
        assert abs(v - b * r) <= 1e-9 * max(1.0, r)


def _sphere_check(cls, mdp, pi, mu):
    be, resid, t = linear_sphere_samples(cls.features, mdp, pi, mu)
    keep = be > 1e-9
    sampled = (resid[keep] / be[keep]).max()
    b = beta(cls, mdp, pi, mu)
    assert sampled <= b + 1e-9
    # at beta = 1 the sup is only approached as the Bellman error vanishes
    assert sampled >= b - (1e-4 if b < 1 - 1e-9 else 1e-3)
    # I(r): the sampled sup over the homogenized grid never exceeds the exact value
    for r in (0.05, 0.2, 1.0):
        ok = (t > 1e-3) & (be <= r * t)
        if ok.any():
            assert (resid[ok] / t[ok]).max() <= incompleteness_function(cls, mdp, pi, mu, [r])[0][1] + 1e-9
    return b


def test_linear_constants_match_sphere_oracle(rng):
    betas = []
    for _ in range(5):
        spec = random_linear_instance(rng, dim=2, n_states=3, n_actions=2)
        betas.append(_sphere_check(spec.fclass, spec.mdp, spec.policy, spec.mu))
    assert max(betas) < 1  # the tight branch was exercised


def test_misspecified_linear_sphere_oracle(rng):
    for _ in range(3):
        mdp = random_mdp(rng, 3, 2, 0.9)
        pi = rng.dirichlet(np.ones(2), size=3)
        mu = rng.dirichlet(np.ones(6)).reshape(3, 2)
        _sphere_check(LinearClass(rng.normal(size=(3, 2, 2))), mdp, pi, mu)


def test_linear_inherent_be_needs_radius(rng):
    spec = geometry_instance(45.0)
    with pytest.raises(ValueError, match="sup not finite"):
        inherent_bellman_error(LinearClass(spec.fclass.features), spec.mdp, spec.policy, spec.mu)
    rep = diagnose(LinearClass(spec.fclass.features), spec.mdp, spec.policy, spec.mu, spec.s0)
    assert rep.inherent_be is None


@pytest.mark.parametrize("theta,expected", [(20, 0.34), (45, 0.70), (85, 0.996)])
def test_geometry_beta_is_sine(theta, expected):
    spec = geometry_instance(theta)
    b = beta(spec.fclass, spec.mdp, spec.policy, spec.mu)
    assert b == pytest.approx(math.sin(math.radians(theta)), abs=1e-9)
    assert b == pytest.approx(expected, abs=0.02)


def test_beta_never_exceeds_one(rng):
    for _ in range(20):
        spec = random_instance(rng, realizable=bool(rng.integers(2)))
        assert beta(spec.fclass, spec.mdp, spec.policy, spec.mu) <= 1.0
