"""Seeded sweeps over (n, seed) cells and the line-geometry report.

Every cell draws from ``SeedSequence([master_seed, seed_index, n])`` so its
result does not depend on which worker ran it or in what order.
"""
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classes import FiniteClass
from .diagnostics import beta, concentrability, inherent_bellman_error, opc
from .estimation import compare_bounds, empirical_minimax, fitted_q, minimize_minimax, sample_dataset
from .instances import geometry_instance
from .mdp import exact_q, prediction_error

CSV_COLUMNS = ("n", "seed", "abs_error", "m_hat", "new_bound", "classic_bound", "converged", "error")
NOMINAL_CARD = 1000  # stands in for |F| when the class is linear


@dataclass(frozen=True)
class Constants:
    beta: float
    concentrability: float
    inherent_be: float
    card: float


def problem_constants(spec, card=None):
    cls = spec.fclass
    try:
        ibe = inherent_bellman_error(cls, spec.mdp, spec.policy, spec.mu)
    except ValueError:
        ibe = math.inf
    if card is None:
        card = len(cls) if isinstance(cls, FiniteClass) else NOMINAL_CARD
    return Constants(beta(cls, spec.mdp, spec.policy, spec.mu),
                     concentrability(cls, spec.mdp, spec.policy, spec.mu, spec.s0), ibe, float(card))


def run_cell(spec, n, seed_index, master_seed, estimator, delta, consts, fstar=None):
    """One (n, seed) cell -> CSV row dict.  Failures land in the ``error`` column."""
    row = {"n": n, "seed": seed_index}
    try:
        fstar = exact_q(spec.mdp, spec.policy) if fstar is None else fstar
        data = sample_dataset(spec.mdp, spec.mu, n, (master_seed, seed_index, n))
        if estimator == "minimax":
            fit = minimize_minimax(spec.fclass, data, spec.policy)
        else:
            fit = fitted_q(spec.fclass, data, spec.policy)
        rep = compare_bounds(consts.card, delta, n, spec.gamma, consts.beta, consts.concentrability,
                             consts.inherent_be)
        row.update(abs_error=abs(prediction_error(fit.estimate, fstar, spec.policy, spec.s0)),
                   m_hat=empirical_minimax(fit.estimate, data, spec.fclass, spec.policy),
                   new_bound=rep.new_bound, classic_bound=rep.classic_bound,
                   converged=fit.converged, error="")
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as err:
        row.update(abs_error=math.nan, m_hat=math.nan, new_bound=math.nan, classic_bound=math.nan,
                   converged=False, error=type(err).__name__)
    return row


def _cell_job(args):
    return run_cell(*args)


def run_sweep(spec, sweep, jobs=1):
    """All rows of the grid, sorted by (n, seed)."""
    consts = problem_constants(spec, sweep.extra.get("card"))
    fstar = exact_q(spec.mdp, spec.policy)
    cells = [(spec, n, i, sweep.master_seed, sweep.estimator, sweep.delta, consts, fstar)
             for n in sweep.n_values for i in range(sweep.seeds)]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cell_job, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        rows = [run_cell(*c) for c in cells]
    return sorted(rows, key=lambda r: (r["n"], r["seed"]))


def coverage_constant(errors, bounds, quantile=0.9):
    """Smallest c with errors <= c * bounds for at least ``quantile`` of the seeds."""
    ratios = np.sort(np.asarray(errors) / np.asarray(bounds))
    k = math.ceil(quantile * len(ratios))
    return float(ratios[k - 1])


def summarize(rows):
    """Per-n medians, coverage and 90% constants, plus the log-log slope of the medians."""
    per_n = {}
    for r in rows:
        if not r["error"]:
            per_n.setdefault(r["n"], []).append(r)
    stats = []
    for n in sorted(per_n):
        rs = per_n[n]
        err = np.array([r["abs_error"] for r in rs])
        bnd = np.array([r["new_bound"] for r in rs])
        stats.append({"n": n, "median_abs_error": float(np.median(err)),
                      "coverage": float(np.mean(err <= bnd)),
                      "c90": coverage_constant(err, bnd), "cells": len(rs)})
    ns = np.array([s["n"] for s in stats], dtype=float)
    med = np.array([s["median_abs_error"] for s in stats])
    slope = math.nan
    if len(stats) >= 2 and np.all(med > 0):
        slope = float(np.polyfit(np.log(ns), np.log(med), 1)[0])
    return {"per_n": stats, "slope": slope}


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def to_csv(rows, summary):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in CSV_COLUMNS) + "\n")
    buf.write("# summary: n,median_abs_error,coverage,c90\n")
    for s in summary["per_n"]:
        buf.write(f"# {s['n']},{_fmt(s['median_abs_error'])},{_fmt(s['coverage'])},{_fmt(s['c90'])}\n")
    buf.write(f"# slope,{_fmt(summary['slope'])}\n")
    return buf.getvalue()


def parse_csv(text):
    """Rows (as dicts of strings) and the summary lines of a sweep CSV."""
    lines = text.splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:] if ln and not ln.startswith("#")]
    return rows, [ln[2:] for ln in lines if ln.startswith("# ")]


# ---------------------------------------------------------------------------
# geometry

BETA_TOL = 1e-2


def geometry_report(thetas, n_small=100, n_large=10**6, card=NOMINAL_CARD, delta=0.1, **kw):
    """(theta, beta, sin theta, C, C*, I_F, bounds at two sample sizes) per angle."""
    rows = []
    for theta in thetas:
        row = {"theta": float(theta), "sin_theta": math.sin(math.radians(theta))}
        try:
            spec = geometry_instance(theta, **kw)
            c = problem_constants(spec, card)
            row.update(beta=c.beta, concentrability=c.concentrability,
                       opc=opc(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0),
                       inherent_be=c.inherent_be, state_weight=float(spec.mu[1].sum()))
            for label, n in (("small", n_small), ("large", n_large)):
                rep = compare_bounds(card, delta, n, spec.gamma, c.beta, c.concentrability, c.inherent_be)
                row[f"n_{label}"] = n
                row[f"new_bound_{label}"] = rep.new_bound
                row[f"classic_bound_{label}"] = rep.classic_bound
                row[f"tighter_{label}"] = rep.tighter
            row["ok"] = abs(c.beta - row["sin_theta"]) <= BETA_TOL
        except ValueError as err:
            row.update(ok=False, failure=str(err))
        rows.append(row)
    return rows
