"""Command-line front end.

    bellgap diagnose --spec demo
    bellgap evaluate --spec demo --n 10000 --seed 7
    bellgap scaling  --spec consistency --sweep consistency_sweep --jobs 4
    bellgap lemmas   --random 100 --seed 0
    bellgap geometry --theta 0 20 45 85

``--spec`` and ``--sweep`` accept a file path or the name of a bundled file.
Exit codes: 0 success, 1 invariant violation, 2 input error.
"""
import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .diagnostics import diagnose
from .estimation import compare_bounds, empirical_minimax, fitted_q, minimize_minimax, sample_dataset
from .instances import random_instance
from .lemmas import check_instance, format_table
from .mdp import exact_q, prediction_error
from .specio import SpecError, bundled_spec_path, dump_spec, load_spec, load_sweep

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_spec_path(path)
    if bundled.exists():
        return bundled
    raise SpecError(f"{path}: no such file or bundled spec")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return "inf" if math.isinf(x) and x > 0 else x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _jobs(args):
    if args.jobs is not None:
        return args.jobs
    try:
        return max(1, int(os.environ.get("BG_JOBS", "1")))
    except ValueError:
        raise SpecError("BG_JOBS must be an integer") from None


def _need_spec(args):
    if not args.spec:
        raise SpecError("--spec is required")
    return load_spec(_resolve(args.spec))


def cmd_diagnose(args):
    spec = _need_spec(args)
    rep = diagnose(spec.fclass, spec.mdp, spec.policy, spec.mu, spec.s0)
    _emit(json.dumps(rep.to_json(), indent=2) + "\n", args.out)
    return EXIT_OK


def evaluate(spec, n, seed, estimator="minimax", delta=0.1, card=None):
    """Sample, fit and score one dataset; returns the evaluation dict."""
    data = sample_dataset(spec.mdp, spec.mu, n, seed)
    fit = minimize_minimax(spec.fclass, data, spec.policy) if estimator == "minimax" \
        else fitted_q(spec.fclass, data, spec.policy)
    consts = experiments.problem_constants(spec, card)
    err = prediction_error(fit.estimate, exact_q(spec.mdp, spec.policy), spec.policy, spec.s0)
    rep = compare_bounds(consts.card, delta, n, spec.gamma, consts.beta, consts.concentrability, consts.inherent_be)
    return _jsonable({
        "n": n, "seed": seed, "estimator": estimator, "delta": delta,
        "prediction_error": err, "abs_error": abs(err),
        "m_hat": empirical_minimax(fit.estimate, data, spec.fclass, spec.policy),
        "converged": fit.converged, "iterations": fit.iterations, "degenerate": fit.degenerate,
        "index": fit.index, "weights": None if fit.weights is None else fit.weights.tolist(),
        "estimate": fit.estimate.tolist(),
        "constants": {"beta": consts.beta, "concentrability": consts.concentrability,
                      "inherent_be": consts.inherent_be, "card": consts.card},
        "bounds": rep.to_json(),
    })


def cmd_evaluate(args):
    spec = _need_spec(args)
    if args.n < 1:
        raise SpecError("--n must be positive")
    out = evaluate(spec, args.n, args.seed, args.estimator, args.delta, args.card)
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_scaling(args):
    spec = _need_spec(args)
    if not args.sweep:
        raise SpecError("--sweep is required")
    sweep = load_sweep(_resolve(args.sweep))
    if args.seed is not None:
        sweep.master_seed = args.seed
    rows = experiments.run_sweep(spec, sweep, jobs=_jobs(args))
    text = experiments.to_csv(rows, experiments.summarize(rows))
    _emit(text, args.out or sweep.output)
    return EXIT_OK


def cmd_lemmas(args):
    if args.random is not None:
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        instances = [(f"random-{i}", random_instance(rng, gamma=(0.5, 0.9)[i % 2])) for i in range(args.random)]
    else:
        spec = _need_spec(args)
        instances = [(spec.name or "spec", spec)]
    results, offenders = [], []
    for name, spec in instances:
        res = check_instance(spec, name)
        results.extend(res)
        if not all(r.passed for r in res):
            offenders.append(spec)
    table = format_table(results) + "\n"
    n_fail = sum(not r.passed for r in results)
    table += f"# {len(instances)} instances, {len(results)} checks, {n_fail} failed\n"
    _emit(table, args.out)
    if offenders:
        for spec in offenders:
            sys.stderr.write(dump_spec(spec) + "\n")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_geometry(args):
    rows = experiments.geometry_report(args.theta, weight_radius=args.weight_radius)
    if args.json:
        text = json.dumps(_jsonable(rows), indent=2) + "\n"
    else:
        lines = [f"{'theta':>6} {'beta':>10} {'sin':>10} {'C':>10} {'C*':>12} {'I_F':>9}  small-n  large-n"]
        for r in rows:
            if "beta" not in r:
                lines.append(f"{r['theta']:>6.1f}  FAILED: {r['failure']}")
                continue
            flag = "" if r["ok"] else "  FLAGGED"
            lines.append(f"{r['theta']:>6.1f} {r['beta']:>10.6f} {r['sin_theta']:>10.6f} {r['concentrability']:>10.4g}"
                         f" {r['opc']:>12.6g} {r['inherent_be']:>9.4g}  {r['tighter_small']:>7}  {r['tighter_large']:>7}{flag}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_VIOLATION


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", default=argparse.SUPPRESS, help="problem spec path or bundled name")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write output here instead of stdout")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (env BG_JOBS)")

    p = argparse.ArgumentParser(prog="bellgap", description=__doc__.split("\n")[0])
    p.add_argument("--spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("diagnose", parents=[common], help="structural constants of a spec")

    e = sub.add_parser("evaluate", parents=[common], help="sample, fit and score once")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--estimator", choices=("minimax", "fitted_q"), default="minimax")
    e.add_argument("--delta", type=float, default=0.1)
    e.add_argument("--card", type=float, help="class size used in the bounds (linear classes)")

    s = sub.add_parser("scaling", parents=[common], help="(n, seed) sweep to CSV")
    s.add_argument("--sweep", help="sweep config path or bundled name")

    lm = sub.add_parser("lemmas", parents=[common], help="exact lemma suite")
    lm.add_argument("--random", type=int, help="run on this many random instances")

    g = sub.add_parser("geometry", parents=[common], help="line geometry with beta = sin(theta)")
    g.add_argument("--theta", type=float, nargs="+", default=[0.0, 20.0, 45.0, 85.0])
    g.add_argument("--weight-radius", type=float, default=1.0)
    g.add_argument("--json", action="store_true")
    return p


COMMANDS = {"diagnose": cmd_diagnose, "evaluate": cmd_evaluate, "scaling": cmd_scaling,
            "lemmas": cmd_lemmas, "geometry": cmd_geometry}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "evaluate" and args.seed is None:
        args.seed = 0
    try:
        return COMMANDS[args.command](args)
    except (SpecError, FileNotFoundError, IsADirectoryError) as err:
        sys.stderr.write(f"bellgap: input error: {err}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
