"""Command-line interface.

JSON in, JSON out: every subcommand reads an instance file and prints a
result document to stdout. Diagnostics go to stderr. Exit codes: 0 success,
2 validation failure (schema, convex order), 3 size-cap violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import reports
from .curtain import build_curtain, enumerate_curtains, is_curtain
from .errors import CapError, NlmotError, NumericalError, ValidationError
from .measures import DiscreteMarginal, convex_order_report
from .oracle import CouplingPolytope, direct_concave_max, lp_max
from .serialize import (
    Instance,
    coupling_to_json,
    gain_to_json,
    marginal_to_json,
    portfolio_to_json,
)
from .solver import (
    approx_solve,
    build_vertex_set,
    dyadic_cuts,
    evaluate_J,
    gamma_means,
    row_gamma,
    solve_finite,
    solve_two_point,
    upper_bound,
)
from .superrep import build_portfolio, portfolio_price, verify_superrep

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAP = 3
EXIT_NUMERICAL = 4


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.handler(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NlmotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    json.dump(result, sys.stdout, indent=2, allow_nan=True)
    print()
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlmot",
        description="Non-linear martingale optimal transport over curtain couplings")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text, hidden=False):
        p = sub.add_parser(name, help=argparse.SUPPRESS if hidden else help_text)
        p.add_argument("--instance", required=True, help="path to the instance JSON")
        p.add_argument("--tol", type=float, default=None,
                       help="override the iterative solver tolerance")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized oracle restarts")
        p.set_defaults(handler=handler)
        return p

    add("check", _cmd_check, "validate an instance: schema, marginals, convex order")

    p = add("curtain", _cmd_curtain, "build one curtain coupling for an ordering")
    p.add_argument("--order", required=True,
                   help="comma-separated permutation of 0..n-1")

    add("enumerate", _cmd_enumerate, "enumerate all distinct curtain couplings")

    p = add("solve", _cmd_solve, "solve the finite-support problem")
    p.add_argument("--sense", choices=("max", "min"), default="max")
    p.add_argument("--report-dir", default=None,
                   help="write CSV series and PNG figures here")

    add("bound", _cmd_bound, "canonical upper bound and flatness candidate")

    p = add("two-point", _cmd_two_point, "closed-form solve for a 2-atom first marginal")
    p.add_argument("--report-dir", default=None,
                   help="write the objective section CSV and PNG here")

    p = add("approx", _cmd_approx, "discretize a continuous first marginal and solve")
    p.add_argument("--levels", required=True,
                   help="comma-separated dyadic cell counts, e.g. 2,4,8")
    p.add_argument("--report-dir", default=None,
                   help="write the (level, value) CSV and PNG here")

    p = add("superrep", _cmd_superrep, "build and verify the static portfolio")
    p.add_argument("--grid", default="50,50,50",
                   help="lattice sizes s1,s2,v for the slack verification")

    p = add("oracle", _cmd_oracle, "brute-force oracles", hidden=True)
    p.add_argument("mode", choices=("direct-concave", "lp"))

    return parser


def _load(args) -> Instance:
    return Instance.load(args.instance)


def _require_discrete(inst: Instance) -> DiscreteMarginal:
    if isinstance(inst.mu1, DiscreteMarginal):
        return inst.mu1
    raise ValidationError("this command needs a finitely supported first marginal")


def _fw_opts(inst: Instance, args) -> dict:
    fw_tol = inst.options.get("fw_tol", 1e-9)
    if args.tol is not None:
        fw_tol = args.tol
    return {"enum_cap": int(inst.options.get("enum_cap", 9)),
            "fw_tol": float(fw_tol),
            "fw_max_iter": int(inst.options.get("fw_max_iter", 100000))}


def _result_to_json(res) -> dict:
    return {
        "value": res.value,
        "upper_bound": res.upper_bound,
        "gap": res.gap,
        "flat": bool(res.flat),
        "x": [float(v) for v in res.x],
        "weights": [float(w) for w in res.weights],
        "method": res.method,
        "fw_iterations": res.fw_iterations,
        "fw_gap": res.fw_gap,
        "coupling": coupling_to_json(res.coupling),
    }


def _cmd_check(args) -> dict:
    inst = _load(args)
    mu1 = inst.mu1_measure
    if not mu1.is_probability() or not inst.mu2.is_probability():
        raise ValidationError("marginals must be probability measures")
    ok, reason = convex_order_report(mu1, inst.mu2)
    if not ok:
        raise ValidationError(f"not in convex order: {reason}")
    g1, g2 = gamma_means(inst.mu1, inst.mu2, inst.gain)
    return {"ok": True, "convex_order": True, "gamma_mean_spread": g2 - g1,
            "gain": gain_to_json(inst.gain)}


def _cmd_curtain(args) -> dict:
    inst = _load(args)
    mu1 = _require_discrete(inst)
    order = tuple(int(t) for t in args.order.split(","))
    coupling, cert = build_curtain(mu1, inst.mu2, order,
                                   enum_cap=int(inst.options.get("enum_cap", 9)))
    return {"order": list(cert.order),
            "windows": [[a, b] for a, b in cert.windows],
            "is_curtain": is_curtain(coupling),
            "J": evaluate_J(coupling, inst.gain),
            "coupling": coupling_to_json(coupling)}


def _cmd_enumerate(args) -> dict:
    inst = _load(args)
    mu1 = _require_discrete(inst)
    found = enumerate_curtains(mu1, inst.mu2, int(inst.options.get("enum_cap", 9)))
    items = []
    for coupling, order in found:
        items.append({"order": list(order),
                      "J": evaluate_J(coupling, inst.gain),
                      "row_gamma": [row_gamma(r, inst.gain) for r in coupling.rows],
                      "coupling": coupling_to_json(coupling)})
    return {"count": len(items), "couplings": items}


def _cmd_solve(args) -> dict:
    inst = _load(args)
    mu1 = _require_discrete(inst)
    res = solve_finite(mu1, inst.mu2, inst.gain, args.sense, **_fw_opts(inst, args))
    out = _result_to_json(res)
    if args.report_dir:
        vs = build_vertex_set(mu1, inst.mu2, inst.gain,
                              int(inst.options.get("enum_cap", 9)))
        if mu1.n == 2:
            files = _two_point_section(inst, mu1, args.report_dir)
        else:
            values = sorted(evaluate_J(c, inst.gain) for c in vs.couplings)
            files = reports.emit_level_report(
                args.report_dir, list(range(1, len(values) + 1)), values,
                "objective at enumerated vertices (sorted)")
        out["report_files"] = files
    return out


def _cmd_bound(args) -> dict:
    inst = _load(args)
    ub = upper_bound(inst.mu1, inst.mu2, inst.gain)
    out = {"upper_bound": ub}
    if isinstance(inst.mu1, DiscreteMarginal):
        g1, g2 = gamma_means(inst.mu1, inst.mu2, inst.gain)
        out["x0"] = [inst.gain.gamma(a) + (g2 - g1) for a in inst.mu1.atoms]
    return out


def _two_point_section(inst: Instance, mu1: DiscreteMarginal, report_dir: str,
                       samples: int = 400) -> list[str]:
    from .curtain import build_curtain as _bc
    nu_lo, _ = _bc(mu1, inst.mu2, (0, 1), _skip_checks=True)
    nu_hi, _ = _bc(mu1, inst.mu2, (1, 0), _skip_checks=True)
    x_lo = row_gamma(nu_lo.rows[0], inst.gain)
    x_hi = row_gamma(nu_hi.rows[0], inst.gain)
    x_lo, x_hi = min(x_lo, x_hi), max(x_lo, x_hi)
    g1, g2 = gamma_means(mu1, inst.mu2, inst.gain)
    p1, p2 = mu1.weights
    ga1, ga2 = inst.gain.gamma(mu1.atoms[0]), inst.gain.gamma(mu1.atoms[1])
    if x_hi <= x_lo:
        xs = [x_lo]
    else:
        xs = [x_lo + (x_hi - x_lo) * k / (samples - 1) for k in range(samples)]
    gs = [p1 * inst.gain.phi(max(x - ga1, 0.0))
          + p2 * inst.gain.phi(max((g2 - p1 * x) / p2 - ga2, 0.0)) for x in xs]
    return reports.emit_section_report(report_dir, xs, gs,
                                       "two-point objective section")


def _cmd_two_point(args) -> dict:
    inst = _load(args)
    mu1 = _require_discrete(inst)
    res = solve_two_point(mu1, inst.mu2, inst.gain)
    out = _result_to_json(res)
    if args.report_dir:
        out["report_files"] = _two_point_section(inst, mu1, args.report_dir)
    return out


def _cmd_approx(args) -> dict:
    inst = _load(args)
    mu1 = inst.mu1_measure
    counts = [int(t) for t in args.levels.split(",")]
    if any(c2 <= c1 for c1, c2 in zip(counts, counts[1:])):
        raise ValidationError("level cell counts must be increasing")
    if any(c2 % c1 != 0 for c1, c2 in zip(counts, counts[1:])):
        raise ValidationError("dyadic levels must divide each other to nest")
    levels = [dyadic_cuts(mu1, c) for c in counts]
    results = approx_solve(mu1, inst.mu2, inst.gain, levels,
                           **_fw_opts(inst, args))
    items = []
    for (li, mu1n, res), cells in zip(results, counts):
        items.append({"level": li, "cells": cells,
                      "marginal": marginal_to_json(mu1n),
                      "value": res.value, "gap": res.gap, "flat": bool(res.flat),
                      "method": res.method})
    out = {"levels": items, "values": [it["value"] for it in items]}
    if args.report_dir:
        out["report_files"] = reports.emit_level_report(
            args.report_dir, counts, out["values"],
            "value vs discretization refinement")
    return out


def _cmd_superrep(args) -> dict:
    inst = _load(args)
    sizes = [int(t) for t in args.grid.split(",")]
    if len(sizes) != 3 or any(s < 2 for s in sizes):
        raise ValidationError("grid must be three sizes >= 2, e.g. 50,50,50")
    p = build_portfolio(inst.mu1, inst.mu2, inst.gain)
    mu1 = inst.mu1_measure
    price = portfolio_price(p, inst.mu1, inst.mu2, inst.gain)
    s1 = np.linspace(mu1.support_min, mu1.support_max, sizes[0])
    s2 = np.linspace(inst.mu2.support_min, inst.mu2.support_max, sizes[1])
    v = np.linspace(0.0, 2.0 * p.v_star, sizes[2])
    worst = verify_superrep(p, inst.gain, s1, s2, v)
    return {"portfolio": portfolio_to_json(p), "price": price,
            "v_star": p.v_star, "worst_slack": worst,
            "grid": {"s1": sizes[0], "s2": sizes[1], "v": sizes[2]}}


def _cmd_oracle(args) -> dict:
    inst = _load(args)
    mu1 = _require_discrete(inst)
    mu2_atoms, mu2_weights = _atomic_target(inst)
    pol = CouplingPolytope(mu1.atoms, mu1.weights, mu2_atoms, mu2_weights)
    if args.mode == "direct-concave":
        value, pi = direct_concave_max(pol, inst.gain, seed=args.seed)
        return {"value": value, "pi": [[float(x) for x in row] for row in pi]}
    rng = np.random.default_rng(args.seed)
    objective = rng.standard_normal((pol.n, pol.m))
    value, pi = lp_max(pol, objective)
    return {"value": value, "objective": objective.tolist(),
            "pi": [[float(x) for x in row] for row in pi]}


def _atomic_target(inst: Instance) -> tuple[tuple[float, ...], tuple[float, ...]]:
    from .measures import Atom
    atoms, weights = [], []
    for piece in inst.mu2.pieces:
        if not isinstance(piece, Atom):
            raise ValidationError("oracle commands need a purely atomic mu2")
        atoms.append(piece.x)
        weights.append(piece.mass)
    return tuple(atoms), tuple(weights)


def run(argv: list[str] | None = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
