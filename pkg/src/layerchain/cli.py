"""Command line entry point.

Exit status is 0 on success, 1 when the problem has no feasible answer and 2
on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .baselines import METHODS, solve_with
from .errors import (
    BudgetExhausted,
    Infeasible,
    InfeasibleInstance,
    InfeasibleReference,
    InvalidInstance,
    LayerChainError,
    NoFeasiblePlacement,
    NoFeasiblePoint,
    OverSubscribed,
)
from .experiment import baseline_metrics, run_experiment
from .generator import PRESETS, generate_instance, preset
from .io import load_deployment, load_instance, load_json, save_deployment, save_instance, dump_json
from .model import check_feasibility, ensure_augmented
from .objective import evaluate, normalization_bounds
from .reallocation import RULES, reallocate_deployment
from .sca import WARM_STARTS, ScaConfig

EXIT_OK, EXIT_INFEASIBLE, EXIT_BAD_INPUT = 0, 1, 2

_INFEASIBLE = (Infeasible, InfeasibleInstance, InfeasibleReference, NoFeasiblePlacement, NoFeasiblePoint, OverSubscribed)


class _Infeasible(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="layerchain", description="Layer- and chain-sharing aware microservice placement.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random instance")
    g.add_argument("--preset", default="table3", choices=sorted(PRESETS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--set", action="append", default=[], metavar="FIELD=JSON",
                   help="override a generator field, e.g. --set n_servers=[9,9]")
    g.add_argument("--out", help="instance file (stdout if omitted)")

    s = sub.add_parser("solve", help="compute a deployment")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", default="sca", choices=METHODS)
    s.add_argument("--theta", type=float, default=0.5)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--max-iters", type=int, default=50)
    s.add_argument("--budget", type=int, default=ScaConfig.subproblem_budget,
                   help="node budget per subproblem")
    s.add_argument("--warm-start", default="portfolio", choices=WARM_STARTS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="deployment file (stdout if omitted)")
    s.add_argument("--trace", help="write the iterate trace as JSON lines")

    c = sub.add_parser("compare", help="run an experiment config")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--workers", type=int)

    r = sub.add_parser("reallocate", help="share idle cpu on each server")
    r.add_argument("--instance", required=True)
    r.add_argument("--plan", required=True, help="deployment file")
    r.add_argument("--rule", default="proportional", choices=RULES)
    r.add_argument("--out", help="JSON output (stdout if omitted)")

    m = sub.add_parser("report", help="metrics of a deployment or summary of an experiment")
    m.add_argument("--instance")
    m.add_argument("--plan", help="deployment file")
    m.add_argument("--theta", type=float, default=0.5)
    m.add_argument("--report", help="report.json written by compare")
    return p


def _emit(data, out):
    if out:
        dump_json(data, out)
    else:
        json.dump(data, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _cmd_generate(args):
    overrides = {}
    for item in args.set:
        key, _, value = item.partition("=")
        if not value:
            raise ValueError(f"--set expects FIELD=JSON, got {item!r}")
        v = json.loads(value)
        overrides[key] = tuple(v) if isinstance(v, list) else v
    inst = generate_instance(preset(args.preset, seed=args.seed, **overrides))
    if args.out:
        save_instance(inst, args.out)
    else:
        from .io import instance_to_dict

        _emit(instance_to_dict(inst), None)


def _cmd_solve(args):
    inst = ensure_augmented(load_instance(args.instance))
    cfg = ScaConfig(alpha=args.alpha, epsilon=args.epsilon, max_iters=args.max_iters, theta=args.theta,
                    subproblem_budget=args.budget, seed=args.seed, warm_start=args.warm_start)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BudgetExhausted)
        dep, trace = solve_with(args.method, inst, args.theta, cfg)
    capped = sum(issubclass(w.category, BudgetExhausted) for w in caught)
    if capped:
        print(f"warning: {capped} subproblem solve(s) hit the node budget; result may be suboptimal",
              file=sys.stderr)
    if args.trace:
        if trace is None:
            print(f"note: method {args.method} has no iterate trace", file=sys.stderr)
        else:
            trace.to_jsonl(inst, args.trace)
    F, T, R = evaluate(inst, dep, normalization_bounds(inst, args.theta))
    meta = {"method": args.method, "theta": args.theta, "F": F, "T_s": T, "R_hopKB": R,
            "budget_exhausted": bool(capped)}
    if trace is not None:
        meta.update(iterations=trace.iterations, converged=trace.converged, start=trace.start)
    if args.out:
        save_deployment(dep, args.out, meta)
    else:
        from .io import deployment_to_dict

        _emit(deployment_to_dict(dep, meta), None)


def _load_plan(args):
    if not args.instance or not args.plan:
        raise ValueError("--instance and --plan are both required")
    inst = ensure_augmented(load_instance(args.instance))
    dep = load_deployment(args.plan)
    report = check_feasibility(inst, dep)
    if not report.feasible:
        v = report.violations[0]
        raise _Infeasible(f"plan violates {v.constraint}: {v.detail}")
    return inst, dep


def _cmd_reallocate(args):
    inst, dep = _load_plan(args)
    out = {}
    for server, res in reallocate_deployment(inst, dep, args.rule).items():
        out[str(server)] = {
            "capacity_GHz": res.capacity,
            "total_e_before": res.total_u_before,
            "total_e_after": res.total_u_after,
            "microservices": [{"app": k, "idx": i, "demand_GHz": u, "allocated_GHz": f, "e": e}
                              for (k, i), u, f, e in res.rows()],
        }
    _emit({"rule": args.rule, "servers": out}, args.out)


def _cmd_report(args):
    if args.report:
        for row in load_json(args.report).get("summary", []):
            print(f"{row['method']:>4} theta={row['theta']:<4} cells={row['cells']:<4} F={row['F']:.4f} "
                  f"T={row['T_s']:.2f}s R={row['R_hopKB']:.0f}hopKB "
                  f"T_ratio={row['T_ratio']:.3f} R_ratio={row['R_ratio']:.3f}")
        return
    inst, dep = _load_plan(args)
    F, T, R = evaluate(inst, dep, normalization_bounds(inst, args.theta))
    bd, bt = baseline_metrics(inst)
    print(f"F={F:.6f} T={T:.3f}s R={R:.1f}hopKB T_ratio={T / bd:.3f} R_ratio={R / bt if bt else 0.0:.3f}")


def _cmd_compare(args):
    from .experiment import load_config

    cfg = load_config(args.config)
    if args.workers:
        from dataclasses import replace

        cfg = replace(cfg, workers=args.workers)
    report = run_experiment(cfg)
    report.write(args.out)
    failed = sum(1 for r in report.rows if r["error"])
    print(f"{len(report.rows)} cells, {failed} failed; results in {args.out}", file=sys.stderr)


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "compare": _cmd_compare,
    "reallocate": _cmd_reallocate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (_Infeasible, *_INFEASIBLE) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidInstance, LayerChainError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
