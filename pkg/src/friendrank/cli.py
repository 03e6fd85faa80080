"""``friendrank`` command line: score, target, audit, simulate.

Exit codes: 0 success, 2 usage, 3 parse error, 4 validation error,
5 solver failure, 6 strategy-proofness breach found by ``audit``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .experiment import ConfigError, EmptySweep, ExperimentConfig, run_experiment
from .hodge import SolverError
from .io import ParseError, load_inputs, read_reports, write_json
from .mechanism import (
    TIE_POLICIES,
    LeaveOneOut,
    MechanismConfig,
    audit_coalition,
    audit_unilateral,
    leave_one_out_scores,
    select,
)
from .ranking import ValidationError, build_ranking_graph

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_SOLVER = 5
EXIT_BREACH = 6


class UsageError(Exception):
    pass


def _manifest(out: Path, command: str, inputs: dict, config: dict, outputs: list[str], seed=None) -> None:
    write_json(
        {
            "command": command,
            "inputs": {k: (str(v) if v is not None else None) for k, v in inputs.items()},
            "config": config,
            "seed": seed,
            "version": __version__,
            "outputs": sorted([*outputs, "manifest.json"]),
        },
        out / "manifest.json",
    )


def _mechanism_config(args) -> MechanismConfig:
    if args.cutoff is not None and args.alpha is not None:
        raise UsageError("give either --cutoff or --alpha, not both")
    mode = args.mode or ("threshold" if args.cutoff is not None else "quota" if args.alpha is not None else None)
    if mode is None:
        raise UsageError("one of --cutoff (threshold mode) or --alpha (quota mode) is required")
    if mode == "threshold":
        if args.cutoff is None:
            raise UsageError("--mode threshold needs --cutoff")
        return MechanismConfig(cutoff=args.cutoff)
    if args.alpha is None:
        raise UsageError("--mode quota needs --alpha")
    if not 0 < args.alpha <= 1:
        raise UsageError("--alpha must lie in (0, 1]")
    return MechanismConfig(alpha=args.alpha, tie_policy=args.tie_policy, seed=args.seed)


def _mech_echo(cfg: MechanismConfig) -> dict:
    if cfg.mode == "threshold":
        return {"mode": "threshold", "cutoff": cfg.cutoff}
    return {"mode": "quota", "alpha": cfg.alpha, "tie_policy": cfg.tie_policy, "seed": cfg.seed}


def _fmt(x):
    return "undefined" if x is None else f"{x:.6g}"


def cmd_score(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, network = load_inputs(args.reports, args.network)
    graph = build_ranking_graph(reports, network)
    loo = leave_one_out_scores(reports, network, tolerance=args.tolerance, method=args.method, workers=args.workers)
    full = loo.full
    doc = {
        "nodes": list(network.nodes),
        "full": full.to_dict(graph),
        "leave_one_out": [
            {
                "node": n,
                "score": loo.scores[n],
                "unscored": n in loo.unscored,
                "cycle_ratio": loo.cycle_ratios[n],
            }
            for n in network.nodes
        ],
    }
    write_json(doc, out / "scores.json")
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node", "score", "unscored", "loo_score", "loo_unscored"))
        for n in network.nodes:
            w.writerow((n, repr(full.scores[n]), int(n in full.unscored), repr(loo.scores[n]), int(n in loo.unscored)))
    _manifest(
        out,
        "score",
        {"reports": args.reports, "network": args.network},
        {"tolerance": args.tolerance, "method": args.method},
        ["scores.json", "scores.csv"],
    )
    if full.cycle_ratio is None:
        print("cycle ratio: undefined (no comparisons)")
    else:
        print(f"cycle ratio: {full.cycle_ratio:.6g}")
    print(f"{'node':<12} {'score':>10} {'loo_score':>10}")
    for n in network.nodes:
        s = "-" if n in full.unscored else f"{full.scores[n]:.6g}"
        ls = "-" if n in loo.unscored else f"{loo.scores[n]:.6g}"
        print(f"{n:<12} {s:>10} {ls:>10}")
    return EXIT_OK


def read_scores_file(path) -> LeaveOneOut:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        rows = doc["leave_one_out"]
        return LeaveOneOut(
            scores={r["node"]: float(r["score"]) for r in rows},
            unscored=frozenset(r["node"] for r in rows if r["unscored"]),
            cycle_ratios={r["node"]: r["cycle_ratio"] for r in rows},
        )
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise ParseError(path, 0, f"not a score file written by `friendrank score`: {err}") from None


def cmd_target(args) -> int:
    cfg = _mechanism_config(args)
    if (args.scores is None) == (args.reports is None):
        raise UsageError("give either --scores or --reports")
    if args.scores is not None:
        loo = read_scores_file(args.scores)
    else:
        reports, network = load_inputs(args.reports, args.network)
        loo = leave_one_out_scores(reports, network, tolerance=args.tolerance, method=args.method)
    outcome = select(loo, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(outcome.to_dict(), out / "target.json")
    _manifest(
        out,
        "target",
        {"scores": args.scores, "reports": args.reports, "network": args.network},
        _mech_echo(cfg),
        ["target.json"],
        seed=cfg.seed if cfg.mode == "quota" else None,
    )
    print(f"targeted ({len(outcome.targeted)}): {', '.join(sorted(outcome.targeted)) or '(none)'}")
    if outcome.unscored:
        print(f"unscored: {', '.join(sorted(outcome.unscored))}")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _mechanism_config(args)
    reports, network = load_inputs(args.reports, args.network)
    alternatives = read_reports(args.alternative)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    breach = False
    if args.deviator is not None:
        if args.coalition is not None:
            raise UsageError("give either --deviator or --coalition")
        alt = [r for r in alternatives if r.ranker == args.deviator]
        if len(alternatives) != 1 or not alt:
            raise ValidationError(f"alternative file must hold exactly one report, by {args.deviator!r}")
        audit = audit_unilateral(reports, network, cfg, args.deviator, alt[0])
        deltas = audit.deltas
        breach = cfg.mode == "threshold" and audit.deviator_changed
        doc = {
            "kind": "unilateral",
            "deviator": args.deviator,
            "deviator_changed": audit.deviator_changed,
            "others_changed": audit.others_changed,
        }
    elif args.coalition is not None:
        coalition = [c.strip() for c in args.coalition.split(",") if c.strip()]
        deltas = audit_coalition(reports, network, cfg, coalition, alternatives)
        doc = {"kind": "coalition", "coalition": sorted(coalition)}
    else:
        raise UsageError("one of --deviator or --coalition is required")
    doc["mechanism"] = _mech_echo(cfg)
    doc["deltas"] = [
        {"node": n, "before": d.before, "after": d.after, "p_before": d.p_before, "p_after": d.p_after, "status": d.status}
        for n, d in deltas.items()
    ]
    doc["breach"] = breach
    write_json(doc, out / "audit.json")
    _manifest(
        out,
        "audit",
        {"reports": args.reports, "network": args.network, "alternative": args.alternative},
        doc["mechanism"],
        ["audit.json"],
    )
    for n, d in deltas.items():
        print(f"{n}: {'in' if d.before else 'out'} -> {'in' if d.after else 'out'} ({d.status})")
    if breach:
        print(f"BREACH: deviator {args.deviator!r} changed their own membership under threshold mode", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    summary = run_experiment(cfg, args.out, config_path=args.config)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--method", choices=("auto", "direct", "iterative"), default="auto")


def _add_mechanism_flags(p):
    p.add_argument("--mode", choices=("threshold", "quota"))
    p.add_argument("--cutoff", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="include-all-ties")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="friendrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="HodgeRank scores, full graph and leave-one-out")
    p.add_argument("--reports", required=True)
    p.add_argument("--network")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("target", help="choose the targeted set")
    p.add_argument("--scores", help="scores.json written by `score`")
    p.add_argument("--reports")
    p.add_argument("--network")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    _add_mechanism_flags(p)
    p.set_defaults(func=cmd_target)

    p = sub.add_parser("audit", help="membership changes under a deviation")
    p.add_argument("--reports", required=True)
    p.add_argument("--network")
    p.add_argument("--alternative", required=True, help="reports file with the deviating reports")
    p.add_argument("--deviator")
    p.add_argument("--coalition", help="comma-separated node ids")
    p.add_argument("--out", required=True)
    _add_mechanism_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("simulate", help="run a synthetic experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, EmptySweep) as err:
        parser.error(str(err))  # exits with EXIT_USAGE
    except (ParseError, FileNotFoundError) as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, ConfigError, ValueError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as err:
        print(f"solver failure: {err} (residual norm {err.residual_norm:.3e})", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
