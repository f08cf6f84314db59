"""Command-line entry point ``eqodds``.

Subcommands::

    eqodds audit INPUT --kind binary|score [--tol T] [--criteria ...]
    eqodds adjust INPUT --kind binary|score --criterion C [--cost-fp X --cost-fn Y]
    eqodds scenario {1,2} --n N --seed S --out samples.csv
    eqodds casestudy [INPUT] --out DIR [--break-even B]

``audit`` exits 0 when every check passes, 1 when one fails and 2 on bad
input. JSON goes to ``--out`` when given, otherwise to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audit import CRITERIA as AUDIT_CRITERIA
from .audit import DEFAULT_BINS
from .audit import audit as run_audit
from .binary import CRITERIA as BINARY_CRITERIA
from .binary import derive, derived_joint
from .casestudy import (
    DEFAULT_BREAK_EVEN,
    DEFAULT_SWEEP,
    load_input,
    load_shipped_synthetic,
    ordering_check,
    run_case_study,
    sweep_rates,
    write_outputs,
)
from .errors import EqoddsError
from .joint import JointBinaryDistribution, LossSpec, read_samples
from .scenarios import SCORES, sample_scenario
from .score import REGIMES, optimize, policy_joint

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
CLOSED_LOOP_CHECK = {
    "equalized_odds": "equalized_odds",
    "equal_opportunity": "equal_opportunity",
    "demographic_parity": "demographic_parity",
}


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def cmd_audit(args) -> int:
    obj = read_samples(args.input, args.kind)
    tolerances = args.tol if args.tol is not None else None
    report = run_audit(obj, args.criteria, tolerances, binning=args.bins)
    _emit(report.to_json(), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def closed_loop_audit(obj, result) -> dict:
    """Re-audit the adjusted predictor against the input it was derived from."""
    if isinstance(obj, JointBinaryDistribution):
        adjusted = derived_joint(obj, result.predictor)
        tol = 1e-9
    else:
        adjusted = policy_joint(obj, result.policy)
        tol = result.tolerance
    check = CLOSED_LOOP_CHECK.get(result.criterion)
    if check is None:
        return {"criterion": result.criterion, "checked": False}
    report = run_audit(adjusted, [check], tol)
    c = report.checks[check]
    return {"criterion": check, "checked": True, "value": c.value, "tolerance": c.tolerance, "passed": c.passed}


def cmd_adjust(args) -> int:
    obj = read_samples(args.input, args.kind)
    loss = LossSpec(args.cost_fp, args.cost_fn)
    if args.kind == "binary":
        if args.criterion not in BINARY_CRITERIA:
            raise ValueError(f"binary input supports {', '.join(BINARY_CRITERIA)}; got {args.criterion}")
        result = derive(obj, loss, args.criterion)
    else:
        result = optimize(obj, loss, args.criterion)
    data = result.to_dict()
    data["closed_loop"] = closed_loop_audit(obj, result)
    data["input"] = {"path": str(args.input), "kind": args.kind, "seed": args.seed}
    _emit(_dumps(data), args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    sample = sample_scenario(args.which, args.n, args.seed)
    out = Path(args.out)
    sample.to_table(args.score).write_csv(out)
    meta = sample.metadata()
    meta["score"] = args.score
    meta["csv"] = out.name
    out.with_suffix(".meta.json").write_text(_dumps(meta) + "\n")
    return EXIT_OK


def cmd_casestudy(args) -> int:
    dist = load_input(args.input) if args.input else load_shipped_synthetic().to_distribution()
    regimes = tuple(args.regimes) if args.regimes else REGIMES
    sweep = sweep_rates(*args.sweep)
    result = run_case_study(dist, break_even=args.break_even, regimes=regimes, sweep=sweep)
    write_outputs(result, args.out)
    if set(REGIMES) <= set(regimes):
        check = ordering_check(result)
        Path(args.out, "ordering.json").write_text(_dumps(check) + "\n")
    summary = {r: result.profit_fraction[r] for r in regimes}
    sys.stdout.write(_dumps({"break_even": args.break_even, "profit_fraction": summary, "source": args.input or "shipped synthetic marginals"}) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqodds", description="Audit and post-process predictors for equalized odds.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="measure fairness violations of a predictor or score")
    a.add_argument("input", help="CSV with columns group,score_or_pred,outcome[,weight]")
    a.add_argument("--kind", choices=["binary", "score"], required=True)
    a.add_argument("--tol", type=float, default=None, help="one tolerance for every check (default: per-check defaults)")
    a.add_argument("--criteria", nargs="+", choices=AUDIT_CRITERIA, default=None)
    a.add_argument("--bins", type=int, default=DEFAULT_BINS, help="equal-mass bins for matching frequencies")
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("adjust", help="derive a loss-optimal fair predictor")
    d.add_argument("input")
    d.add_argument("--kind", choices=["binary", "score"], required=True)
    d.add_argument("--criterion", choices=REGIMES, required=True)
    d.add_argument("--cost-fp", type=float, default=1.0)
    d.add_argument("--cost-fn", type=float, default=1.0)
    d.add_argument("--seed", type=int, default=0, help="recorded in the output; the solvers are deterministic")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_adjust)

    s = sub.add_parser("scenario", help="sample one of the two indistinguishable scenarios")
    s.add_argument("which", type=int, choices=[1, 2])
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--score", choices=SCORES, default="r_star")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scenario)

    c = sub.add_parser("casestudy", help="run the five threshold regimes on credit-score marginals")
    c.add_argument("input", nargs="?", default=None, help="marginals or samples CSV (default: shipped synthetic marginals)")
    c.add_argument("--break-even", type=float, default=DEFAULT_BREAK_EVEN)
    c.add_argument("--regimes", nargs="+", choices=REGIMES, default=None)
    c.add_argument("--sweep", nargs=3, type=float, metavar=("START", "STOP", "STEP"), default=list(DEFAULT_SWEEP))
    c.add_argument("--seed", type=int, default=0, help="recorded only; the case study is deterministic")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_casestudy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EqoddsError, ValueError, OSError) as exc:
        sys.stderr.write(f"eqodds {args.command}: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
