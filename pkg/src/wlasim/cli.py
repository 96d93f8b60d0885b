"""Command-line surface: analyze, predict, simulate, compare, validate and
export workflows.

Exit codes: 0 success, 1 validation or semantic failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

from .graph import (
    GraphValidationError,
    PlanDerivationError,
    path_cover,
    validate,
)
from .predict import (
    Prediction,
    PredictionError,
    apply_overheads,
    branch_ttx,
    masked_stages,
    predict_tasync,
    predict_tasync_masked,
    predict_tseq,
    relative_improvement,
)
from .resources import ResourceError, doa_res, wla
from .sim import (
    POLICIES,
    POLICY_DEPENDENCY,
    POLICY_SEQUENTIAL,
    SimConfig,
    SimulationError,
    Trace,
    run,
    write_timeline_csv,
    write_trace_csv,
)
from .workloads import (
    BUILTIN_NAMES,
    WorkflowError,
    WorkflowParseError,
    WorkflowSpec,
    builtin,
    load_workflow,
    save_workflow,
    workflow_document,
)


def round_half_up(value: float, ndigits: int = 0) -> float:
    scale = 10.0 ** ndigits
    return math.floor(value * scale + 0.5) / scale


def _report_seconds(value: float) -> int:
    return int(round_half_up(value))


def _report_fraction(value: float) -> float:
    return round_half_up(value, 3)


def _report_sim_seconds(value: float) -> float:
    return float(f"{value:.3f}")


def analyze_workflow(spec: WorkflowSpec, doa_model: str = "full-set") -> dict[str, Any]:
    """Degrees of asynchronicity for one workflow."""
    dg = spec.graph()
    branches = path_cover(dg)
    dep = len(branches) - 1
    res = doa_res(dg, branches, spec.pool, doa_model)
    return {
        "workflow": spec.name,
        "doa_dep": dep,
        "doa_res": res,
        "doa_model": doa_model,
        "wla": wla(dep, res),
    }


def predict_workflow(
    spec: WorkflowSpec,
    correction: Sequence[float] | None = None,
    overhead_constant: float = 0.0,
    masked: bool = False,
) -> Prediction:
    """Analytic sequential and asynchronous makespan predictions.

    Correction factors inflate asynchronous predictions only; the sequential
    figure stays uncorrected. An explicit sequential budget on the workflow
    overrides the plan sum (used when the workload was sized to a target).
    """
    dg = spec.graph()
    plan = spec.stage_plan(dg)
    factors = tuple(spec.correction_factors if correction is None else correction)

    if spec.t_seq_budget is not None:
        t_seq = spec.t_seq_budget + overhead_constant
    else:
        t_seq = predict_tseq(plan, overhead_constant)

    if spec.async_composition is not None:
        tx_of = {ts.id: ts.tx_mean for ts in dg.task_sets}
        seq_txs = [tx_of[sid] for sid in spec.async_composition.sequential]
        ttxs = [
            branch_ttx([tx_of[sid] for sid in branch])
            for branch in spec.async_composition.branches
        ]
        t_async = predict_tasync(seq_txs, ttxs, overhead_constant)
    else:
        # Each parallel region contributes its slowest branch; a plan with no
        # region degenerates to the serialized total.
        t_async = sum(stage.tx for stage in plan.sequential_stages())
        for region in plan.parallel_regions():
            t_async += max(branch_ttx(branch) for branch in region.branches)
        t_async += overhead_constant
    if factors:
        t_async = apply_overheads(t_async, factors)

    t_async_masked: float | None = None
    if masked:
        if spec.iterations is None:
            raise PredictionError(
                "masked prediction needs a workflow with staged iterations"
            )
        stage_txs = [ts.tx_mean for ts in spec.task_sets]
        t_async_masked = predict_tasync_masked(
            sum(stage_txs),
            spec.iterations,
            masked_stages(stage_txs, spec.iterations),
        )
        if factors:
            t_async_masked = apply_overheads(t_async_masked, factors)

    return Prediction(
        t_seq=t_seq,
        t_async=t_async,
        t_async_masked=t_async_masked,
        overhead_constant=overhead_constant,
        correction_factors=factors,
    )


def simulate_workflow(
    spec: WorkflowSpec,
    policy: str = POLICY_DEPENDENCY,
    seed: int = 0,
    cv: float | None = None,
    dispatch_overhead: float = 0.0,
) -> Trace:
    cfg = SimConfig(
        pool=spec.pool,
        policy=policy,
        seed=seed,
        tx_cv_override=cv,
        dispatch_overhead=dispatch_overhead,
    )
    return run(spec.graph(), cfg)


def compare_workflow(
    spec: WorkflowSpec,
    seed: int = 0,
    cv: float | None = None,
    dispatch_overhead: float = 0.0,
    overhead_pct: float = 0.0,
    correction: Sequence[float] | None = None,
    overhead_constant: float = 0.0,
) -> dict[str, Any]:
    """Full report row: analysis, predictions and both simulated policies.

    overhead_pct inflates the dependency-driven makespan post-hoc, emulating
    the cost of enabling asynchronous execution in a real framework.
    """
    analysis = analyze_workflow(spec)
    prediction = predict_workflow(spec, correction, overhead_constant)
    seq_trace = simulate_workflow(spec, POLICY_SEQUENTIAL, seed, cv, dispatch_overhead)
    async_trace = simulate_workflow(spec, POLICY_DEPENDENCY, seed, cv, dispatch_overhead)
    t_async_sim = async_trace.makespan * (1.0 + overhead_pct / 100.0)
    return {
        "workflow": spec.name,
        "doa_dep": analysis["doa_dep"],
        "doa_res": analysis["doa_res"],
        "wla": analysis["wla"],
        "t_seq_pred_s": prediction.t_seq,
        "t_async_pred_s": prediction.t_async,
        "i_pred": prediction.improvement,
        "t_seq_sim_s": seq_trace.makespan,
        "t_async_sim_s": t_async_sim,
        "i_sim": relative_improvement(seq_trace.makespan, t_async_sim),
    }


# ---------------------------------------------------------------------------
# command implementations


def _resolve_spec(args: argparse.Namespace, parser: argparse.ArgumentParser) -> WorkflowSpec:
    if args.builtin and args.workflow:
        parser.error("give either --builtin or a workflow file, not both")
    if args.builtin:
        return builtin(args.builtin)
    if args.workflow:
        return load_workflow(args.workflow)
    parser.error("a workflow is required: --builtin NAME or a workflow file path")
    raise AssertionError  # parser.error exits


def _emit(
    payload: dict[str, Any],
    as_json: bool,
    seconds_fields: tuple[str, ...] = (),
) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
        return
    for key, value in payload.items():
        if key in seconds_fields:
            print(f"{key}: {value:.3f}")
        elif isinstance(value, dict):
            rendered = " ".join(f"{k}={v:.3f}" for k, v in value.items())
            print(f"{key}: {rendered}")
        else:
            print(f"{key}: {value}")


def _cmd_analyze(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = _resolve_spec(args, parser)
    _emit(analyze_workflow(spec, args.doa_model), args.json)
    return 0


def _cmd_predict(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = _resolve_spec(args, parser)
    correction: Sequence[float] | None = args.correction
    if args.no_correction:
        correction = ()
    prediction = predict_workflow(
        spec, correction, args.overhead_constant, args.masked
    )
    payload: dict[str, Any] = {
        "workflow": spec.name,
        "t_seq_pred_s": _report_seconds(prediction.t_seq),
        "t_async_pred_s": _report_seconds(prediction.t_async),
        "i_pred": _report_fraction(prediction.improvement),
    }
    if prediction.t_async_masked is not None:
        payload["t_async_masked_pred_s"] = _report_seconds(prediction.t_async_masked)
    _emit(payload, args.json)
    return 0


def _cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = _resolve_spec(args, parser)
    trace = simulate_workflow(spec, args.policy, args.seed, args.cv, args.overhead)
    if args.trace_out:
        write_trace_csv(trace, args.trace_out)
    if args.timeline_out:
        write_timeline_csv(trace, spec.pool, args.timeline_out)
    soft = {d.name for d in spec.pool.dimensions if not d.hard}
    payload: dict[str, Any] = {
        "workflow": spec.name,
        "policy": trace.policy,
        "seed": trace.seed,
        "tasks": len(trace.records),
        "makespan_s": _report_sim_seconds(trace.makespan),
        "utilization": {
            dim: _report_fraction(value) for dim, value in trace.utilization.items()
        },
        "soft_dimensions": sorted(soft),
    }
    _emit(payload, args.json, seconds_fields=("makespan_s",))
    return 0


_REPORT_COLUMNS = (
    "workflow",
    "doa_dep",
    "doa_res",
    "wla",
    "t_seq_pred_s",
    "t_async_pred_s",
    "i_pred",
    "t_seq_sim_s",
    "t_async_sim_s",
    "i_sim",
)


def _rounded_report(row: dict[str, Any]) -> dict[str, Any]:
    out = dict(row)
    out["t_seq_pred_s"] = _report_seconds(row["t_seq_pred_s"])
    out["t_async_pred_s"] = _report_seconds(row["t_async_pred_s"])
    out["i_pred"] = _report_fraction(row["i_pred"])
    out["t_seq_sim_s"] = _report_sim_seconds(row["t_seq_sim_s"])
    out["t_async_sim_s"] = _report_sim_seconds(row["t_async_sim_s"])
    out["i_sim"] = _report_fraction(row["i_sim"])
    return out


def _cmd_compare(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = _resolve_spec(args, parser)
    correction: Sequence[float] | None = args.correction
    if args.no_correction:
        correction = ()
    row = _rounded_report(
        compare_workflow(
            spec,
            seed=args.seed,
            cv=args.cv,
            dispatch_overhead=args.overhead,
            overhead_pct=args.overhead_pct,
            correction=correction,
            overhead_constant=args.overhead_constant,
        )
    )
    if args.json:
        print(json.dumps(row, indent=2))
    else:
        cells = {c: _format_cell(c, row[c]) for c in _REPORT_COLUMNS}
        widths = {c: max(len(c), len(cells[c])) for c in _REPORT_COLUMNS}
        print("  ".join(c.ljust(widths[c]) for c in _REPORT_COLUMNS))
        print("  ".join(cells[c].ljust(widths[c]) for c in _REPORT_COLUMNS))
    return 0


def _format_cell(column: str, value: Any) -> str:
    if column in ("t_seq_sim_s", "t_async_sim_s", "i_pred", "i_sim"):
        return f"{value:.3f}"
    return str(value)


def _cmd_validate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.builtin:
        spec = builtin(args.builtin)
        violations = validate(spec.graph())
        if violations:
            for violation in violations:
                print(violation, file=sys.stderr)
            return 1
    else:
        if not args.workflow:
            parser.error("a workflow is required: --builtin NAME or a workflow file path")
        load_workflow(args.workflow)  # raises on any violation
    print("OK")
    return 0


def _cmd_builtin(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if not args.name:
        for name in BUILTIN_NAMES:
            print(name)
        return 0
    spec = builtin(args.name)
    if args.out:
        save_workflow(spec, args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(workflow_document(spec), indent=2))
    return 0


# ---------------------------------------------------------------------------
# parser


def _correction_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad correction list {text!r}") from exc


def _add_workflow_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("workflow", nargs="?", help="path to a workflow JSON file")
    sub.add_argument(
        "--builtin",
        choices=BUILTIN_NAMES,
        help="use a shipped reference workload instead of a file",
    )
    sub.add_argument("--json", action="store_true", help="machine-readable output")


def _add_prediction_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--correction",
        type=_correction_list,
        default=None,
        metavar="F1,F2",
        help="overhead fractions applied to async predictions "
        "(default: the workflow's own, normally 0.04,0.02)",
    )
    sub.add_argument(
        "--no-correction",
        action="store_true",
        help="report uncorrected async predictions",
    )
    sub.add_argument(
        "--overhead-constant",
        type=float,
        default=0.0,
        metavar="SECONDS",
        help="constant scheduler overhead added to predictions",
    )


def _add_sim_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="simulation seed")
    sub.add_argument(
        "--cv",
        type=float,
        default=None,
        metavar="REAL",
        help="override every set's execution-time coefficient of variation",
    )
    sub.add_argument(
        "--overhead",
        type=float,
        default=0.0,
        metavar="SECONDS",
        help="dispatch overhead between a set becoming eligible and starting",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlasim",
        description="Analyze, predict and simulate workflow-level asynchronicity "
        "for heterogeneous CPU/GPU task-set workflows.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser(
        "analyze", help="degrees of asynchronicity and workload-level asynchronicity"
    )
    _add_workflow_args(analyze)
    analyze.add_argument(
        "--doa-model",
        choices=("full-set", "single-task"),
        default="full-set",
        help="demand model for the resource-permitted degree",
    )
    analyze.set_defaults(func=_cmd_analyze, parser=analyze)

    predict = subparsers.add_parser("predict", help="analytic makespan predictions")
    _add_workflow_args(predict)
    _add_prediction_args(predict)
    predict.add_argument(
        "--masked",
        action="store_true",
        help="also report the masked prediction for staged iterations",
    )
    predict.set_defaults(func=_cmd_predict, parser=predict)

    simulate = subparsers.add_parser("simulate", help="run one policy and report the trace")
    _add_workflow_args(simulate)
    _add_sim_args(simulate)
    simulate.add_argument(
        "--policy", choices=POLICIES, default=POLICY_DEPENDENCY, help="scheduling policy"
    )
    simulate.add_argument("--trace-out", metavar="PATH", help="write per-task trace CSV")
    simulate.add_argument(
        "--timeline-out", metavar="PATH", help="write per-dimension usage timeline CSV"
    )
    simulate.set_defaults(func=_cmd_simulate, parser=simulate)

    compare = subparsers.add_parser(
        "compare", help="full report: analysis, predictions and both policies"
    )
    _add_workflow_args(compare)
    _add_prediction_args(compare)
    _add_sim_args(compare)
    compare.add_argument(
        "--overhead-pct",
        type=float,
        default=0.0,
        metavar="PCT",
        help="inflate the dependency-driven makespan by this percentage "
        "to emulate async-enablement overheads",
    )
    compare.set_defaults(func=_cmd_compare, parser=compare)

    validate_cmd = subparsers.add_parser("validate", help="check a workflow document")
    _add_workflow_args(validate_cmd)
    validate_cmd.set_defaults(func=_cmd_validate, parser=validate_cmd)

    builtin_cmd = subparsers.add_parser(
        "builtin", help="list builtin workloads or export one as a workflow file"
    )
    builtin_cmd.add_argument("name", nargs="?", choices=BUILTIN_NAMES)
    builtin_cmd.add_argument("--out", metavar="PATH", help="write the workflow file here")
    builtin_cmd.set_defaults(func=_cmd_builtin, parser=builtin_cmd)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args.parser)
    except (WorkflowParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        WorkflowError,
        GraphValidationError,
        PlanDerivationError,
        ResourceError,
        PredictionError,
        SimulationError,
    ) as exc:
        message = str(exc)
        for part in message.split("; "):
            print(f"error: {part}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
