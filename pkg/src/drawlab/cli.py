"""Command line entry point ``drawlab``.

Exit codes: 0 success, 2 invalid input, 3 a budget or ceiling ran out.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .model import InstanceError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3

log = logging.getLogger("drawlab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _instance_arg(p, default="wc2026"):
    p.add_argument("--instance", default=default, help="instance JSON file, JSON text, or built-in name (default: %(default)s)")


def _seed_arg(p, required=True):
    p.add_argument("--seed", type=int, required=required, help="master seed")


def _workers_arg(p):
    p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")


def _labelling_arg(p, default="ex-ante"):
    p.add_argument("--labelling", choices=("ex-ante", "ex-post"), default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drawlab", description="Constrained group draws: Skip mechanism, uniform baseline, metrics.")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("draw", help="run one Skip draw and print the groups")
    _instance_arg(p)
    p.add_argument("--order", default=None, help="pot order, e.g. 1,2,3,4 (default: pot 1 first)")
    _labelling_arg(p)
    _seed_arg(p, required=False)
    p.add_argument("--draw-index", type=int, default=0, help="which draw of the seeded stream")
    p.add_argument("--transcript", type=Path, help="write the draw as JSON lines")
    p.add_argument("--replay", type=Path, help="replay a transcript instead of drawing")

    p = sub.add_parser("sweep", help="metrics for many procedures against a uniform baseline")
    _instance_arg(p)
    p.add_argument("--orders", default="all", help="comma list of pot orders like 1-2-3-4,4-3-2-1, or 'all'")
    p.add_argument("--labellings", default="ex-ante,ex-post")
    p.add_argument("--draws", type=int, default=10**5, help="Skip draws per procedure")
    p.add_argument("--uniform-accepted", type=int, default=10**4, help="uniform samples per labelling")
    p.add_argument("--uniform-method", choices=("auto", "rejection", "exact"), default="auto")
    p.add_argument("--uniform-max-proposals", type=int, default=None, help="proposal budget for the rejection route")
    p.add_argument("--batches", type=int, default=10, help="batches for jackknife standard errors")
    _seed_arg(p)
    _workers_arg(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("uniform", help="rejection-sample uniform draws and report the acceptance rate")
    _instance_arg(p)
    _labelling_arg(p)
    p.add_argument("--proposals", type=int, required=True, help="proposal budget")
    p.add_argument("--accept", type=int, default=None, help="stop after this many acceptances")
    p.add_argument("--matrix", type=Path, help="write the sampled pair matrix as CSV")
    _seed_arg(p)
    _workers_arg(p)

    p = sub.add_parser("enumerate", help="exact pair matrix of the uniform draw or of the Skip mechanism")
    _instance_arg(p, default=None)
    p.add_argument("--kind", choices=("uniform", "skip"), default="uniform")
    p.add_argument("--order", default=None, help="pot order for --kind skip")
    _labelling_arg(p)
    p.add_argument("--method", choices=("enumerate", "count"), default="enumerate",
                   help="uniform only: walk every assignment, or count group by group")
    p.add_argument("--ceiling", type=float, default=1e8, help="largest space to walk")
    p.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("deadlock", help="share of uniform pots-1-2 prefixes with no completion")
    _instance_arg(p)
    _labelling_arg(p)
    p.add_argument("--samples", type=int, default=10**6)
    _seed_arg(p)
    _workers_arg(p)

    p = sub.add_parser("claim1", help="plain backtracking versus the completion oracle on a deadlocked start")
    p.add_argument("--budget", type=int, default=10**7, help="backtracking step budget")
    p.add_argument("--rate", type=float, default=None, help="deadlock rate for the survival figure")
    p.add_argument("--draws", type=int, default=10**4, help="draws for the survival figure")

    p = sub.add_parser("metrics", help="non-uniformity measures from two pair-matrix CSV files")
    p.add_argument("--draw", type=Path, required=True, help="matrix of the procedure")
    p.add_argument("--baseline", type=Path, required=True, help="uniform matrix")
    _instance_arg(p, default=None)
    p.add_argument("--deltas", type=Path, help="also write per-pair differences")
    return parser


# -- commands ----------------------------------------------------------------------


def _cmd_draw(args, inst) -> int:
    from .draw import DrawTranscript, run_skip_draw
    from .validation import check_count, check_procedure, check_seed

    if args.replay:
        transcript = DrawTranscript.from_jsonl(args.replay.read_text(encoding="utf-8"))
        state = transcript.replay(inst)
    else:
        order = args.order or ",".join(str(p) for p in range(1, inst.n_pots + 1))
        proc = check_procedure(order, inst.n_pots, args.labelling)
        state, transcript = run_skip_draw(
            inst, proc, seed=check_seed(args.seed), draw_index=check_count(args.draw_index, "draw-index", 0)
        )
    for label, members in state.groups().items():
        print(f"{label}: {', '.join(members)}")
    if args.transcript:
        args.transcript.write_text(transcript.to_jsonl(), encoding="utf-8")
    return EXIT_OK


def _parse_orders(text: str, n_pots: int, labellings) -> list:
    from .draw import all_procedures
    from .validation import check_procedure

    if text == "all":
        return all_procedures(n_pots, labellings)
    orders = [o.strip() for o in text.split(",") if o.strip()]
    return [check_procedure(o, n_pots, lab) for lab in labellings for o in orders]


def _cmd_sweep(args, inst) -> int:
    from .experiments import SimulationJob, run_sweep
    from .validation import check_count, check_labelling, check_seed

    labellings = [check_labelling(x.strip()) for x in args.labellings.split(",") if x.strip()]
    job = SimulationJob(
        inst,
        _parse_orders(args.orders, inst.n_pots, labellings),
        draws_per_procedure=check_count(args.draws, "draws"),
        uniform_accepted_target=check_count(args.uniform_accepted, "uniform-accepted"),
        seed=check_seed(args.seed),
        workers=check_count(args.workers, "workers"),
        out_dir=str(args.out),
        uniform_max_proposals=args.uniform_max_proposals,
        batches=check_count(args.batches, "batches"),
        uniform_method=args.uniform_method,
    )
    result = run_sweep(job)
    sys.stdout.write(result.report_csv())
    return EXIT_BUDGET if result.partial else EXIT_OK


def _cmd_uniform(args, inst) -> int:
    from .draw import sample_uniform
    from .exact import co_membership_counts, pair_matrix_from_counts
    from .experiments import garwood_interval
    from .validation import check_count, check_labelling, check_seed

    budget = check_count(args.proposals, "proposals")
    target = check_count(args.accept, "accept") if args.accept is not None else budget
    lab = check_labelling(args.labelling)
    batch = sample_uniform(inst, lab, target, check_seed(args.seed), budget, check_count(args.workers, "workers"), method="rejection")
    low, high = garwood_interval(batch.accepted, batch.proposals)
    rate = batch.accepted / batch.proposals if batch.proposals else 0.0
    print(f"instance={inst.name} labelling={lab.value} accepted={batch.accepted} proposals={batch.proposals}")
    print(f"acceptance_rate={rate:.6g} ci95=[{low:.6g}, {high:.6g}]")
    if args.matrix and batch.accepted:
        m = pair_matrix_from_counts(
            inst, co_membership_counts(inst, batch.assignments), batch.accepted,
            {"seed": args.seed, "procedure": f"uniform {lab.value}", "proposals": batch.proposals},
        )
        m.to_csv(args.matrix)
    if batch.accepted == 0 or (args.accept is not None and batch.exhausted):
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_enumerate(args, inst) -> int:
    from .estimators import ExactSkip, ExactUniform

    ceiling = int(args.ceiling)
    if args.kind == "uniform":
        est = ExactUniform(args.labelling, args.method, ceiling).fit(inst)
        print(f"# valid assignments: {est.n_valid_}", file=sys.stderr)
    else:
        est = ExactSkip(args.order, args.labelling, ceiling).fit(inst)
    text = est.pair_matrix_.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_deadlock(args, inst) -> int:
    from .experiments import estimate_deadlock_rate
    from .validation import check_count, check_seed

    est = estimate_deadlock_rate(
        inst, check_count(args.samples, "samples"), check_seed(args.seed), check_count(args.workers, "workers"), args.labelling
    )
    print(f"instance={inst.name} labelling={args.labelling} deadlocked={est.successes} samples={est.trials}")
    print(f"rate={100 * est.rate:.4f}% ci95=[{100 * est.low:.4f}%, {100 * est.high:.4f}%]")
    return EXIT_OK


def _cmd_claim1(args) -> int:
    from .experiments import PAPER_DEADLOCK_RATE, demonstrate_claim1
    from .validation import check_count

    rate = PAPER_DEADLOCK_RATE if args.rate is None else args.rate
    report = demonstrate_claim1(check_count(args.budget, "budget"), rate, check_count(args.draws, "draws"))
    print("\n".join(report.lines()))
    return EXIT_OK


def _cmd_metrics(args, inst) -> int:
    from .exact import PairProbabilityMatrix
    from .metrics import TeamSets, compute_metrics, delta_table, format_delta_table, metrics_row, write_metrics_csv
    from .model import load_instance

    mat_d = PairProbabilityMatrix.from_csv(args.draw)
    mat_u = PairProbabilityMatrix.from_csv(args.baseline, team_ids=mat_d.team_ids)
    if inst is None:
        name = mat_d.provenance.get("instance")
        if name is None:
            raise InstanceError("the matrix header names no instance; pass --instance")
        inst = load_instance(name)
    if set(mat_d.team_ids) != {t.id for t in inst.teams}:
        raise InstanceError("matrix teams do not match the instance")
    report = compute_metrics(mat_d, mat_u, TeamSets.from_instance(inst))
    row = metrics_row(report, mat_d.provenance.get("samples", ""), mat_u.provenance.get("samples", ""), mat_d.provenance.get("seed", ""))
    proc = str(mat_d.provenance.get("procedure", "")).split()
    row["pot_order"], row["labelling"] = (proc + ["", ""])[:2]
    sys.stdout.write(write_metrics_csv([row]))
    if args.deltas:
        args.deltas.write_text(format_delta_table(delta_table(mat_d, mat_u, inst)), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    from .exact import EnumerationRefused
    from .validation import ValidationError, check_instance

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "claim1":
            return _cmd_claim1(args)
        inst = None if args.instance is None else check_instance(args.instance)
        if args.command == "enumerate" and inst is None:
            raise ValidationError("--instance is required")
        handler = {
            "draw": _cmd_draw,
            "sweep": _cmd_sweep,
            "uniform": _cmd_uniform,
            "enumerate": _cmd_enumerate,
            "deadlock": _cmd_deadlock,
            "metrics": _cmd_metrics,
        }[args.command]
        return handler(args, inst)
    except EnumerationRefused as exc:
        print(f"drawlab: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, InstanceError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"drawlab: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
