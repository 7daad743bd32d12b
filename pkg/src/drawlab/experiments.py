"""Experiment drivers: procedure sweeps, deadlock and acceptance studies,
and the cost of plain backtracking on a deadlocked start.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _engine
from .draw import (
    Procedure,
    _chunk_seed,
    _map_chunks,
    sample_uniform,
)
from .exact import PairProbabilityMatrix, co_membership_counts, pair_matrix_from_counts
from .feasibility import backtrack_can_complete, can_complete
from .fixtures import hosts_seated, table2_state
from .metrics import MetricsReport, TeamSets, compute_metrics, metrics_row, write_metrics_csv
from .model import Instance, Labelling

log = logging.getLogger(__name__)

PAPER_DEADLOCK_RATE = 0.002315


# -- sweep --------------------------------------------------------------------------


@dataclass
class SimulationJob:
    instance: Instance
    procedures: list
    draws_per_procedure: int = 10**5
    uniform_accepted_target: int = 10**4
    seed: int = 0
    workers: int = 1
    out_dir: str | None = None
    uniform_max_proposals: int | None = None
    batches: int = 10
    uniform_method: str = "auto"

    def __post_init__(self):
        if self.draws_per_procedure < 1:
            raise ValueError("draws_per_procedure must be >= 1")
        if self.uniform_accepted_target < 1:
            raise ValueError("uniform_accepted_target must be >= 1")
        if not self.procedures:
            raise ValueError("no procedures given")


@dataclass
class SweepRow:
    report: MetricsReport
    se: tuple
    change: tuple | None
    samples_d: int


@dataclass
class SweepResult:
    job: SimulationJob
    rows: list
    matrices: dict
    baselines: dict
    uniform_proposals: dict
    partial: bool = False
    notes: list = field(default_factory=list)

    def metrics_csv(self) -> str:
        return write_metrics_csv(
            metrics_row(r.report, r.samples_d, self.baselines[r.report.procedure.labelling].provenance["samples"], self.job.seed)
            for r in self.rows
        )

    def report_csv(self) -> str:
        cols = ["pot_order", "labelling"]
        for m in range(1, 6):
            cols += [f"m{m}", f"m{m}_se", f"m{m}_chg_pct"]
        lines = [",".join(cols)]
        for r in self.rows:
            p = r.report.procedure
            vals = [p.name, p.labelling.value]
            for m in range(5):
                chg = "" if r.change is None else f"{r.change[m]:.1f}"
                vals += [f"{r.report.as_tuple()[m]:.4f}", f"{r.se[m]:.4f}", chg]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def _batch_counts(instance: Instance, procedure: Procedure, n_draws: int, seed: int, workers: int, batches: int):
    """Co-membership counts per contiguous batch of draw indices."""
    from .draw import _skip_chunk

    edges = np.linspace(0, n_draws, min(batches, n_draws) + 1).astype(int)
    jobs = [(instance, procedure, seed, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    return _map_chunks(_skip_chunk, jobs, workers), [b - a for _, _, _, a, b in jobs]


def _jackknife_se(fn, d_parts, d_sizes, u_parts, u_sizes) -> np.ndarray:
    """Delete-one-batch jackknife standard errors of ``fn(count_d, n_d, count_u, n_u)``."""
    B = min(len(d_parts), len(u_parts))
    if B < 2:
        return np.full(5, np.nan)
    d_tot, u_tot = sum(d_parts), sum(u_parts)
    nd, nu = sum(d_sizes), sum(u_sizes)
    vals = []
    for b in range(B):
        vals.append(fn(d_tot - d_parts[b], nd - d_sizes[b], u_tot - u_parts[b], nu - u_sizes[b]))
    vals = np.array(vals)
    return np.sqrt((B - 1) / B * ((vals - vals.mean(axis=0)) ** 2).sum(axis=0))


def run_sweep(job: SimulationJob) -> SweepResult:
    """Skip-mechanism matrices for every procedure, compared with one shared
    sampled uniform baseline per labelling policy.
    """
    inst = job.instance
    sets = TeamSets.from_instance(inst)
    labellings = sorted({p.labelling for p in job.procedures}, key=lambda x: x.value)
    baselines, u_parts, u_sizes, proposals = {}, {}, {}, {}
    partial = False
    notes = []
    for lab in labellings:
        batch = sample_uniform(
            inst, lab, job.uniform_accepted_target, job.seed, job.uniform_max_proposals, job.workers,
            method=job.uniform_method,
        )
        proposals[lab] = batch.proposals
        if batch.accepted == 0:
            raise RuntimeError(f"no uniform sample accepted under {lab.value} within the proposal budget")
        if batch.exhausted:
            partial = True
            notes.append(f"uniform baseline {lab.value}: {batch.accepted}/{batch.target} accepted before the budget ran out")
            log.warning(notes[-1])
        splits = np.array_split(np.arange(batch.accepted), min(job.batches, batch.accepted))
        u_parts[lab] = [co_membership_counts(inst, batch.assignments[s]) for s in splits]
        u_sizes[lab] = [len(s) for s in splits]
        baselines[lab] = pair_matrix_from_counts(
            inst, sum(u_parts[lab]), batch.accepted,
            {"seed": job.seed, "procedure": f"uniform {lab.value}", "method": batch.method, "proposals": batch.proposals},
        )
    team_ids = tuple(t.id for t in inst.teams)

    def metrics_from(cd, nd, cu, nu):
        md = PairProbabilityMatrix(team_ids, cd / nd)
        mu = PairProbabilityMatrix(team_ids, cu / nu)
        return np.array(compute_metrics(md, mu, sets).as_tuple())

    rows, matrices = [], {}
    for proc in job.procedures:
        parts, sizes = _batch_counts(inst, proc, job.draws_per_procedure, job.seed, job.workers, job.batches)
        matD = pair_matrix_from_counts(
            inst, sum(parts), job.draws_per_procedure, {"seed": job.seed, "procedure": str(proc)}
        )
        matrices[proc] = matD
        report = compute_metrics(matD, baselines[proc.labelling], sets, procedure=proc)
        se = _jackknife_se(metrics_from, parts, sizes, u_parts[proc.labelling], u_sizes[proc.labelling])
        rows.append(SweepRow(report, tuple(float(x) for x in se), None, job.draws_per_procedure))
    official = Procedure(tuple(range(1, inst.n_pots + 1)), Labelling.EX_ANTE)
    ref = next((r for r in rows if r.report.procedure == official), None)
    if ref is not None:
        base = ref.report.as_tuple()
        for r in rows:
            if r is not ref:
                r.change = tuple(100 * (v - b) / b if b else float("nan") for v, b in zip(r.report.as_tuple(), base))
    result = SweepResult(job, rows, matrices, baselines, proposals, partial, notes)
    if job.out_dir:
        write_sweep(result, job.out_dir)
    return result


def write_sweep(result: SweepResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(result.metrics_csv(), encoding="utf-8")
    (out / "report.csv").write_text(result.report_csv(), encoding="utf-8")
    for lab, m in result.baselines.items():
        m.to_csv(out / f"uniform_{lab.value}.csv")
    for proc, m in result.matrices.items():
        m.to_csv(out / f"skip_{proc.name}_{proc.labelling.value}.csv")
    notes = [
        "m1 averages |p_D - p_U| over hundreds of pairs, so Monte Carlo noise in either",
        "matrix biases it upward; compare m1 values only at equal sample sizes.",
        "Standard errors: delete-one-batch jackknife over the draw and baseline batches.",
        *result.notes,
    ]
    (out / "NOTES.txt").write_text("\n".join(notes) + "\n", encoding="utf-8")


# -- deadlocks ----------------------------------------------------------------------


@dataclass(frozen=True)
class ProportionEstimate:
    successes: int
    trials: int
    low: float
    high: float
    exhausted: bool = False

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


_DEADLOCK_STREAM = 7 << 20


def _deadlock_job(args):
    instance, labelling, seed, c, n, pots_mask = args
    comp = _engine.compile_instance(instance, labelling)
    out = np.empty((n, comp.n_teams), dtype=np.int64)
    acc, used = _engine.rejection_chunk(
        _chunk_seed(seed, _DEADLOCK_STREAM, c), np.iinfo(np.int64).max, n, comp.tdata, comp.gdata, comp.opp,
        comp.par, comp.n_groups, pots_mask, False, out,
    )
    verdicts = _engine.search_batch(out[:acc], comp)
    return int((verdicts != _engine.FEASIBLE).sum()), int(acc), int(used)


def estimate_deadlock_rate(
    instance: Instance,
    samples: int = 10**6,
    seed: int = 0,
    workers: int = 1,
    labelling="ex-ante",
    pots=(1, 2),
    chunk: int = 20000,
    confidence: float = 0.95,
) -> ProportionEstimate:
    """Share of uniformly drawn pot prefixes that cannot be completed.

    Pots in ``pots`` are drawn uniformly subject to the rules checkable on
    them alone (no UEFA lower bound); each prefix then goes to the exact
    completion oracle. The interval is the Wilson score interval.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    labelling = Labelling.parse(labelling)
    mask = sum(1 << (p - 1) for p in pots)
    jobs = [
        (instance, labelling, seed, c, min(chunk, samples - a), mask)
        for c, a in enumerate(range(0, samples, chunk))
    ]
    results = _map_chunks(_deadlock_job, jobs, workers)
    dead = sum(r[0] for r in results)
    n = sum(r[1] for r in results)
    ci = stats.binomtest(dead, n).proportion_ci(confidence_level=confidence, method="wilson")
    return ProportionEstimate(dead, n, float(ci.low), float(ci.high))


# -- acceptance rate ---------------------------------------------------------------------


_ACCEPT_STREAM = 9 << 20


def _accept_job(args):
    instance, labelling, seed, c, n = args
    comp = _engine.compile_instance(instance, labelling)
    acc, used = _engine.rejection_chunk(
        _chunk_seed(seed, _ACCEPT_STREAM, c), n, np.iinfo(np.int64).max, comp.tdata, comp.gdata, comp.opp,
        comp.par, comp.n_groups, (1 << instance.n_pots) - 1, True, np.empty((0, comp.n_teams), dtype=np.int64),
    )
    return int(acc), int(used)


def garwood_interval(k: int, n: int, confidence: float = 0.95) -> tuple:
    """Exact Poisson interval for a rate of ``k`` events in ``n`` trials."""
    a = 1 - confidence
    low = 0.0 if k == 0 else stats.chi2.ppf(a / 2, 2 * k) / 2
    high = stats.chi2.ppf(1 - a / 2, 2 * k + 2) / 2
    return low / n, high / n


def estimate_acceptance_rate(
    instance: Instance,
    labelling="ex-ante",
    proposals: int = 10**6,
    seed: int = 0,
    workers: int = 1,
    chunk: int = 1 << 22,
    confidence: float = 0.95,
) -> ProportionEstimate:
    """How often an unconstrained draw satisfies every rule (Poisson interval)."""
    if proposals < 1:
        raise ValueError("proposals must be positive")
    labelling = Labelling.parse(labelling)
    jobs = [(instance, labelling, seed, c, min(chunk, proposals - a)) for c, a in enumerate(range(0, proposals, chunk))]
    results = _map_chunks(_accept_job, jobs, workers)
    acc = sum(r[0] for r in results)
    used = sum(r[1] for r in results)
    low, high = garwood_interval(acc, used, confidence)
    return ProportionEstimate(acc, used, low, high, exhausted=acc == 0)


# -- backtracking on a deadlocked start -------------------------------------------------------


@dataclass
class Claim1Report:
    budget: int
    backtrack_status: str
    backtrack_steps: int
    backtrack_seconds: float
    oracle_status: dict
    oracle_seconds: float
    step_bound: int
    deadlock_rate: float
    n_draws: int
    survival: float
    labelling: str

    def lines(self) -> list:
        return [
            f"start state: deadlocked pots 1-2 ({self.labelling} rules for the search)",
            f"backtracking: {self.backtrack_status} after {self.backtrack_steps} steps ({self.backtrack_seconds:.2f} s, budget {self.budget})",
            "completion oracle: "
            + ", ".join(f"{k} {v}" for k, v in self.oracle_status.items())
            + f" ({self.oracle_seconds * 1e3:.2f} ms)",
            f"steps to exhaust pots 3-4 by backtracking: {self.step_bound} ~ {self.step_bound:.3e}",
            f"P(no deadlock in {self.n_draws} draws) at p = {self.deadlock_rate}: {self.survival:.3e}",
        ]


def demonstrate_claim1(step_budget: int = 10**7, deadlock_rate: float = PAPER_DEADLOCK_RATE, n_draws: int = 10**4, instance=None) -> Claim1Report:
    """Run plain backtracking and the exact oracle from the deadlocked pots-1-2 start.

    The printed start has two top seeds in one bracket quarter, so under
    ex-ante rules it is rejected before any search; backtracking therefore
    runs under ex-post rules, where the start is locally valid but still
    has no completion.
    """
    from .fixtures import builtin

    inst = instance or builtin("wc2026")
    state = table2_state(inst)
    t = time.perf_counter()
    bt = backtrack_can_complete(inst, state, step_budget=step_budget, labelling="ex-post")
    bt_time = time.perf_counter() - t
    oracle = {}
    can_complete(inst, hosts_seated(inst), "ex-post")  # load compiled kernels before timing
    t = time.perf_counter()
    for lab in ("ex-ante", "ex-post"):
        oracle[lab] = can_complete(inst, state, lab).status.value
    oracle_time = (time.perf_counter() - t) / 2
    bound = 1
    for pot in inst.pots:
        free = sum(1 for t in pot if t.id not in state)
        bound *= math.factorial(free)
    return Claim1Report(
        step_budget, bt.status.value, bt.steps, bt_time, oracle, oracle_time, bound,
        deadlock_rate, n_draws, (1 - deadlock_rate) ** n_draws, "ex-post",
    )
