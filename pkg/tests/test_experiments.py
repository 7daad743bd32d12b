import math

import numpy as np
import pytest

from drawlab import fixtures
from drawlab.draw import Procedure, all_procedures
from drawlab.experiments import (
    PAPER_DEADLOCK_RATE,
    SimulationJob,
    demonstrate_claim1,
    estimate_acceptance_rate,
    estimate_deadlock_rate,
    garwood_interval,
    run_sweep,
)
from drawlab.model import Instance, Team


def _job(inst, **kw):
    base = dict(procedures=all_procedures(inst.n_pots), draws_per_procedure=2000, uniform_accepted_target=2000, seed=3)
    base.update(kw)
    return SimulationJob(inst, **base)


def test_sweep_outputs(wc1990, tmp_path):
    res = run_sweep(_job(wc1990, out_dir=str(tmp_path)))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert {"metrics.csv", "report.csv", "NOTES.txt", "uniform_ex-ante.csv", "uniform_ex-post.csv"} <= set(names)
    lines = res.metrics_csv().splitlines()
    assert lines[0] == "pot_order,labelling,m1,m2,m3,m4,m5,samples_d,samples_u,seed"
    assert len(lines) == 1 + 4
    ref = next(r for r in res.rows if r.report.procedure == Procedure((1, 2)))
    assert ref.change is None
    assert all(r.change is not None for r in res.rows if r is not ref)
    assert all(np.all(np.isfinite(r.se)) for r in res.rows)


def test_sweep_shares_one_baseline_per_policy(wc1990):
    res = run_sweep(_job(wc1990))
    for r in res.rows:
        assert r.report.baseline == res.baselines[r.report.procedure.labelling].provenance
    assert res.baselines[Procedure((1, 2), "ex-ante").labelling].provenance["procedure"] == "uniform ex-ante"


@pytest.mark.parametrize("method", ["rejection", "exact"])
def test_sweep_is_reproducible_across_workers(wc1990, method):
    one = run_sweep(_job(wc1990, workers=1, uniform_method=method))
    four = run_sweep(_job(wc1990, workers=4, uniform_method=method))
    assert one.metrics_csv() == four.metrics_csv()
    assert one.report_csv() == four.report_csv()


def test_seed_independence(ex3):
    a = run_sweep(_job(ex3, seed=1, draws_per_procedure=20000, uniform_accepted_target=20000))
    b = run_sweep(_job(ex3, seed=2, draws_per_procedure=20000, uniform_accepted_target=20000))
    for ra, rb in zip(a.rows, b.rows):
        se = math.hypot(ra.se[0], rb.se[0])
        assert abs(ra.report.m1 - rb.report.m1) <= 4 * se + 1e-9


def test_budget_exhaustion_marks_partial(wc2026):
    job = SimulationJob(wc2026, [Procedure((1, 2, 3, 4))], 10, 5, seed=1, uniform_max_proposals=1000, uniform_method="rejection")
    with pytest.raises(RuntimeError):
        run_sweep(job)


def test_partial_baseline(wc1990):
    job = _job(wc1990, uniform_accepted_target=10**6, uniform_max_proposals=5000, uniform_method="rejection")
    res = run_sweep(job)
    assert res.partial and res.notes


def test_job_validation(ex3):
    with pytest.raises(ValueError):
        SimulationJob(ex3, [], 10)
    with pytest.raises(ValueError):
        SimulationJob(ex3, [Procedure((1, 2))], 0)


def test_deadlock_rate_zero_on_example3(ex3):
    est = estimate_deadlock_rate(ex3, 5000, seed=1)
    assert est.successes == 0 and est.trials == 5000 and est.low == 0


def test_deadlock_rate_small_sample(wc2026):
    est = estimate_deadlock_rate(wc2026, 20000, seed=4)
    assert est.low < PAPER_DEADLOCK_RATE < est.high


def test_acceptance_example3(ex3):
    est = estimate_acceptance_rate(ex3, proposals=10**5, seed=2)
    assert est.low < 2 / 3 < est.high and not est.exhausted


def test_acceptance_infeasible_toy():
    teams = tuple(Team(f"t{p}{k}", "x", p, {"AFC"}) for p in (1, 2) for k in range(2))
    inst = Instance("dead", teams, ("A", "B"), 0, 2)
    est = estimate_acceptance_rate(inst, proposals=1000, seed=0)
    assert est.successes == 0 and est.exhausted and est.low == 0 and est.high > 0


def test_acceptance_matches_exact_count(wc1990):
    from drawlab.counting import group_counter

    exact = float(group_counter(wc1990).acceptance_probability())
    est = estimate_acceptance_rate(wc1990, proposals=2 * 10**5, seed=5)
    assert est.low < exact < est.high


def test_garwood_interval():
    low, high = garwood_interval(0, 100)
    assert low == 0 and high == pytest.approx(3.689 / 100, rel=1e-3)
    low, high = garwood_interval(50, 5 * 10**7)
    assert low < 1e-6 < high


def test_claim1_report():
    r = demonstrate_claim1(step_budget=10**6)
    assert r.backtrack_status == "BudgetExhausted"
    assert set(r.oracle_status.values()) == {"Infeasible"}
    assert r.oracle_seconds < 1
    assert r.step_bound == math.factorial(12) ** 2
    assert f"{r.survival:.2g}" == "8.6e-11"
    assert len(r.lines()) == 5
