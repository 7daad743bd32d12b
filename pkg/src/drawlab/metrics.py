"""Non-uniformity measures comparing a draw procedure with the uniform draw.

All measures aggregate |p^D - p^U| over team pairs and are reported in
percentage points:

m1  mean over pairs that can meet (p^U > 0)
m2  maximum over all pairs
m3  mean of the ``k`` largest differences (k = 8, or fewer on tiny instances)
m4  mean over (pots 1..P-1) x (UEFA teams of the last pot)
m5  mean over (pot 1) x (UEFA teams of the last pot)
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exact import PairProbabilityMatrix
from .model import NON_UEFA, Instance

METRICS_COLUMNS = ("pot_order", "labelling", "m1", "m2", "m3", "m4", "m5", "samples_d", "samples_u", "seed")


@dataclass(frozen=True)
class TeamSets:
    t1: frozenset
    t123: frozenset
    t4u: frozenset

    @classmethod
    def from_instance(cls, instance: Instance) -> "TeamSets":
        last = instance.n_pots
        return cls(
            t1=frozenset(t.id for t in instance.teams if t.pot == 1),
            t123=frozenset(t.id for t in instance.teams if t.pot < last),
            t4u=frozenset(t.id for t in instance.teams if t.pot == last and t.is_uefa),
        )


@dataclass(frozen=True)
class PairCounts:
    prohibited: dict
    p_positive: int
    cross_pot: int


def prohibited_pairs(instance: Instance) -> set:
    """Cross-pot pairs that share a non-UEFA tag and so can never meet."""
    out = set()
    teams = instance.teams
    for i, a in enumerate(teams):
        for b in teams[i + 1 :]:
            if a.pot != b.pot and a.non_uefa_mask & b.non_uefa_mask:
                out.add((a.id, b.id))
    return out


def count_pairs(instance: Instance) -> PairCounts:
    """Prohibited cross-pot pairs per confederation and the number of pairs that can meet."""
    teams = instance.teams
    pot = np.array([t.pot for t in teams])
    mask = np.array([t.non_uefa_mask for t in teams], dtype=np.int64)
    cross = np.triu(pot[:, None] != pot[None, :], 1)
    shared = mask[:, None] & mask[None, :]
    per = {}
    for c in NON_UEFA:
        per[c.value] = int(np.count_nonzero(cross & (shared & c.bit != 0)))
    n_cross = int(np.count_nonzero(cross))
    return PairCounts(per, n_cross - int(np.count_nonzero(cross & (shared != 0))), n_cross)


@dataclass
class MetricsReport:
    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    p_positive: int
    procedure: object = None
    baseline: dict = field(default_factory=dict)
    draw: dict = field(default_factory=dict)

    def as_tuple(self) -> tuple:
        return (self.m1, self.m2, self.m3, self.m4, self.m5)


def _check_pair(matD: PairProbabilityMatrix, matU: PairProbabilityMatrix) -> None:
    if matD.team_ids != matU.team_ids:
        raise ValueError("matrices are over different team lists")


def _pair_values(matD, matU):
    iu = np.triu_indices(matD.n, k=1)
    return np.abs(matD.p[iu] - matU.p[iu]), matU.p[iu], iu


def compute_metrics(matD: PairProbabilityMatrix, matU: PairProbabilityMatrix, sets: TeamSets, top_k: int = 8, procedure=None) -> MetricsReport:
    _check_pair(matD, matU)
    universe = set(matD.team_ids)
    for name in ("t1", "t123", "t4u"):
        if not getattr(sets, name) <= universe:
            raise ValueError(f"team set {name} has teams outside the matrix")
    delta, pu, _ = _pair_values(matD, matU)
    positive = pu > 0
    n_pos = int(positive.sum())
    m1 = float(delta[positive].mean()) if n_pos else 0.0
    m2 = float(delta.max()) if delta.size else 0.0
    k = min(top_k, n_pos) if n_pos else min(top_k, delta.size)
    m3 = float(np.sort(delta)[::-1][:k].mean()) if k else 0.0

    def block_mean(rows, cols):
        if not rows or not cols:
            return 0.0
        ri = [matD.index(t) for t in sorted(rows)]
        ci = [matD.index(t) for t in sorted(cols)]
        d = np.abs(matD.p[np.ix_(ri, ci)] - matU.p[np.ix_(ri, ci)])
        return float(d.sum() / (len(ri) * len(ci)))

    m4 = block_mean(sets.t123, sets.t4u)
    m5 = block_mean(sets.t1, sets.t4u)
    return MetricsReport(
        100 * m1, 100 * m2, 100 * m3, 100 * m4, 100 * m5, n_pos, procedure,
        dict(matU.provenance), dict(matD.provenance),
    )


def delta_table(matD: PairProbabilityMatrix, matU: PairProbabilityMatrix, instance: Instance) -> list:
    """Per-pair differences in percentage points, prohibited and same-pot pairs left out.

    Returns a list of ``(team_a, team_b, p_d, p_u, delta_pp)`` tuples in
    team order.
    """
    _check_pair(matD, matU)
    banned = prohibited_pairs(instance)
    rows = []
    for i, a in enumerate(instance.teams):
        for b in instance.teams[i + 1 :]:
            if a.pot == b.pot or (a.id, b.id) in banned:
                continue
            pd, pu = matD[a.id, b.id], matU[a.id, b.id]
            rows.append((a.id, b.id, pd, pu, 100 * (pd - pu)))
    return rows


def format_delta_table(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["team_a", "team_b", "p_draw", "p_uniform", "delta_pp"])
    for a, b, pd, pu, d in rows:
        w.writerow([a, b, f"{pd:.6f}", f"{pu:.6f}", f"{d:.2f}"])
    return buf.getvalue()


def metrics_row(report: MetricsReport, samples_d=None, samples_u=None, seed=None) -> dict:
    proc = report.procedure
    return {
        "pot_order": getattr(proc, "name", ""),
        "labelling": getattr(getattr(proc, "labelling", None), "value", ""),
        "m1": report.m1,
        "m2": report.m2,
        "m3": report.m3,
        "m4": report.m4,
        "m5": report.m5,
        "samples_d": samples_d if samples_d is not None else report.draw.get("samples", ""),
        "samples_u": samples_u if samples_u is not None else report.baseline.get("samples", ""),
        "seed": seed if seed is not None else report.draw.get("seed", ""),
    }


def write_metrics_csv(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=METRICS_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        for m in ("m1", "m2", "m3", "m4", "m5"):
            r[m] = format(float(r[m]), ".17g")
        w.writerow({k: r.get(k, "") for k in METRICS_COLUMNS})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_metrics_csv(source) -> list:
    text = source if "\n" in str(source) else open(source, encoding="utf-8").read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0]) != METRICS_COLUMNS:
        raise ValueError(f"expected columns {','.join(METRICS_COLUMNS)}")
    for r in rows:
        for m in ("m1", "m2", "m3", "m4", "m5"):
            r[m] = float(r[m])
    return rows
