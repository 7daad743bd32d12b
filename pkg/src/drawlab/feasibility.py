"""Can a partial draw still be completed?

:func:`can_complete` is exact: a depth-first search with forward checking,
value symmetry and a table of residual problems already proven dead.
:func:`backtrack_can_complete` is the naive reference procedure (next team,
next group, undo the previous team on a dead end) with a step budget.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _engine
from .model import DrawState, Instance, Labelling


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


_STATUS = {
    _engine.FEASIBLE: Status.FEASIBLE,
    _engine.INFEASIBLE: Status.INFEASIBLE,
    _engine.EXHAUSTED: Status.BUDGET_EXHAUSTED,
}


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Outcome of a completion query.

    Attributes
    ----------
    status : Status
    witness : DrawState or None
        A complete valid assignment extending the query state, when feasible.
    steps : int
        Search-node expansions, one per attempted placement.
    """

    status: Status
    witness: DrawState | None
    steps: int

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    def __bool__(self) -> bool:
        return self.feasible


def _check_state(instance: Instance, state: DrawState) -> None:
    if state.instance is not instance:
        raise ValueError("state belongs to a different instance")


def can_complete(instance: Instance, state: DrawState, labelling="ex-ante") -> FeasibilityVerdict:
    """Decide exactly whether ``state`` extends to a valid full assignment.

    Never returns ``BudgetExhausted``. A state whose placed teams already
    break a rule is reported infeasible with zero steps.
    """
    _check_state(instance, state)
    comp = _engine.compile_instance(instance, labelling)
    status, steps, witness = _engine.search(state.to_array(), comp)
    w = DrawState.from_array(instance, witness) if status == _engine.FEASIBLE else None
    return FeasibilityVerdict(_STATUS[status], w, steps)


def backtrack_can_complete(
    instance: Instance,
    state: DrawState,
    team_order: Sequence[str] | None = None,
    step_budget: int = 10**7,
    labelling="ex-ante",
) -> FeasibilityVerdict:
    """Plain recursive backtracking over ``team_order`` with a step budget.

    Parameters
    ----------
    team_order : sequence of team ids, optional
        Exactly the unassigned teams. Defaults to pot order, then seeding order.
    step_budget : int
        Maximum number of attempted placements before giving up.
    """
    _check_state(instance, state)
    if step_budget < 0:
        raise ValueError("step_budget must be non-negative")
    left = [t.id for t in state.unassigned()]
    if team_order is None:
        team_order = sorted(left, key=lambda t: (instance.team(t).pot, instance.team_index[t]))
    if sorted(team_order) != sorted(left):
        raise ValueError("team_order must list exactly the unassigned teams")
    comp = _engine.compile_instance(instance, labelling)
    order = np.array([instance.team_index[t] for t in team_order], dtype=np.int64)
    status, steps, assign = _engine.backtrack(
        state.to_array(), order, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups, step_budget
    )
    w = DrawState.from_array(instance, assign) if status == _engine.FEASIBLE else None
    return FeasibilityVerdict(_STATUS[int(status)], w, int(steps))


def reset_cache(instance: Instance, labelling=None) -> None:
    """Forget the dead-end table for ``instance`` (all policies by default)."""
    cache = instance.__dict__.get("_compiled", {})
    for lab, comp in cache.items():
        if labelling is None or lab is Labelling.parse(labelling):
            comp.memo.clear()
