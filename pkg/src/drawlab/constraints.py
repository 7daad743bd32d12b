"""Validity of full assignments and legality of single placements.

Constraint families, in the order they are checked:

* ``ConfedCap`` - at most one team per non-UEFA confederation tag in a group
  (a play-off placeholder blocks every tag it carries);
* ``UefaMin`` / ``UefaMax`` - UEFA teams per group within the instance bounds;
* ``PotSlot`` - one team per pot per group, every slot filled;
* ``OppositePathway``, ``QuarterSeparation``, ``PreAssignment`` - the
  label-dependent rules, active under ex-ante labelling only.

"Each team in exactly one group" is structural in :class:`DrawState` and is
never reported.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import NON_UEFA, DrawState, Instance, Labelling, Team


class ViolationKind(str, enum.Enum):
    CONFED_CAP = "ConfedCap"
    UEFA_MIN = "UefaMin"
    UEFA_MAX = "UefaMax"
    POT_SLOT = "PotSlot"
    OPPOSITE_PATHWAY = "OppositePathway"
    QUARTER_SEPARATION = "QuarterSeparation"
    PRE_ASSIGNMENT = "PreAssignment"
    INCOMPLETE = "Incomplete"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: tuple

    def __str__(self) -> str:
        return f"{self.kind.value}({', '.join(map(str, self.subject))})"


def check_full(instance: Instance, state: DrawState, labelling="ex-ante") -> list:
    """All violations of a complete assignment; empty iff it is a valid draw."""
    labelling = Labelling.parse(labelling)
    out: list = []
    missing = [t.id for t in instance.teams if t.id not in state]
    if missing:
        out.append(Violation(ViolationKind.INCOMPLETE, tuple(missing)))
    for g in instance.group_labels:
        for c in NON_UEFA:
            if state.confed_count(g, c) > 1:
                out.append(Violation(ViolationKind.CONFED_CAP, (g, c.value)))
        n_uefa = state.uefa_count(g)
        if n_uefa < instance.uefa_min and not missing:
            out.append(Violation(ViolationKind.UEFA_MIN, (g,)))
        if n_uefa > instance.uefa_max:
            out.append(Violation(ViolationKind.UEFA_MAX, (g,)))
        if not missing:
            for p in range(1, instance.n_pots + 1):
                if state.slot_free(g, p):
                    out.append(Violation(ViolationKind.POT_SLOT, (g, p)))
    if labelling is Labelling.EX_ANTE:
        out.extend(_label_violations(instance, state))
    return out


def _label_violations(instance: Instance, state: DrawState) -> list:
    out = []
    for team_id, label in instance.pre_assigned.items():
        where = state.group_of(team_id)
        if where is not None and where != label:
            out.append(Violation(ViolationKind.PRE_ASSIGNMENT, (team_id, where)))
    b = instance.bracket
    if b is None:
        return out
    placed = {t: state.group_of(t) for t in sorted(b.top_seeds) if state.group_of(t) is not None}
    for pair in sorted(sorted(p) for p in b.opposite_pairs):
        i, j = pair
        if i in placed and j in placed and b.pathway_of(placed[i]) == b.pathway_of(placed[j]):
            out.append(Violation(ViolationKind.OPPOSITE_PATHWAY, (i, j)))
    by_quarter: dict = {}
    for t, g in placed.items():
        by_quarter.setdefault(b.quarter_of(g), []).append(t)
    for q, teams in sorted(by_quarter.items()):
        if len(teams) > 1:
            out.append(Violation(ViolationKind.QUARTER_SEPARATION, (f"Q{q + 1}", *teams)))
    return out


def check_placement(instance: Instance, state: DrawState, team: Team | str, group: str, labelling="ex-ante") -> bool:
    """Whether placing ``team`` into ``group`` breaks a rule checkable right now.

    The UEFA lower bound is not checked: a group short of UEFA teams may still
    receive one later, which only a completion search can decide.
    """
    labelling = Labelling.parse(labelling)
    if isinstance(team, str):
        team = instance.team(team)
    if team.id in state or not state.slot_free(group, team.pot):
        return False
    for c in team.confeds:
        if c.value != "UEFA" and state.confed_count(group, c) > 0:
            return False
    if team.is_uefa and state.uefa_count(group) >= instance.uefa_max:
        return False
    if labelling is Labelling.EX_POST:
        return True
    if team.pre_assigned_group is not None and team.pre_assigned_group != group:
        return False
    for other_id, seat in instance.pre_assigned.items():
        # A host's seat is reserved even before the host is placed.
        if seat == group and other_id != team.id and other_id not in state and instance.team(other_id).pot == team.pot:
            return False
    b = instance.bracket
    if b is not None and team.id in b.top_seeds:
        q = b.quarter_of(group)
        for other in b.top_seeds:
            where = state.group_of(other)
            if other == team.id or where is None:
                continue
            if b.quarter_of(where) == q:
                return False
            if frozenset({team.id, other}) in b.opposite_pairs and b.pathway_of(where) == b.pathway_of(group):
                return False
    return True
