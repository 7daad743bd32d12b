"""Domain types for constrained group draws.

An :class:`Instance` is immutable once built. :class:`DrawState` is the only
mutable object here; it keeps per-group pot slots and confederation counts in
sync with the team-to-group map so that legality checks stay O(1).
"""
from __future__ import annotations

import enum
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import jsonschema
import numpy as np


class InstanceError(ValueError):
    """Raised when an instance document or object is invalid.

    ``path`` points at the offending field, e.g. ``teams[3].pot``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class Confederation(str, enum.Enum):
    AFC = "AFC"
    CAF = "CAF"
    CONCACAF = "CONCACAF"
    CONMEBOL = "CONMEBOL"
    OFC = "OFC"
    UEFA = "UEFA"

    @property
    def bit(self) -> int:
        return 1 << list(Confederation).index(self)


NON_UEFA = tuple(c for c in Confederation if c is not Confederation.UEFA)


class Labelling(str, enum.Enum):
    """When group labels (and label-dependent constraints) are fixed."""

    EX_ANTE = "ex-ante"
    EX_POST = "ex-post"

    @classmethod
    def parse(cls, value: "str | Labelling") -> "Labelling":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise ValueError(f"unknown labelling policy {value!r}; use 'ex-ante' or 'ex-post'") from None


def slugify(name: str) -> str:
    text = unicodedata.normalize("NFKD", name).encode("ascii", "ignore").decode()
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass(frozen=True)
class Team:
    id: str
    name: str
    pot: int
    confeds: frozenset
    pre_assigned_group: str | None = None

    def __post_init__(self):
        confeds = frozenset(Confederation(c) for c in self.confeds)
        object.__setattr__(self, "confeds", confeds)
        if not confeds:
            raise InstanceError("team needs at least one confederation", self.id)
        if Confederation.UEFA in confeds and len(confeds) > 1:
            raise InstanceError("UEFA placeholders cannot carry other confederations", self.id)
        if self.pot < 1:
            raise InstanceError("pots are numbered from 1", self.id)

    @property
    def is_host(self) -> bool:
        # Any team seated by rule before the draw (hosts, or the 1990 seeds).
        return self.pre_assigned_group is not None

    @property
    def is_uefa(self) -> bool:
        return Confederation.UEFA in self.confeds

    @property
    def is_placeholder(self) -> bool:
        return len(self.confeds) > 1

    @property
    def non_uefa_mask(self) -> int:
        mask = 0
        for c in self.confeds:
            if c is not Confederation.UEFA:
                mask |= c.bit
        return mask


@dataclass(frozen=True)
class BracketStructure:
    """Knockout-bracket quarters and the top seeds kept apart by them."""

    quarters: tuple
    top_seeds: frozenset
    opposite_pairs: frozenset

    def __post_init__(self):
        quarters = tuple(frozenset(q) for q in self.quarters)
        object.__setattr__(self, "quarters", quarters)
        object.__setattr__(self, "top_seeds", frozenset(self.top_seeds))
        object.__setattr__(self, "opposite_pairs", frozenset(frozenset(p) for p in self.opposite_pairs))
        if len(quarters) != 4:
            raise InstanceError("bracket needs exactly 4 quarters", "bracket.quarters")
        if len({len(q) for q in quarters}) != 1:
            raise InstanceError("quarters must have equal size", "bracket.quarters")
        seen: set = set()
        for k, q in enumerate(quarters):
            if seen & q:
                raise InstanceError("quarters overlap", f"bracket.quarters[{k}]")
            seen |= q
        for k, pair in enumerate(self.opposite_pairs):
            if len(pair) != 2 or not pair <= self.top_seeds:
                raise InstanceError("opposite pairs must be two distinct top seeds", f"bracket.opposite_pairs[{k}]")
        if len(self.top_seeds) > len(quarters):
            raise InstanceError("more top seeds than quarters", "bracket.top_seeds")

    @property
    def pathways(self) -> tuple:
        q = self.quarters
        return (q[0] | q[1], q[2] | q[3])

    def quarter_of(self, label: str) -> int:
        for k, q in enumerate(self.quarters):
            if label in q:
                return k
        raise KeyError(label)

    def pathway_of(self, label: str) -> int:
        return self.quarter_of(label) // 2


@dataclass(frozen=True)
class Instance:
    name: str
    teams: tuple
    group_labels: tuple
    uefa_min: int = 1
    uefa_max: int = 2
    bracket: BracketStructure | None = None

    def __post_init__(self):
        object.__setattr__(self, "teams", tuple(self.teams))
        object.__setattr__(self, "group_labels", tuple(self.group_labels))
        _validate_instance(self)

    def __getstate__(self):
        # compiled tables are rebuilt on demand; do not ship them to workers
        return {k: v for k, v in self.__dict__.items() if k != "_compiled"}

    # -- lookups ---------------------------------------------------------
    @cached_property
    def team_index(self) -> dict:
        return {t.id: i for i, t in enumerate(self.teams)}

    @cached_property
    def group_index(self) -> dict:
        return {g: k for k, g in enumerate(self.group_labels)}

    def team(self, team_id: str) -> Team:
        return self.teams[self.team_index[team_id]]

    def find(self, name_or_id: str) -> Team:
        """Look a team up by id or display name."""
        if name_or_id in self.team_index:
            return self.team(name_or_id)
        slug = slugify(name_or_id)
        if slug in self.team_index:
            return self.team(slug)
        raise KeyError(name_or_id)

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    @cached_property
    def n_pots(self) -> int:
        return max(t.pot for t in self.teams)

    @cached_property
    def pots(self) -> tuple:
        """Per-pot team lists, pot 1 first."""
        return tuple(tuple(t for t in self.teams if t.pot == p) for p in range(1, self.n_pots + 1))

    @property
    def pre_assigned(self) -> dict:
        return {t.id: t.pre_assigned_group for t in self.teams if t.pre_assigned_group is not None}

    def uniform_space_size(self, labelling: "Labelling | str" = Labelling.EX_ANTE) -> int:
        """Number of unconstrained assignments (one team per pot per group)."""
        import math

        labelling = Labelling.parse(labelling)
        size = 1
        for pot in self.pots:
            free = sum(1 for t in pot if labelling is Labelling.EX_POST or t.pre_assigned_group is None)
            size *= math.factorial(free)
        return size

    def to_dict(self) -> dict:
        doc: dict = {
            "name": self.name,
            "groups": list(self.group_labels),
            "uefa_min": self.uefa_min,
            "uefa_max": self.uefa_max,
            "teams": [],
        }
        for t in self.teams:
            entry = {
                "id": t.id,
                "name": t.name,
                "pot": t.pot,
                "confeds": sorted(c.value for c in t.confeds),
            }
            if t.pre_assigned_group is not None:
                entry["host_group"] = t.pre_assigned_group
            doc["teams"].append(entry)
        if self.bracket is not None:
            b = self.bracket
            doc["bracket"] = {
                "quarters": [sorted(q) for q in b.quarters],
                "top_seeds": sorted(b.top_seeds),
                "opposite_pairs": sorted(sorted(p) for p in b.opposite_pairs),
            }
        return doc


def _validate_instance(inst: Instance) -> None:
    if not inst.teams:
        raise InstanceError("instance has no teams", "teams")
    if not inst.group_labels:
        raise InstanceError("instance has no groups", "groups")
    if len(set(inst.group_labels)) != len(inst.group_labels):
        raise InstanceError("duplicate group label", "groups")
    ids: set = set()
    for k, t in enumerate(inst.teams):
        if t.id in ids:
            raise InstanceError(f"duplicate team id {t.id!r}", f"teams[{k}].id")
        ids.add(t.id)
    n_pots = max(t.pot for t in inst.teams)
    n_groups = len(inst.group_labels)
    sizes = Counter(t.pot for t in inst.teams)
    for p in range(1, n_pots + 1):
        if sizes.get(p, 0) != n_groups:
            raise InstanceError(f"pot {p} has {sizes.get(p, 0)} teams, expected {n_groups}", "teams")
    seats: dict = {}
    for k, t in enumerate(inst.teams):
        g = t.pre_assigned_group
        if g is None:
            continue
        if g not in inst.group_labels:
            raise InstanceError(f"unknown group {g!r}", f"teams[{k}].host_group")
        if g in seats:
            raise InstanceError(f"group {g} already pre-assigned to {seats[g]}", f"teams[{k}].host_group")
        seats[g] = t.id
    if not 0 <= inst.uefa_min <= inst.uefa_max:
        raise InstanceError("need 0 <= uefa_min <= uefa_max", "uefa_min")
    if inst.bracket is not None:
        b = inst.bracket
        covered = frozenset().union(*b.quarters)
        if covered != frozenset(inst.group_labels):
            raise InstanceError("quarters must partition the group labels", "bracket.quarters")
        for tid in b.top_seeds:
            if tid not in ids:
                raise InstanceError(f"unknown top seed {tid!r}", "bracket.top_seeds")


# -- JSON documents ----------------------------------------------------------

INSTANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "groups", "teams"],
    "properties": {
        "name": {"type": "string"},
        "groups": {"type": "array", "minItems": 1, "items": {"type": "string", "pattern": "^[A-Z]$"}},
        "uefa_min": {"type": "integer", "minimum": 0},
        "uefa_max": {"type": "integer", "minimum": 0},
        "teams": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "name", "pot", "confeds"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "name": {"type": "string"},
                    "pot": {"type": "integer", "minimum": 1},
                    "confeds": {
                        "type": "array",
                        "minItems": 1,
                        "uniqueItems": True,
                        "items": {"enum": [c.value for c in Confederation]},
                    },
                    "host_group": {"type": "string"},
                },
            },
        },
        "bracket": {
            "type": "object",
            "additionalProperties": False,
            "required": ["quarters", "top_seeds", "opposite_pairs"],
            "properties": {
                "quarters": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {"type": "array", "items": {"type": "string"}},
                },
                "top_seeds": {"type": "array", "items": {"type": "string"}},
                "opposite_pairs": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "string"}},
                },
            },
        },
    },
}


def _json_path(error: jsonschema.ValidationError) -> str:
    path = ""
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else (f".{part}" if path else str(part))
    return path


def instance_from_dict(doc: Mapping) -> Instance:
    validator = jsonschema.Draft7Validator(INSTANCE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InstanceError(err.message, _json_path(err))
    teams = tuple(
        Team(
            id=t["id"],
            name=t["name"],
            pot=t["pot"],
            confeds=frozenset(t["confeds"]),
            pre_assigned_group=t.get("host_group"),
        )
        for t in doc["teams"]
    )
    bracket = None
    if "bracket" in doc:
        b = doc["bracket"]
        bracket = BracketStructure(
            quarters=tuple(b["quarters"]),
            top_seeds=frozenset(b["top_seeds"]),
            opposite_pairs=frozenset(frozenset(p) for p in b["opposite_pairs"]),
        )
    return Instance(
        name=doc["name"],
        teams=teams,
        group_labels=tuple(doc["groups"]),
        uefa_min=doc.get("uefa_min", 1),
        uefa_max=doc.get("uefa_max", 2),
        bracket=bracket,
    )


def load_instance(source) -> Instance:
    """Parse and validate an instance document.

    ``source`` may be a JSON string, a path, a mapping, or the name of a
    built-in fixture (``wc2026``, ``example3``, ...).
    """
    from . import fixtures

    if isinstance(source, Mapping):
        return instance_from_dict(source)
    text = str(source)
    if text in fixtures.BUILTIN_NAMES:
        return fixtures.builtin(text)
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from exc
        return instance_from_dict(doc)
    with open(text, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}", text) from exc
    return instance_from_dict(doc)


def dump_instance(instance: Instance) -> str:
    return json.dumps(instance.to_dict(), indent=2, ensure_ascii=False)


# -- draw state --------------------------------------------------------------


class DrawState:
    """A partial or complete assignment of teams to groups.

    Not thread-safe; use :meth:`copy` to hand a state to another worker.
    """

    def __init__(self, instance: Instance, assignment: Mapping[str, str] | None = None):
        self.instance = instance
        self._assignment: dict = {}
        self._slots = {g: {} for g in instance.group_labels}
        self._confeds = {g: Counter() for g in instance.group_labels}
        for team_id, label in (assignment or {}).items():
            self.place(team_id, label)

    @property
    def assignment(self) -> dict:
        return dict(self._assignment)

    def __contains__(self, team_id: str) -> bool:
        return team_id in self._assignment

    def __len__(self) -> int:
        return len(self._assignment)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DrawState):
            return NotImplemented
        return self.instance is other.instance and self._assignment == other._assignment

    def __repr__(self) -> str:
        return f"DrawState({self.instance.name!r}, {len(self)}/{len(self.instance.teams)} placed)"

    def group_of(self, team_id: str) -> str | None:
        return self._assignment.get(team_id)

    def slot(self, label: str, pot: int) -> str | None:
        return self._slots[label].get(pot)

    def slot_free(self, label: str, pot: int) -> bool:
        return pot not in self._slots[label]

    def members(self, label: str) -> list:
        return [self._slots[label][p] for p in sorted(self._slots[label])]

    def confed_count(self, label: str, confed: Confederation) -> int:
        return self._confeds[label][Confederation(confed)]

    def uefa_count(self, label: str) -> int:
        return self._confeds[label][Confederation.UEFA]

    @property
    def is_complete(self) -> bool:
        return len(self._assignment) == len(self.instance.teams)

    def unassigned(self) -> list:
        return [t for t in self.instance.teams if t.id not in self._assignment]

    def place(self, team_id: str, label: str) -> None:
        inst = self.instance
        if team_id not in inst.team_index:
            raise KeyError(f"unknown team {team_id!r}")
        if label not in inst.group_index:
            raise KeyError(f"unknown group {label!r}")
        if team_id in self._assignment:
            raise ValueError(f"{team_id} is already in group {self._assignment[team_id]}")
        team = inst.team(team_id)
        if team.pot in self._slots[label]:
            raise ValueError(f"group {label} already holds a pot-{team.pot} team")
        self._assignment[team_id] = label
        self._slots[label][team.pot] = team_id
        self._confeds[label].update(team.confeds)

    def remove(self, team_id: str) -> str:
        label = self._assignment.pop(team_id)
        team = self.instance.team(team_id)
        del self._slots[label][team.pot]
        self._confeds[label].subtract(team.confeds)
        return label

    def copy(self) -> "DrawState":
        new = DrawState.__new__(DrawState)
        new.instance = self.instance
        new._assignment = dict(self._assignment)
        new._slots = {g: dict(s) for g, s in self._slots.items()}
        new._confeds = {g: Counter(c) for g, c in self._confeds.items()}
        return new

    def recount(self) -> tuple:
        """Per-group slots and confederation counts rebuilt from the assignment."""
        slots = {g: {} for g in self.instance.group_labels}
        confeds = {g: Counter() for g in self.instance.group_labels}
        for team_id, label in self._assignment.items():
            team = self.instance.team(team_id)
            slots[label][team.pot] = team_id
            confeds[label].update(team.confeds)
        return slots, confeds

    def caches_consistent(self) -> bool:
        slots, confeds = self.recount()
        ours = {g: +c for g, c in self._confeds.items()}
        return slots == self._slots and {g: +c for g, c in confeds.items()} == ours

    def to_array(self) -> np.ndarray:
        """Group index per team index, -1 where unassigned."""
        inst = self.instance
        out = np.full(len(inst.teams), -1, dtype=np.int64)
        for team_id, label in self._assignment.items():
            out[inst.team_index[team_id]] = inst.group_index[label]
        return out

    @classmethod
    def from_array(cls, instance: Instance, groups: Iterable[int]) -> "DrawState":
        state = cls(instance)
        for i, g in enumerate(groups):
            if g >= 0:
                state.place(instance.teams[i].id, instance.group_labels[g])
        return state

    def groups(self) -> dict:
        """Label -> list of team ids, pot order."""
        return {g: self.members(g) for g in self.instance.group_labels}
