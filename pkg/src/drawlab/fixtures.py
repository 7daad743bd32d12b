"""Built-in instances and worked examples, compiled in so tests stay hermetic."""
from __future__ import annotations

from .model import BracketStructure, DrawState, Instance, Team, slugify

A, C, N, S, O, U = "AFC", "CAF", "CONCACAF", "CONMEBOL", "OFC", "UEFA"

# (name, confederations, host group) per pot, in seeding-table order.
WC2026_POTS = (
    (
        ("United States", (N,), "D"),
        ("Mexico", (N,), "A"),
        ("Canada", (N,), "B"),
        ("Spain", (U,), None),
        ("Argentina", (S,), None),
        ("France", (U,), None),
        ("England", (U,), None),
        ("Brazil", (S,), None),
        ("Portugal", (U,), None),
        ("Netherlands", (U,), None),
        ("Belgium", (U,), None),
        ("Germany", (U,), None),
    ),
    (
        ("Croatia", (U,), None),
        ("Morocco", (C,), None),
        ("Colombia", (S,), None),
        ("Uruguay", (S,), None),
        ("Switzerland", (U,), None),
        ("Japan", (A,), None),
        ("Senegal", (C,), None),
        ("Iran", (A,), None),
        ("South Korea", (A,), None),
        ("Ecuador", (S,), None),
        ("Austria", (U,), None),
        ("Australia", (A,), None),
    ),
    (
        ("Norway", (U,), None),
        ("Panama", (N,), None),
        ("Egypt", (C,), None),
        ("Algeria", (C,), None),
        ("Scotland", (U,), None),
        ("Paraguay", (S,), None),
        ("Tunisia", (C,), None),
        ("Ivory Coast", (C,), None),
        ("Uzbekistan", (A,), None),
        ("Qatar", (A,), None),
        ("Saudi Arabia", (A,), None),
        ("South Africa", (C,), None),
    ),
    (
        ("Jordan", (A,), None),
        ("Cape Verde", (C,), None),
        ("Ghana", (C,), None),
        ("Curaçao", (N,), None),
        ("Haiti", (N,), None),
        ("New Zealand", (O,), None),
        ("UEFA Path A", (U,), None),
        ("UEFA Path B", (U,), None),
        ("UEFA Path C", (U,), None),
        ("UEFA Path D", (U,), None),
        ("IC Path 1", (C, N, O), None),
        ("IC Path 2", (A, N, S), None),
    ),
)

WC2026_QUARTERS = (("E", "F", "I"), ("D", "G", "H"), ("A", "C", "L"), ("B", "J", "K"))

# Pots 1-2 of a deadlocked start: no group can take IC Path 2.
TABLE2_POTS_1_2 = {
    "A": ("Mexico", "Morocco"),
    "B": ("Canada", "Austria"),
    "C": ("Belgium", "Australia"),
    "D": ("United States", "Croatia"),
    "E": ("England", "Iran"),
    "F": ("France", "Japan"),
    "G": ("Argentina", "Switzerland"),
    "H": ("Brazil", "Senegal"),
    "I": ("Germany", "South Korea"),
    "J": ("Netherlands", "Colombia"),
    "K": ("Portugal", "Ecuador"),
    "L": ("Spain", "Uruguay"),
}

# Official pot-1 drawing sequence after the hosts were seated, with the groups it produced.
EXAMPLE_POT1_SEQUENCE = (
    ("Belgium", "C"),
    ("Argentina", "E"),
    ("Spain", "J"),
    ("Portugal", "F"),
    ("Brazil", "G"),
    ("Germany", "I"),
)


def _teams(pots) -> tuple:
    return tuple(
        Team(id=slugify(name), name=name, pot=p, confeds=frozenset(confeds), pre_assigned_group=host)
        for p, pot in enumerate(pots, start=1)
        for name, confeds, host in pot
    )


def wc2026() -> Instance:
    labels = tuple("ABCDEFGHIJKL")
    bracket = BracketStructure(
        quarters=WC2026_QUARTERS,
        top_seeds=frozenset({"spain", "argentina", "france", "england"}),
        opposite_pairs=frozenset({frozenset({"spain", "argentina"}), frozenset({"france", "england"})}),
    )
    return Instance("wc2026", _teams(WC2026_POTS), labels, uefa_min=1, uefa_max=2, bracket=bracket)


def example3(preassigned: bool = False) -> Instance:
    """Two pots of three; teams 2 and 5 share a confederation, the rest are unconstrained."""
    pots = (
        (("1", (U,), "A" if preassigned else None), ("2", (A,), None), ("3", (U,), None)),
        (("4", (U,), None), ("5", (A,), None), ("6", (U,), None)),
    )
    name = "example3-preassigned" if preassigned else "example3-random"
    return Instance(name, _teams(pots), tuple("ABC"), uefa_min=0, uefa_max=2)


def wc1990() -> Instance:
    """Six seeded groups; South American pot-2 teams avoid the South American seeds."""
    pots = (
        (
            ("Italy", (U,), "A"),
            ("Argentina", (S,), "B"),
            ("Brazil", (S,), "C"),
            ("West Germany", (U,), "D"),
            ("Belgium", (U,), "E"),
            ("England", (U,), "F"),
        ),
        (
            ("Colombia", (S,), None),
            ("Uruguay", (S,), None),
            ("Czechoslovakia", (U,), None),
            ("Ireland", (U,), None),
            ("Romania", (U,), None),
            ("Sweden", (U,), None),
        ),
    )
    return Instance("wc1990", _teams(pots), tuple("ABCDEF"), uefa_min=0, uefa_max=2)


_BUILDERS = {
    "wc2026": wc2026,
    "example3": lambda: example3(preassigned=False),
    "example3-random": lambda: example3(preassigned=False),
    "example3-preassigned": lambda: example3(preassigned=True),
    "wc1990": wc1990,
}
BUILTIN_NAMES = frozenset(_BUILDERS)
_cache: dict = {}


def builtin(name: str) -> Instance:
    if name not in _BUILDERS:
        raise KeyError(f"no built-in instance {name!r}; choose from {sorted(_BUILDERS)}")
    # Instances are immutable, so one shared object per name is safe.
    if name not in _cache:
        _cache[name] = _BUILDERS[name]()
    return _cache[name]


def builtin_fixtures() -> list:
    return [builtin(n) for n in ("wc2026", "example3-preassigned", "example3-random", "wc1990")]


def table2_state(instance: Instance | None = None) -> DrawState:
    """Pots 1-2 of the deadlocked start, as printed."""
    inst = instance or builtin("wc2026")
    state = DrawState(inst)
    for label, names in TABLE2_POTS_1_2.items():
        for name in names:
            state.place(inst.find(name).id, label)
    return state


def hosts_seated(instance: Instance) -> DrawState:
    state = DrawState(instance)
    for team_id, label in instance.pre_assigned.items():
        state.place(team_id, label)
    return state
