import numpy as np
from hypothesis import given, strategies as st

from brute import all_assignments, small_instances
from drawlab import fixtures
from drawlab.constraints import ViolationKind, check_full, check_placement
from drawlab.model import DrawState


def _official_2026(inst):
    """A complete valid wc2026 draw, found by the oracle."""
    from drawlab.feasibility import can_complete

    return can_complete(inst, fixtures.hosts_seated(inst)).witness


def test_valid_draw_has_no_violations(wc2026):
    s = _official_2026(wc2026)
    assert check_full(wc2026, s, "ex-ante") == []
    assert check_full(wc2026, s, "ex-post") == []


def test_incomplete_is_reported(wc2026):
    kinds = {v.kind for v in check_full(wc2026, DrawState(wc2026))}
    assert ViolationKind.INCOMPLETE in kinds


def test_table2_start_breaks_bracket_but_not_group_rules(wc2026):
    s = fixtures.table2_state(wc2026)
    # two top seeds share a quarter in the printed start
    kinds = {v.kind for v in check_full(wc2026, s, "ex-ante")} - {ViolationKind.INCOMPLETE}
    assert kinds and kinds <= {ViolationKind.QUARTER_SEPARATION, ViolationKind.OPPOSITE_PATHWAY}
    assert {v.kind for v in check_full(wc2026, s, "ex-post")} == {ViolationKind.INCOMPLETE}


def test_placement_rules(wc2026):
    s = fixtures.hosts_seated(wc2026)
    s.remove("canada")
    assert not check_placement(wc2026, s, "canada", "C")  # seat is B
    assert check_placement(wc2026, s, "canada", "C", "ex-post")
    assert not check_placement(wc2026, s, "spain", "B")  # reserved for Canada
    s.place("canada", "B")
    assert not check_placement(wc2026, s, "panama", "A")  # two CONCACAF teams
    assert check_placement(wc2026, s, "spain", "C")


@given(small_instances(), st.integers(0, 2**32 - 1))
def test_ex_post_violations_are_a_subset(inst, seed):
    rng = np.random.default_rng(seed)
    arrays = list(all_assignments(inst))
    a = arrays[rng.integers(len(arrays))]
    s = DrawState.from_array(inst, a)
    ante = {(v.kind, v.subject) for v in check_full(inst, s, "ex-ante")}
    post = {(v.kind, v.subject) for v in check_full(inst, s, "ex-post")}
    assert post <= ante
