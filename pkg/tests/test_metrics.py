import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from drawlab.exact import PairProbabilityMatrix, enumerate_skip, enumerate_uniform
from drawlab.draw import Procedure
from drawlab.metrics import (
    METRICS_COLUMNS,
    TeamSets,
    compute_metrics,
    count_pairs,
    delta_table,
    format_delta_table,
    metrics_row,
    prohibited_pairs,
    read_metrics_csv,
    write_metrics_csv,
)


def test_pair_counts_from_team_data(wc2026):
    c = count_pairs(wc2026)
    # two CAF teams sit in pot 2 (Morocco, Senegal): 2*5 + 2*3 + 5*3
    assert c.prohibited == {"AFC": 26, "CAF": 31, "CONCACAF": 19, "CONMEBOL": 17, "OFC": 0}
    assert c.cross_pot == 864
    assert c.p_positive == 864 - 93 == 771
    assert len(prohibited_pairs(wc2026)) == 93


def test_positive_pairs_match_uniform_support(wc2026):
    from drawlab.counting import group_counter

    p = group_counter(wc2026).pair_matrix().p
    iu = np.triu_indices(48, 1)
    assert int((p[iu] > 0).sum()) == count_pairs(wc2026).p_positive


def _matrix(ids, upper):
    n = len(ids)
    p = np.zeros((n, n))
    p[np.triu_indices(n, 1)] = upper
    return PairProbabilityMatrix(ids, p + p.T)


def test_hand_computed_example():
    ids = ("a", "b", "c", "d")  # pots: a,b -> 1; c,d -> 2
    u = _matrix(ids, [0, 0.5, 0.5, 0.5, 0.5, 0])
    d = _matrix(ids, [0, 0.7, 0.3, 0.3, 0.7, 0])
    sets = TeamSets(frozenset("ab"), frozenset("ab"), frozenset("d"))
    r = compute_metrics(d, u, sets)
    assert r.p_positive == 4
    assert r.m1 == pytest.approx(20)
    assert r.m2 == pytest.approx(20)
    assert r.m3 == pytest.approx(20)  # top 4 of the positive pairs
    assert r.m4 == pytest.approx(20) and r.m5 == pytest.approx(20)


def test_identical_matrices_score_zero(ex3):
    u = enumerate_uniform(ex3)
    assert compute_metrics(u, u, TeamSets.from_instance(ex3)).as_tuple() == (0, 0, 0, 0, 0)


def test_skip_example3_metrics(ex3):
    u = enumerate_uniform(ex3)
    d = enumerate_skip(ex3, Procedure((1, 2)))
    r = compute_metrics(d, u, TeamSets.from_instance(ex3))
    assert r.m2 >= r.m3 >= r.m1 >= 0


@st.composite
def matrix_pairs(draw):
    n = draw(st.integers(3, 9))
    vals = arrays(float, n * (n - 1) // 2, elements=st.floats(0, 1))
    a, b = draw(vals), draw(vals)
    zero = draw(arrays(bool, n * (n - 1) // 2))
    b = np.where(zero, 0.0, b)
    ids = tuple(f"t{i}" for i in range(n))
    sets = TeamSets(frozenset(ids[:1]), frozenset(ids[:-1]), frozenset(ids[-1:]))
    return _matrix(ids, a), _matrix(ids, b), sets


@given(matrix_pairs())
def test_m1_le_m3_le_m2(case):
    d, u, sets = case
    r = compute_metrics(d, u, sets)
    if r.p_positive:
        assert r.m1 <= r.m3 + 1e-9
    assert r.m3 <= r.m2 + 1e-9
    assert min(r.as_tuple()) >= 0


def test_rejects_mismatched_matrices(ex3, wc1990):
    with pytest.raises(ValueError):
        compute_metrics(enumerate_uniform(ex3), enumerate_uniform(wc1990), TeamSets.from_instance(ex3))
    with pytest.raises(ValueError):
        compute_metrics(enumerate_uniform(ex3), enumerate_uniform(ex3), TeamSets.from_instance(wc1990))


def test_delta_table_skips_impossible_pairs(ex3):
    u = enumerate_uniform(ex3)
    d = enumerate_skip(ex3, Procedure((1, 2)))
    rows = delta_table(d, u, ex3)
    pairs = {(a, b) for a, b, *_ in rows}
    assert ("2", "5") not in pairs and ("1", "2") not in pairs
    assert len(rows) == 9 - 1
    assert format_delta_table(rows).startswith("team_a,team_b,p_draw,p_uniform,delta_pp\n")


def test_metrics_csv_round_trip(ex3, tmp_path):
    u = enumerate_uniform(ex3)
    d = enumerate_skip(ex3, Procedure((2, 1)))
    r = compute_metrics(d, u, TeamSets.from_instance(ex3), procedure=Procedure((2, 1)))
    row = metrics_row(r, 100, 200, 7)
    text = write_metrics_csv([row], tmp_path / "m.csv")
    assert text.splitlines()[0] == ",".join(METRICS_COLUMNS)
    back = read_metrics_csv(tmp_path / "m.csv")[0]
    assert back["pot_order"] == "2-1" and back["labelling"] == "ex-ante" and back["seed"] == "7"
    assert back["m2"] == r.m2


def test_team_sets_for_wc2026(wc2026):
    s = TeamSets.from_instance(wc2026)
    assert len(s.t1) == 12 and len(s.t123) == 36
    assert s.t4u == {"uefa-path-a", "uefa-path-b", "uefa-path-c", "uefa-path-d"}
