import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from scipy import stats

from brute import brute_pair_matrix, labellings, small_instances, valid_assignments
from drawlab import fixtures
from drawlab.constraints import check_full
from drawlab.counting import CountingUnsupported, GroupCounter, group_counter, sample_uniform_exact
from drawlab.exact import co_membership_counts, enumerate_uniform
from drawlab.model import BracketStructure, Instance, Team


@given(small_instances(), labellings())
def test_counts_match_brute_force(inst, lab):
    expected, n = brute_pair_matrix(inst, lab)
    c = GroupCounter(inst, lab)
    assert c.n_valid == n
    assert c.acceptance_probability() == Fraction(n, inst.uniform_space_size(lab))
    if n:
        assert (c.pair_matrix().exact == expected).all()


@pytest.mark.parametrize("name", ["example3-random", "example3-preassigned", "wc1990"])
@pytest.mark.parametrize("lab", ["ex-ante", "ex-post"])
def test_counts_match_enumeration(name, lab):
    inst = fixtures.builtin(name)
    res = enumerate_uniform(inst, lab, details=True)
    c = GroupCounter(inst, lab)
    assert c.n_valid == res.n_valid
    assert (c.pair_matrix().exact == res.matrix.exact).all()


def test_example3_acceptance(ex3):
    assert group_counter(ex3).acceptance_probability() == Fraction(2, 3)


def test_label_rules_in_two_pots_are_refused():
    teams = (
        Team("a", "a", 1, {"UEFA"}, "A"), Team("b", "b", 1, {"UEFA"}),
        Team("c", "c", 2, {"UEFA"}, "B"), Team("d", "d", 2, {"UEFA"}),
    )
    with pytest.raises(CountingUnsupported):
        GroupCounter(Instance("two", teams, ("A", "B"), 0, 2), "ex-ante")


@given(small_instances(max_groups=3), labellings())
def test_samples_are_valid(inst, lab):
    if not valid_assignments(inst, lab):
        with pytest.raises(ValueError):
            sample_uniform_exact(inst, lab, 1, seed=0)
        return
    for state in sample_uniform_exact(inst, lab, 20, seed=3):
        assert check_full(inst, state, lab) == []


def test_sampler_is_uniform_over_assignments(ex3_seated):
    inst = ex3_seated
    valid = [tuple(a) for a in valid_assignments(inst, "ex-ante")]
    index = {a: k for k, a in enumerate(valid)}
    draws = group_counter(inst, "ex-ante").sample_many(40 * len(valid), seed=1)
    counts = np.bincount([index[tuple(a)] for a in draws], minlength=len(valid))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_bracket_instance_sampler_uniform():
    """Four groups, one per quarter, two top seeds in opposite halves."""
    teams = tuple(Team(f"p{k}", f"p{k}", 1, {"UEFA"}) for k in range(4)) + tuple(
        Team(f"q{k}", f"q{k}", 2, {"CAF" if k < 2 else "UEFA"}) for k in range(4)
    )
    bracket = BracketStructure((("A",), ("B",), ("C",), ("D",)), {"p0", "p1"}, {frozenset({"p0", "p1"})})
    inst = Instance("bracket", teams, tuple("ABCD"), 1, 2, bracket)
    valid = [tuple(a) for a in valid_assignments(inst, "ex-ante")]
    assert group_counter(inst, "ex-ante").n_valid == len(valid)
    index = {a: k for k, a in enumerate(valid)}
    draws = group_counter(inst, "ex-ante").sample_many(60 * len(valid), seed=2)
    counts = np.bincount([index[tuple(a)] for a in draws], minlength=len(valid))
    assert stats.chisquare(counts).pvalue > 1e-3


@pytest.mark.parametrize("lab", ["ex-ante", "ex-post"])
def test_sampler_pair_frequencies_wc1990(wc1990, lab):
    c = group_counter(wc1990, lab)
    draws = c.sample_many(20000, seed=6)
    p_hat = co_membership_counts(wc1990, draws) / len(draws)
    p = enumerate_uniform(wc1990, lab).p
    se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / len(draws))
    assert np.max(np.abs(p_hat - p) / se) < 5


def test_sampling_is_seeded(wc1990):
    c = group_counter(wc1990)
    assert np.array_equal(c.sample_many(30, 4), c.sample_many(30, 4))
    assert not np.array_equal(c.sample_many(30, 4), c.sample_many(30, 5))


class TestWorldCup:
    def test_counts(self, wc2026):
        post = group_counter(wc2026, "ex-post")
        ante = group_counter(wc2026, "ex-ante")
        assert post.completions == ante.completions
        assert post.n_valid == math.factorial(12) * post.completions
        # the two policies differ only in how many pot-1 arrangements pass the label rules
        assert ante.anchor_arrangements() < math.factorial(9)
        assert float(post.acceptance_probability()) == pytest.approx(9.5579e-7, rel=1e-4)
        assert float(ante.acceptance_probability()) == pytest.approx(1.2137e-7, rel=1e-4)

    def test_pair_matrix(self, wc2026):
        m = group_counter(wc2026).pair_matrix()
        assert np.allclose(m.row_sums(), 3)
        assert m["paraguay", "ic-path-1"] == pytest.approx(0.182, abs=5e-4)
        assert m["mexico", "south-africa"] == pytest.approx(0.0893, abs=5e-4)
        assert m["ic-path-2", "haiti"] == 0
        assert m["spain", "argentina"] == 0

    def test_policies_share_the_pair_matrix(self, wc2026):
        a = group_counter(wc2026, "ex-ante").pair_matrix()
        b = group_counter(wc2026, "ex-post").pair_matrix()
        assert (a.exact == b.exact).all()

    def test_samples_match_exact_matrix(self, wc2026):
        c = group_counter(wc2026, "ex-ante")
        draws = c.sample_many(3000, seed=9)
        for a in draws[:200]:
            from drawlab.model import DrawState

            assert check_full(wc2026, DrawState.from_array(wc2026, a)) == []
        p_hat = co_membership_counts(wc2026, draws) / len(draws)
        p = c.pair_matrix().p
        se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / len(draws))
        z = np.abs(p_hat - p) / se
        assert np.max(z[p > 0]) < 5.5
        assert np.all(p_hat[p == 0] == 0)
