import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from drawlab.estimators import ExactSkip, ExactUniform, SkipDrawSimulator, UniformDrawSampler
from drawlab.exact import EnumerationRefused
from drawlab.validation import ValidationError, check_pair_matrix, check_seed


def test_params_round_trip():
    est = SkipDrawSimulator(pot_order="2-1", n_draws=50, seed=3)
    assert est.get_params()["pot_order"] == "2-1"
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est


def test_skip_simulator_close_to_exact(ex3):
    sim = SkipDrawSimulator(n_draws=20000, seed=1).fit(ex3)
    exact = ExactSkip().fit(ex3)
    se = np.sqrt(np.maximum(exact.pair_matrix_.p * (1 - exact.pair_matrix_.p), 1e-12) / 20000)
    assert np.max(np.abs(sim.pair_matrix_.p - exact.pair_matrix_.p) / se) < 5
    assert sim.procedure_.name == "1-2"


def test_uniform_routes_agree(wc1990):
    exact = ExactUniform(method="count").fit(wc1990)
    assert exact.n_valid_ == ExactUniform().fit(wc1990).n_valid_
    for method in ("rejection", "exact"):
        s = UniformDrawSampler(n_samples=10000, seed=2, method=method).fit(wc1990)
        p = exact.pair_matrix_.p
        se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / 10000)
        assert np.max(np.abs(s.pair_matrix_.p - p) / se) < 5
    assert s.proposals_ == 0


def test_score_prefers_the_uniform_draw(wc1990):
    u = ExactUniform().fit(wc1990)
    skip = ExactSkip(pot_order="1-2").fit(wc1990)
    assert u.score(u) == 0 and skip.score(u) < 0
    assert skip.metrics(u.pair_matrix_).m2 > 0


def test_seed_required(ex3):
    with pytest.raises(ValidationError):
        SkipDrawSimulator(n_draws=10).fit(ex3)
    with pytest.raises(ValidationError):
        UniformDrawSampler(seed=-1).fit(ex3)


@pytest.mark.parametrize(
    "est",
    [
        SkipDrawSimulator(pot_order="1-2-3", seed=1),
        SkipDrawSimulator(n_draws=0, seed=1),
        SkipDrawSimulator(labelling="later", seed=1),
        UniformDrawSampler(method="magic", seed=1),
        ExactUniform(method="magic"),
    ],
)
def test_bad_parameters(ex3, est):
    with pytest.raises(ValidationError):
        est.fit(ex3)


def test_unfitted():
    with pytest.raises(NotFittedError):
        ExactUniform().score(None)


def test_unknown_instance():
    with pytest.raises(ValidationError):
        ExactUniform().fit("atlantis")


def test_refusal_passes_through(wc2026):
    with pytest.raises(EnumerationRefused):
        ExactUniform().fit(wc2026)


def test_budget_exhausted_uniform(wc2026):
    with pytest.raises(ValidationError):
        UniformDrawSampler(n_samples=1, seed=1, method="rejection", max_proposals=100).fit(wc2026)


def test_check_seed_types():
    assert check_seed(np.int64(4)) == 4
    for bad in (None, True, 1.5, "3"):
        with pytest.raises(ValidationError):
            check_seed(bad)


def test_check_pair_matrix(ex3):
    m = ExactUniform().fit(ex3).pair_matrix_
    check_pair_matrix(m, 2)
    with pytest.raises(ValidationError):
        check_pair_matrix(m, 3)
    bad = type(m)(m.team_ids, m.p + np.eye(6))
    with pytest.raises(ValidationError):
        check_pair_matrix(bad)
