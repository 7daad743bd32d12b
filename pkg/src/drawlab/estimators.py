"""Estimator-style wrappers: configure with parameters, ``fit`` on an instance,
read the pair matrix from ``pair_matrix_``.

>>> est = SkipDrawSimulator(pot_order="1-2", n_draws=1000, seed=7).fit("example3-random")
>>> est.pair_matrix_.row_sums()
array([1., 1., 1., 1., 1., 1.])
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import counting
from .draw import sample_uniform, skip_counts
from .exact import co_membership_counts, enumerate_skip, enumerate_uniform, pair_matrix_from_counts
from .metrics import TeamSets, compute_metrics
from .validation import (
    ValidationError,
    check_count,
    check_instance,
    check_labelling,
    check_pair_matrix,
    check_procedure,
    check_seed,
)


def _order(pot_order, inst):
    return tuple(range(1, inst.n_pots + 1)) if pot_order is None else pot_order


class _PairMatrixEstimator(BaseEstimator):
    """Shared ``fit`` bookkeeping; subclasses implement ``_fit``."""

    def fit(self, instance, y=None):
        inst = check_instance(instance)
        self.instance_ = inst
        self.pair_matrix_ = check_pair_matrix(self._fit(inst), inst.n_pots)
        return self

    def _check_fitted(self):
        if not hasattr(self, "pair_matrix_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit(instance)")

    def score(self, baseline, y=None) -> float:
        """Negative ``m1`` against a baseline estimator or matrix (closer to uniform scores higher)."""
        self._check_fitted()
        other = baseline.pair_matrix_ if hasattr(baseline, "pair_matrix_") else baseline
        return -compute_metrics(self.pair_matrix_, other, TeamSets.from_instance(self.instance_)).m1

    def metrics(self, baseline):
        """Non-uniformity report of this matrix against ``baseline``."""
        self._check_fitted()
        other = baseline.pair_matrix_ if hasattr(baseline, "pair_matrix_") else baseline
        return compute_metrics(self.pair_matrix_, other, TeamSets.from_instance(self.instance_))


class SkipDrawSimulator(_PairMatrixEstimator):
    """Monte Carlo pair matrix of the Skip mechanism.

    Parameters
    ----------
    pot_order : str, sequence of int or None
        Order in which pots are emptied, e.g. ``"4-3-2-1"``; None means
        pot 1 first.
    labelling : {"ex-ante", "ex-post"}
    n_draws : int
    seed : int
        Required; draw ``k`` uses a stream derived from ``(seed, procedure, k)``.
    n_workers : int
        Processes; the result does not depend on it.

    Attributes
    ----------
    pair_matrix_ : PairProbabilityMatrix
    procedure_ : Procedure
    """

    def __init__(self, pot_order=None, labelling="ex-ante", n_draws=10**5, seed=None, n_workers=1):
        self.pot_order = pot_order
        self.labelling = labelling
        self.n_draws = n_draws
        self.seed = seed
        self.n_workers = n_workers

    def _fit(self, inst):
        seed = check_seed(self.seed)
        n = check_count(self.n_draws, "n_draws")
        proc = check_procedure(_order(self.pot_order, inst), inst.n_pots, self.labelling)
        self.procedure_ = proc
        counts = skip_counts(inst, proc, n, seed, check_count(self.n_workers, "n_workers"))
        return pair_matrix_from_counts(inst, counts, n, {"seed": seed, "procedure": str(proc)})


class UniformDrawSampler(_PairMatrixEstimator):
    """Monte Carlo pair matrix of the uniform draw.

    Parameters
    ----------
    labelling : {"ex-ante", "ex-post"}
    n_samples : int
        Accepted valid draws to collect.
    seed : int
    method : {"auto", "rejection", "exact"}
        ``rejection`` filters unconstrained proposals; ``exact`` samples from
        the group-by-group count; ``auto`` prefers ``exact`` when supported.
    max_proposals : int or None
        Budget for the rejection route.
    n_workers : int

    Attributes
    ----------
    pair_matrix_ : PairProbabilityMatrix
    proposals_ : int
        Proposals consumed (0 for the exact route).
    exhausted_ : bool
        The proposal budget ran out before ``n_samples`` acceptances.
    """

    def __init__(self, labelling="ex-ante", n_samples=10**4, seed=None, method="auto", max_proposals=None, n_workers=1):
        self.labelling = labelling
        self.n_samples = n_samples
        self.seed = seed
        self.method = method
        self.max_proposals = max_proposals
        self.n_workers = n_workers

    def _fit(self, inst):
        seed = check_seed(self.seed)
        n = check_count(self.n_samples, "n_samples")
        if self.method not in ("auto", "rejection", "exact"):
            raise ValidationError(f"unknown method {self.method!r}")
        cap = None if self.max_proposals is None else check_count(self.max_proposals, "max_proposals")
        batch = sample_uniform(
            inst, check_labelling(self.labelling), n, seed, cap, check_count(self.n_workers, "n_workers"),
            method=self.method,
        )
        self.proposals_ = batch.proposals
        self.exhausted_ = batch.exhausted
        if batch.accepted == 0:
            raise ValidationError("no draw accepted within the proposal budget")
        return pair_matrix_from_counts(
            inst, co_membership_counts(inst, batch.assignments), batch.accepted,
            {"seed": seed, "procedure": f"uniform {batch.labelling.value}", "method": batch.method},
        )


class ExactUniform(_PairMatrixEstimator):
    """Exact uniform pair matrix.

    Parameters
    ----------
    labelling : {"ex-ante", "ex-post"}
    method : {"enumerate", "count"}
        ``enumerate`` walks every valid assignment (small instances only);
        ``count`` uses the group-by-group count and handles wc2026.
    ceiling : int
        Largest class-level space ``enumerate`` agrees to walk.

    Attributes
    ----------
    pair_matrix_ : PairProbabilityMatrix
    n_valid_ : int
        Number of valid labelled assignments.
    """

    def __init__(self, labelling="ex-ante", method="enumerate", ceiling=10**8):
        self.labelling = labelling
        self.method = method
        self.ceiling = ceiling

    def _fit(self, inst):
        lab = check_labelling(self.labelling)
        if self.method == "enumerate":
            res = enumerate_uniform(inst, lab, check_count(self.ceiling, "ceiling"), details=True)
            self.n_valid_ = res.n_valid
            return res.matrix
        if self.method == "count":
            counter = counting.group_counter(inst, lab)
            self.n_valid_ = counter.n_valid
            return counter.pair_matrix()
        raise ValidationError(f"unknown method {self.method!r}")


class ExactSkip(_PairMatrixEstimator):
    """Exact Skip-mechanism pair matrix over every within-pot draw order.

    Parameters
    ----------
    pot_order : str, sequence of int or None
    labelling : {"ex-ante", "ex-post"}
    ceiling : int

    Attributes
    ----------
    pair_matrix_ : PairProbabilityMatrix
    procedure_ : Procedure
    """

    def __init__(self, pot_order=None, labelling="ex-ante", ceiling=10**8):
        self.pot_order = pot_order
        self.labelling = labelling
        self.ceiling = ceiling

    def _fit(self, inst):
        proc = check_procedure(_order(self.pot_order, inst), inst.n_pots, self.labelling)
        self.procedure_ = proc
        return enumerate_skip(inst, proc, check_count(self.ceiling, "ceiling"))
