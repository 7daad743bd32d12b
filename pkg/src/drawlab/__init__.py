"""Simulation and exact analysis of constrained group draws.

The Skip mechanism places each drawn team in the first group, in label order,
that keeps the rest of the draw completable. This package provides the rules,
an exact completion oracle, the draw engine, exact enumerations, a uniform
baseline sampler and the measures comparing the two.
"""
from .constraints import Violation, ViolationKind, check_full, check_placement
from .counting import CountingUnsupported, GroupCounter, group_counter, sample_uniform_exact
from .draw import (
    DrawEvent,
    DrawTranscript,
    Procedure,
    SkipError,
    all_procedures,
    draw_rng,
    draw_sequence,
    label_ex_post,
    rejection_sample,
    run_skip_draw,
    sample_unconstrained,
    sample_uniform,
    skip_counts,
    skip_place,
    skip_sequence,
)
from .estimators import ExactSkip, ExactUniform, SkipDrawSimulator, UniformDrawSampler
from .exact import (
    EnumerationRefused,
    PairProbabilityMatrix,
    co_membership_counts,
    enumerate_skip,
    enumerate_uniform,
    pair_matrix_from_counts,
    pair_matrix_from_samples,
)
from .experiments import (
    SimulationJob,
    demonstrate_claim1,
    estimate_acceptance_rate,
    estimate_deadlock_rate,
    run_sweep,
)
from .feasibility import FeasibilityVerdict, Status, backtrack_can_complete, can_complete, reset_cache
from .fixtures import builtin, table2_state
from .metrics import MetricsReport, TeamSets, compute_metrics, count_pairs, delta_table
from .model import (
    BracketStructure,
    Confederation,
    DrawState,
    Instance,
    InstanceError,
    Labelling,
    Team,
    dump_instance,
    load_instance,
)
from .validation import ValidationError

__version__ = "0.1.0"
