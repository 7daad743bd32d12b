"""Argument checks shared by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np

from .exact import PairProbabilityMatrix
from .model import Instance, InstanceError, Labelling, load_instance


class ValidationError(ValueError):
    """An argument failed a precondition."""


def check_instance(instance) -> Instance:
    """Return an :class:`Instance` from an instance, mapping, JSON text, path or built-in name."""
    if isinstance(instance, Instance):
        return instance
    if instance is None:
        raise ValidationError("an instance is required")
    try:
        return load_instance(instance)
    except (InstanceError, KeyError, OSError) as exc:
        raise ValidationError(f"cannot load instance {str(instance)[:80]!r}: {exc}") from exc


def check_labelling(labelling) -> Labelling:
    try:
        return Labelling.parse(labelling)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def check_seed(seed) -> int:
    """Seeds are required and must be non-negative integers."""
    if seed is None:
        raise ValidationError("a seed is required")
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_procedure(procedure, n_pots: int, labelling="ex-ante"):
    from .draw import Procedure

    try:
        proc = procedure if isinstance(procedure, Procedure) else Procedure.parse(procedure, check_labelling(labelling))
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad procedure {procedure!r}: {exc}") from exc
    if sorted(proc.pot_order) != list(range(1, n_pots + 1)):
        raise ValidationError(f"pot order {proc.name} is not a permutation of 1..{n_pots}")
    return proc


def check_pair_matrix(matrix: PairProbabilityMatrix, n_pots: int | None = None, atol: float = 1e-9) -> PairProbabilityMatrix:
    """Symmetric, zero diagonal, entries in [0, 1], and rows summing to ``n_pots - 1`` if given."""
    p = matrix.p
    if not np.all(np.isfinite(p)):
        raise ValidationError("matrix has non-finite entries")
    if not np.allclose(p, p.T, atol=atol):
        raise ValidationError("matrix is not symmetric")
    if np.any(np.abs(np.diag(p)) > atol):
        raise ValidationError("matrix diagonal is not zero")
    if p.min(initial=0) < -atol or p.max(initial=0) > 1 + atol:
        raise ValidationError("matrix entries lie outside [0, 1]")
    if n_pots is not None and not np.allclose(p.sum(axis=1), n_pots - 1, atol=1e-6):
        raise ValidationError(f"row sums differ from {n_pots - 1}")
    return matrix
