"""Exhaustive enumeration for small instances, and the pair-probability matrix.

Teams with identical rule-relevant attributes (pot, tags, seat, seed role)
are interchangeable. Both enumerators work on these classes and recover
team-level probabilities by exchangeability: two teams of classes ``a`` and
``b`` share a group with probability E[#(a, b) co-occurrences] / (n_a n_b).
All arithmetic is in Python integers and :class:`fractions.Fraction`.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import _engine
from .model import DrawState, Instance, Labelling

DEFAULT_CEILING = 10**8


class EnumerationRefused(ValueError):
    """The state space is larger than the configured ceiling."""

    def __init__(self, size: int, ceiling: int, what: str):
        self.size = size
        self.ceiling = ceiling
        super().__init__(f"{what} has {size:.3e} elements, above the ceiling of {ceiling:.0e}")


@dataclass
class PairProbabilityMatrix:
    """Same-group probability for every pair of teams.

    Attributes
    ----------
    team_ids : tuple of str
    p : ndarray, shape (n, n)
        Symmetric, zero diagonal.
    provenance : dict
        ``kind`` is ``ExactUniform``, ``ExactSkip`` or ``MonteCarlo``; Monte
        Carlo matrices also record ``samples``, ``seed`` and ``procedure``.
    exact : ndarray of Fraction or None
        Rational values, when known.
    """

    team_ids: tuple
    p: np.ndarray
    provenance: dict = field(default_factory=dict)
    exact: np.ndarray | None = None

    def __post_init__(self):
        self.team_ids = tuple(self.team_ids)
        self.p = np.asarray(self.p, dtype=float)
        n = len(self.team_ids)
        if self.p.shape != (n, n):
            raise ValueError(f"matrix shape {self.p.shape} does not match {n} teams")
        self._index = {t: i for i, t in enumerate(self.team_ids)}

    @property
    def n(self) -> int:
        return len(self.team_ids)

    @property
    def kind(self) -> str:
        return self.provenance.get("kind", "unknown")

    def index(self, team_id: str) -> int:
        return self._index[team_id]

    def __getitem__(self, pair) -> float:
        a, b = pair
        return float(self.p[self._index[a], self._index[b]])

    def fraction(self, a: str, b: str) -> Fraction:
        if self.exact is None:
            raise ValueError("matrix has no exact values")
        return self.exact[self._index[a], self._index[b]]

    def row_sums(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def pairs(self):
        """Yield ``(team_a, team_b, probability)`` for i < j."""
        for i in range(self.n):
            for j in range(i + 1, self.n):
                yield self.team_ids[i], self.team_ids[j], float(self.p[i, j])

    # -- CSV -------------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        """Long-form CSV with a ``#``-prefixed provenance header; values at 17 significant digits."""
        buf = io.StringIO()
        for key in sorted(self.provenance):
            buf.write(f"# {key}: {self.provenance[key]}\n")
        buf.write(f"# exact: {self.exact is not None}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["team_a", "team_b", "probability"])
        for a, b, x in self.pairs():
            w.writerow([a, b, format(x, ".17g")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, team_ids=None) -> "PairProbabilityMatrix":
        """Read a matrix written by :meth:`to_csv` (path or CSV text)."""
        text = source if "\n" in str(source) else open(source, encoding="utf-8").read()
        provenance: dict = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                if key != "exact":
                    provenance[key] = _parse_scalar(value)
            elif line.strip():
                body.append(line)
        rows = list(csv.DictReader(body))
        if not rows or set(rows[0]) != {"team_a", "team_b", "probability"}:
            raise ValueError("expected columns team_a,team_b,probability")
        if team_ids is None:
            seen: dict = {}
            for r in rows:
                seen.setdefault(r["team_a"], None)
                seen.setdefault(r["team_b"], None)
            team_ids = tuple(seen)
        index = {t: i for i, t in enumerate(team_ids)}
        p = np.zeros((len(team_ids), len(team_ids)))
        for r in rows:
            i, j = index[r["team_a"]], index[r["team_b"]]
            p[i, j] = p[j, i] = float(r["probability"])
        return cls(tuple(team_ids), p, provenance)


def _parse_scalar(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return {"None": None, "True": True, "False": False}.get(value, value)


def _from_class_weights(instance, comp, weights: dict, total, kind: str, extra=None) -> PairProbabilityMatrix:
    """Team-level matrix from class-pair co-occurrence weights summed over outcomes."""
    cls = comp.cls.tolist()
    size = Counter(cls)
    n = len(instance.teams)
    exact = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            if i == j or cls[i] == cls[j]:
                exact[i, j] = Fraction(0)
                continue
            a, b = cls[i], cls[j]
            w = weights.get((min(a, b), max(a, b)), 0)
            exact[i, j] = Fraction(w) / (total * size[a] * size[b])
    p = np.array([[float(x) for x in row] for row in exact])
    provenance = {"kind": kind, "instance": instance.name}
    provenance.update(extra or {})
    return PairProbabilityMatrix(tuple(t.id for t in instance.teams), p, provenance, exact)


def _classes(comp, symmetry: bool):
    if symmetry:
        return comp.cls.tolist()
    return list(range(comp.n_teams))


# -- uniform --------------------------------------------------------------------


@dataclass
class UniformEnumeration:
    matrix: PairProbabilityMatrix
    n_valid: int
    n_classes_visited: int


def enumerate_uniform(
    instance: Instance,
    labelling="ex-ante",
    ceiling: int = DEFAULT_CEILING,
    symmetry: bool = True,
    details: bool = False,
):
    """Exact uniform pair probabilities by enumerating every valid assignment.

    Parameters
    ----------
    ceiling : int
        Refuse when the unconstrained class-level space is larger.
    symmetry : bool
        Enumerate interchangeable-team classes with multiplicities (default)
        instead of individual teams. Results are identical.
    details : bool
        Also return the number of valid team-level assignments.
    """
    labelling = Labelling.parse(labelling)
    comp = _engine.compile_instance(instance, labelling)
    cls = _classes(comp, symmetry)
    tdata = comp.tdata.tolist()
    gdata = comp.gdata.tolist()
    opp = comp.opp.tolist()
    umin, umax, P, K = comp.par.tolist()
    G = comp.n_groups
    # the cells to fill: (pot, group) for every slot not held by a fixed team
    fixed = {}
    for i, row in enumerate(tdata):
        if row[3] >= 0:
            fixed[(row[0], row[3])] = i
    by_pot: list = [dict() for _ in range(P)]
    rep: dict = {}
    for i, row in enumerate(tdata):
        if row[3] < 0:
            by_pot[row[0]][cls[i]] = by_pot[row[0]].get(cls[i], 0) + 1
            rep.setdefault(cls[i], i)
    space = 1
    for counts in by_pot:
        space *= math.factorial(sum(counts.values())) // math.prod(math.factorial(c) for c in counts.values())
    if space > ceiling:
        raise EnumerationRefused(space, ceiling, "class-level assignment space")

    cells = [(p, g) for p in range(P) for g in range(G) if (p, g) not in fixed]
    grid = [[-1] * P for _ in range(G)]  # team index placed in (g, p): a representative
    nonu = [0] * G
    nu = [0] * G
    top_at = [-1] * K
    members = [[] for _ in range(G)]  # class ids per group

    def place(i, g, c):
        nonu[g] |= tdata[i][1]
        nu[g] += tdata[i][2]
        members[g].append(c)
        if tdata[i][4] >= 0:
            top_at[tdata[i][4]] = g

    def unplace(i, g):
        nonu[g] &= ~tdata[i][1]
        nu[g] -= tdata[i][2]
        members[g].pop()
        if tdata[i][4] >= 0:
            top_at[tdata[i][4]] = -1

    def legal(i, g):
        row = tdata[i]
        if nonu[g] & row[1]:
            return False
        if row[2] and nu[g] >= umax:
            return False
        s = row[4]
        if s >= 0:
            for t in range(K):
                h = top_at[t]
                if t == s or h < 0:
                    continue
                if gdata[h][0] == gdata[g][0] or (opp[s][t] and gdata[h][1] == gdata[g][1]):
                    return False
        return True

    for (p, g), i in fixed.items():
        if not legal(i, g):
            raise ValueError("fixed teams already break a rule")
        place(i, g, cls[i])

    weights: Counter = Counter()
    n_valid = 0
    visited = 0

    def rec(k, w):
        nonlocal n_valid, visited
        if k == len(cells):
            if min(nu) < umin:
                return
            visited += 1
            n_valid += w
            for g in range(G):
                ms = members[g]
                for x in range(len(ms)):
                    for y in range(x + 1, len(ms)):
                        a, b = ms[x], ms[y]
                        weights[(min(a, b), max(a, b))] += w
            return
        p, g = cells[k]
        pool = by_pot[p]
        for c in sorted(pool):
            cnt = pool[c]
            if cnt == 0:
                continue
            i = rep[c]
            if not legal(i, g):
                continue
            pool[c] = cnt - 1
            place(i, g, c)
            # completing a group below the UEFA minimum is a dead end
            if not (p == P - 1 and nu[g] < umin):
                rec(k + 1, w * cnt)
            unplace(i, g)
            pool[c] = cnt

    rec(0, 1)
    if n_valid == 0:
        raise ValueError(f"{instance.name} has no valid assignment under {labelling.value}")
    # weights hold ordered-team counts: w counts team-level assignments, and the
    # class pair (a, b) co-occurrence sums over those assignments
    matrix = _from_class_weights(
        instance, comp, _scale_weights(weights, symmetry, comp), n_valid, "ExactUniform",
        {"labelling": labelling.value, "symmetry": symmetry},
    )
    if details:
        return UniformEnumeration(matrix, n_valid, visited)
    return matrix


def _scale_weights(weights, symmetry, comp):
    if symmetry:
        return weights
    # team-level classes: map back to the real classes for the exchangeable formula
    cls = comp.cls.tolist()
    out: Counter = Counter()
    for (a, b), w in weights.items():
        x, y = cls[a], cls[b]
        out[(min(x, y), max(x, y))] += w
    return out


# -- Skip mechanism -------------------------------------------------------------------


def _class_grid_assign(instance, cls, grid):
    """A team-level assignment realizing a class-level grid (lowest team index first)."""
    members: dict = {}
    for i, c in enumerate(cls):
        members.setdefault(c, []).append(i)
    used = Counter()
    assign = np.full(len(cls), -1, dtype=np.int64)
    for g, row in enumerate(grid):
        for c in row:
            if c >= 0:
                assign[members[c][used[c]]] = g
                used[c] += 1
    return assign


def enumerate_skip(instance: Instance, procedure, ceiling: int = DEFAULT_CEILING) -> PairProbabilityMatrix:
    """Exact pair probabilities of the Skip mechanism over all draw orders.

    Every within-pot draw order is equally likely. Histories that reach the
    same class-level grid are merged and their probabilities added.
    """
    from .draw import Procedure

    if not isinstance(procedure, Procedure):
        procedure = Procedure.parse(procedure)
    labelling = procedure.labelling
    comp = _engine.compile_instance(instance, labelling)
    cls = comp.cls.tolist()
    tdata = comp.tdata.tolist()
    P, G = comp.par[2], comp.n_groups
    drawable = [Counter() for _ in range(P)]
    grid0 = [[-1] * P for _ in range(G)]
    for i, row in enumerate(tdata):
        if row[3] >= 0:
            grid0[row[3]][row[0]] = cls[i]
        else:
            drawable[row[0]][cls[i]] += 1
    orders = 1
    for counts in drawable:
        orders *= math.factorial(sum(counts.values())) // math.prod(math.factorial(c) for c in counts.values())
    if orders > ceiling:
        raise EnumerationRefused(orders, ceiling, "class-level draw-order space")

    def key(grid):
        return tuple(tuple(r) for r in grid)

    start = key(grid0)
    status, _, _ = _engine.search(_class_grid_assign(instance, cls, start), comp)
    if status != _engine.FEASIBLE:
        raise ValueError(f"{instance.name} has no valid assignment under {labelling.value}")
    states = {start: Fraction(1)}
    for pot in procedure.pot_order:
        p = pot - 1
        for _ in range(sum(drawable[p].values())):
            nxt: dict = {}
            for grid, mass in states.items():
                placed = Counter(row[p] for row in grid if row[p] >= 0)
                left = {c: n - placed[c] for c, n in drawable[p].items() if n - placed[c] > 0}
                total = sum(left.values())
                for c, r in sorted(left.items()):
                    new = _skip_class(instance, comp, cls, grid, p, c)
                    nxt[new] = nxt.get(new, Fraction(0)) + mass * Fraction(r, total)
            states = nxt
    weights: Counter = Counter()
    for grid, mass in states.items():
        for row in grid:
            for x in range(P):
                for y in range(x + 1, P):
                    a, b = row[x], row[y]
                    weights[(min(a, b), max(a, b))] += mass
    return _from_class_weights(
        instance, comp, weights, 1, "ExactSkip",
        {"procedure": procedure.name, "labelling": labelling.value, "states": len(states)},
    )


def _skip_class(instance, comp, cls, grid, p, c):
    """Grid after seating one team of class ``c`` (pot index ``p``) by the Skip rule."""
    for g in range(comp.n_groups):
        if grid[g][p] >= 0:
            continue
        trial = [list(r) for r in grid]
        trial[g][p] = c
        trial = tuple(tuple(r) for r in trial)
        status, _, _ = _engine.search(_class_grid_assign(instance, cls, trial), comp)
        if status == _engine.FEASIBLE:
            return trial
    raise RuntimeError("no group can take the drawn team")


# -- sampled matrices ----------------------------------------------------------------


def pair_matrix_from_counts(instance: Instance, counts: np.ndarray, n_samples: int, provenance=None) -> PairProbabilityMatrix:
    if n_samples < 1:
        raise ValueError("need at least one sample")
    counts = np.asarray(counts)
    p = counts / n_samples
    prov = {"kind": "MonteCarlo", "instance": instance.name, "samples": int(n_samples)}
    prov.update(provenance or {})
    return PairProbabilityMatrix(tuple(t.id for t in instance.teams), p, prov)


def co_membership_counts(instance: Instance, assignments: np.ndarray) -> np.ndarray:
    """Symmetric count matrix of how often each pair shares a group."""
    a = np.asarray(assignments, dtype=np.int64)
    if a.ndim != 2 or a.shape[1] != len(instance.teams):
        raise ValueError("assignments must be (n_samples, n_teams)")
    onehot = np.zeros((a.shape[0], a.shape[1], instance.n_groups), dtype=np.int32)
    rows = np.arange(a.shape[0])[:, None]
    cols = np.arange(a.shape[1])[None, :]
    onehot[rows, cols, a] = 1
    flat = onehot.reshape(a.shape[0], -1)
    counts = np.zeros((a.shape[1], a.shape[1]), dtype=np.int64)
    for s in range(0, a.shape[0], 4096):
        block = onehot[s : s + 4096].astype(np.float64)
        counts += np.rint(np.einsum("sig,sjg->ij", block, block)).astype(np.int64)
    np.fill_diagonal(counts, 0)
    return counts


def pair_matrix_from_samples(instance: Instance, samples: Iterable, seed=None, procedure=None) -> PairProbabilityMatrix:
    """Empirical same-group frequencies over full assignments.

    ``samples`` may be an iterable of :class:`DrawState` or an
    ``(n_samples, n_teams)`` array of group indices.
    """
    if isinstance(samples, np.ndarray):
        arr = samples
    else:
        arr = np.array([s.to_array() if isinstance(s, DrawState) else np.asarray(s) for s in samples])
    if arr.size == 0 or arr.shape[0] == 0:
        raise ValueError("sample stream is empty")
    if (arr < 0).any():
        raise ValueError("samples must be complete assignments")
    prov = {"seed": seed, "procedure": None if procedure is None else str(procedure)}
    return pair_matrix_from_counts(instance, co_membership_counts(instance, arr), arr.shape[0], prov)
