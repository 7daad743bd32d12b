"""Counting valid assignments group by group, and exact uniform sampling.

Fix one "anchor" pot. Each group holds exactly one anchor team, so once the
anchor pot is arranged, the groups differ only by their anchor team's class.
With the groups sorted by that class, a dynamic program over the remaining
class counts of the other pots counts (and samples) the completions. Every
arrangement of the anchor pot has the same number of completions, because
permuting groups maps completions onto completions.

Rules that depend on group labels (seats, bracket) are allowed only for
anchor-pot teams. Then every unlabelled composition admits the same number of
valid labellings, so the uniform distribution over labelled draws is the
uniform distribution over compositions with a uniformly random valid
labelling, and pair probabilities do not depend on the labelling policy.
"""
from __future__ import annotations

import gc
import itertools
import math
import random
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np

from . import _engine
from .model import DrawState, Instance, Labelling


class CountingUnsupported(ValueError):
    """The instance has label-dependent rules outside a single pot."""


def _anchor_pot(instance: Instance) -> int:
    """Zero-based pot holding every team with a label-dependent rule (pot 1 if none)."""
    td = _engine.compile_instance(instance, Labelling.EX_ANTE).tdata
    pots = {int(td[i, 0]) for i in range(td.shape[0]) if td[i, 3] >= 0 or td[i, 4] >= 0}
    if len(pots) > 1:
        raise CountingUnsupported("label-dependent rules span more than one pot")
    return pots.pop() if pots else 0


_tables: dict = {}


class GroupCounter:
    """Exact count of valid assignments and exact uniform sampling.

    Parameters
    ----------
    instance : Instance
    labelling : {"ex-ante", "ex-post"}
    """

    def __init__(self, instance: Instance, labelling="ex-ante"):
        self.instance = instance
        self.labelling = Labelling.parse(labelling)
        self.comp = _engine.compile_instance(instance, self.labelling)
        self.anchor = _anchor_pot(instance)
        # the table ignores label rules, so both policies share it
        free = _engine.compile_instance(instance, Labelling.EX_POST)
        self.dp_comp = free
        td = free.tdata
        cls = free.cls.tolist()
        self.cls = cls
        self.P, self.G = int(free.par[2]), free.n_groups
        self.umin, self.umax = int(free.par[0]), int(free.par[1])
        self.class_teams: dict = defaultdict(list)
        for i, c in enumerate(cls):
            self.class_teams[c].append(i)
        self.info = {c: (int(td[ts[0], 1]), int(td[ts[0], 2]), int(td[ts[0], 0])) for c, ts in self.class_teams.items()}
        # anchor class for each group position, positions sorted by class
        self.anchor_seq = sorted(cls[i] for i in range(len(cls)) if td[i, 0] == self.anchor)
        self.free = sorted(c for c, (_, _, p) in self.info.items() if p != self.anchor)
        self.stride = {}
        base = 1
        for c in self.free:
            self.stride[c] = base
            base *= len(self.class_teams[c]) + 1
        self.start = sum(len(self.class_teams[c]) * self.stride[c] for c in self.free)
        self._combos = {a: self._combos_for(a) for a in set(self.anchor_seq)}
        shared = _tables.get(id(instance))
        if shared is not None and shared[0] is instance and shared[1] == self.anchor:
            self._radix, self._back, self.completions, self._weights = shared[2]
        else:
            # the table is millions of big ints and no cycles; skip collector passes
            paused = gc.isenabled()
            gc.disable()
            try:
                self._run()
            finally:
                if paused:
                    gc.enable()
            _tables[id(instance)] = (instance, self.anchor, (self._radix, self._back, self.completions, self._weights))

    # -- setup -------------------------------------------------------------------
    def _combos_for(self, a: int) -> list:
        mask_a, u_a, _ = self.info[a]
        per_pot = [[c for c in self.free if self.info[c][2] == p] for p in range(self.P) if p != self.anchor]
        out = []
        for combo in itertools.product(*per_pot):
            mask, u, ok = mask_a, u_a, True
            for c in combo:
                m, uu, _ = self.info[c]
                if mask & m:
                    ok = False
                    break
                mask |= m
                u += uu
            if ok and self.umin <= u <= self.umax:
                out.append((sum(self.stride[c] for c in combo), combo))
        return out

    def _moves(self, k: int, s: int):
        """Yield (next state, number of team choices, combo index) for group position k."""
        for j, (delta, combo) in enumerate(self._combos[self.anchor_seq[k]]):
            w = 1
            for c in combo:
                d = (s // self.stride[c]) % self._radix[c]
                if d == 0:
                    w = 0
                    break
                w *= d
            if w:
                yield s - delta, w, j

    def _run(self) -> None:
        G = self.G
        self._radix = {c: len(self.class_teams[c]) + 1 for c in self.free}
        fwd = [dict() for _ in range(G + 1)]
        fwd[0][self.start] = 1
        for k in range(G):
            nxt = fwd[k + 1]
            for s, f in fwd[k].items():
                for s2, w, _ in self._moves(k, s):
                    nxt[s2] = nxt.get(s2, 0) + f * w
        back = [dict() for _ in range(G + 1)]
        back[G] = {s: 1 for s in fwd[G]}
        weights: Counter = Counter()
        for k in range(G - 1, -1, -1):
            a = self.anchor_seq[k]
            combos = self._combos[a]
            mass = [0] * len(combos)
            bk = back[k]
            b_next = back[k + 1]
            for s, f in fwd[k].items():
                total = 0
                for s2, w, j in self._moves(k, s):
                    b = b_next.get(s2, 0)
                    if b:
                        total += w * b
                        mass[j] += f * w * b
                if total:
                    bk[s] = total
            for j, (_, combo) in enumerate(combos):
                if not mass[j]:
                    continue
                members = (a,) + combo
                for x in range(len(members)):
                    for y in range(x + 1, len(members)):
                        p, q = members[x], members[y]
                        weights[(min(p, q), max(p, q))] += mass[j]
        self._back = back
        self.completions = back[0].get(self.start, 0)
        self._weights = weights

    # -- results -------------------------------------------------------------------
    def anchor_arrangements(self) -> int:
        """Valid arrangements of the anchor pot on its own (team level, labelled)."""
        if self.labelling is Labelling.EX_POST or not self._label_rules():
            return math.factorial(self.G)
        return _count_anchor(self)

    def _label_rules(self) -> bool:
        td = self.comp.tdata
        return bool(((td[:, 3] >= 0) | (td[:, 4] >= 0)).any())

    @property
    def n_valid(self) -> int:
        """Number of valid labelled team-level assignments."""
        return self.anchor_arrangements() * self.completions

    def acceptance_probability(self) -> Fraction:
        """Chance that one unconstrained draw (as proposed by the rejection sampler) is valid."""
        return Fraction(self.n_valid, self.instance.uniform_space_size(self.labelling))

    def pair_matrix(self):
        """Exact uniform same-group probabilities."""
        from .exact import _from_class_weights

        if self.completions == 0:
            raise ValueError(f"{self.instance.name} has no valid assignment")
        return _from_class_weights(
            self.instance, self.dp_comp, self._weights, self.completions, "ExactUniform",
            {"labelling": self.labelling.value, "method": "group-dp"},
        )

    # -- sampling ----------------------------------------------------------------------
    def sample(self, rng: random.Random) -> np.ndarray:
        """One exactly uniform valid assignment (group index per team)."""
        if self.completions == 0:
            raise ValueError(f"{self.instance.name} has no valid assignment")
        n = len(self.cls)
        assign = np.full(n, -1, dtype=np.int64)
        anchor_groups = self._sample_anchor(rng, assign)
        # sorted positions -> groups, ties in group order
        order = sorted(range(self.G), key=lambda g: (anchor_groups[g], g))
        chosen: dict = defaultdict(list)
        s = self.start
        for k in range(self.G):
            target = rng.randrange(self._back[k][s])
            for s2, w, j in self._moves(k, s):
                mass = w * self._back[k + 1].get(s2, 0)
                if target < mass:
                    break
                target -= mass
            combo = self._combos[self.anchor_seq[k]][j][1]
            g = order[k]
            for c in combo:
                chosen[c].append(g)
            s = s2
        for c, groups in chosen.items():
            teams = list(self.class_teams[c])
            rng.shuffle(teams)
            for t, g in zip(teams, groups):
                assign[t] = g
        return assign

    def _sample_anchor(self, rng: random.Random, assign: np.ndarray) -> list:
        """Place the anchor pot uniformly among its valid arrangements; return class per group."""
        td = self.comp.tdata
        anchor = [i for i in range(len(self.cls)) if td[i, 0] == self.anchor]
        fixed = [i for i in anchor if td[i, 3] >= 0]
        movers = [i for i in anchor if td[i, 3] < 0]
        free_groups = sorted(set(range(self.G)) - {int(td[i, 3]) for i in fixed})
        while True:
            rng.shuffle(free_groups)
            trial = assign.copy()
            for i in fixed:
                trial[i] = td[i, 3]
            for i, g in zip(movers, free_groups):
                trial[i] = g
            if _anchor_ok(self, trial, anchor):
                assign[:] = trial
                break
        by_group = [0] * self.G
        for i in anchor:
            by_group[assign[i]] = self.cls[i]
        return by_group

    def sample_many(self, n: int, seed: int) -> np.ndarray:
        """``n`` independent uniform assignments from a seeded stream."""
        state = np.random.SeedSequence([int(seed), 0x554E49]).generate_state(4)
        rng = random.Random(int.from_bytes(state.tobytes(), "little"))
        return np.array([self.sample(rng) for _ in range(n)], dtype=np.int64).reshape(n, len(self.cls))


def _anchor_ok(counter: GroupCounter, assign: np.ndarray, anchor: list) -> bool:
    comp = counter.comp
    ok, *_ = _engine._build_state(assign, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups)
    return bool(ok)


def _count_anchor(counter: GroupCounter) -> int:
    """Team-level count of valid anchor-pot arrangements (seats and bracket)."""
    td = counter.comp.tdata
    anchor = [i for i in range(len(counter.cls)) if td[i, 0] == counter.anchor]
    fixed = {i: int(td[i, 3]) for i in anchor if td[i, 3] >= 0}
    movers = [i for i in anchor if i not in fixed]
    free_groups = sorted(set(range(counter.G)) - set(fixed.values()))
    special = [i for i in movers if td[i, 4] >= 0]
    plain = len(movers) - len(special)
    base = np.full(len(counter.cls), -1, dtype=np.int64)
    for i, g in fixed.items():
        base[i] = g
    count = 0
    # only top seeds constrain each other; the rest fill the leftover groups freely
    for groups in itertools.permutations(free_groups, len(special)):
        trial = base.copy()
        for i, g in zip(special, groups):
            trial[i] = g
        if _anchor_ok(counter, trial, anchor):
            count += 1
    return count * math.factorial(plain)


_cache: dict = {}


def group_counter(instance: Instance, labelling="ex-ante") -> GroupCounter:
    """Cached :class:`GroupCounter` (building one for wc2026 takes a while)."""
    key = (id(instance), Labelling.parse(labelling))
    hit = _cache.get(key)
    if hit is None or hit.instance is not instance:
        hit = GroupCounter(instance, labelling)
        _cache[key] = hit
    return hit


def sample_uniform_exact(instance: Instance, labelling="ex-ante", n: int = 1, seed: int = 0) -> list:
    """``n`` exactly uniform valid draws as :class:`DrawState` objects."""
    arr = group_counter(instance, labelling).sample_many(n, seed)
    return [DrawState.from_array(instance, row) for row in arr]
