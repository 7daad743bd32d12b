"""Compiled kernels behind the feasibility oracle and the samplers.

An instance is lowered to flat integer arrays once per labelling policy:

``tdata[i]``  = (pot, non-UEFA tag mask, is-UEFA, fixed group or -1, top-seed index or -1)
``gdata[g]``  = (quarter or -1, pathway or -1)
``opp[s, t]`` = 1 if top seeds s and t must sit in opposite pathways
``par``       = (uefa_min, uefa_max, n_pots, n_top_seeds)

Group state is kept as bit masks: filled pots, non-UEFA tags present, UEFA count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Instance, Labelling

FEASIBLE = 0
INFEASIBLE = 1
EXHAUSTED = 2

_NO_BUDGET = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Compiled:
    tdata: np.ndarray
    gdata: np.ndarray
    opp: np.ndarray
    par: np.ndarray
    labelling: Labelling
    cls: np.ndarray
    n_classes: int
    memo: "Memo"

    @property
    def n_teams(self) -> int:
        return self.tdata.shape[0]

    @property
    def n_groups(self) -> int:
        return self.gdata.shape[0]


def compile_instance(instance: Instance, labelling="ex-ante") -> Compiled:
    labelling = Labelling.parse(labelling)
    cache = instance.__dict__.setdefault("_compiled", {})
    if labelling in cache:
        return cache[labelling]
    ante = labelling is Labelling.EX_ANTE
    n, G = len(instance.teams), instance.n_groups
    if G > 62:
        raise ValueError("at most 62 groups are supported")
    b = instance.bracket if ante else None
    tops = sorted(b.top_seeds, key=instance.team_index.get) if b is not None else []
    top_index = {t: k for k, t in enumerate(tops)}
    tdata = np.full((n, 5), -1, dtype=np.int64)
    for i, t in enumerate(instance.teams):
        tdata[i, 0] = t.pot - 1
        tdata[i, 1] = t.non_uefa_mask
        tdata[i, 2] = int(t.is_uefa)
        if ante and t.pre_assigned_group is not None:
            tdata[i, 3] = instance.group_index[t.pre_assigned_group]
        tdata[i, 4] = top_index.get(t.id, -1)
    gdata = np.full((G, 2), -1, dtype=np.int64)
    if b is not None:
        for g, label in enumerate(instance.group_labels):
            gdata[g, 0] = b.quarter_of(label)
            gdata[g, 1] = b.pathway_of(label)
    K = len(tops)
    opp = np.zeros((max(K, 1), max(K, 1)), dtype=np.int64)
    if b is not None:
        for pair in b.opposite_pairs:
            s, t = (top_index[x] for x in pair)
            opp[s, t] = opp[t, s] = 1
    par = np.array([instance.uefa_min, instance.uefa_max, instance.n_pots, K], dtype=np.int64)
    # Teams with identical rows are interchangeable for every rule.
    rows: dict = {}
    cls = np.array([rows.setdefault(tuple(r), len(rows)) for r in tdata.tolist()], dtype=np.int64)
    for arr in (tdata, gdata, opp, par, cls):
        arr.setflags(write=False)
    comp = Compiled(tdata, gdata, opp, par, labelling, cls, len(rows), Memo.empty(G, len(rows), n))
    cache[labelling] = comp
    return comp


# -- state primitives ------------------------------------------------------------


@njit(cache=True, _nrt=False)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True, _nrt=False)
def _legal(i, g, tdata, gdata, opp, par, potmask, gnon, guefa, top_pos, res):
    p = tdata[i, 0]
    if (potmask[g] >> p) & 1:
        return False
    if gnon[g] & tdata[i, 1]:
        return False
    if tdata[i, 2] == 1 and guefa[g] >= par[1]:
        return False
    f = tdata[i, 3]
    if f >= 0:
        if f != g:
            return False
    elif (res[g] >> p) & 1:
        return False
    t = tdata[i, 4]
    if t >= 0:
        q = gdata[g, 0]
        for s in range(par[3]):
            h = top_pos[s]
            if s == t or h < 0:
                continue
            if gdata[h, 0] == q:
                return False
            if opp[t, s] == 1 and gdata[h, 1] == gdata[g, 1]:
                return False
    return True


@njit(cache=True, _nrt=False)
def _place(i, g, tdata, assign, potmask, gnon, guefa, top_pos):
    assign[i] = g
    potmask[g] |= 1 << tdata[i, 0]
    gnon[g] |= tdata[i, 1]
    guefa[g] += tdata[i, 2]
    if tdata[i, 4] >= 0:
        top_pos[tdata[i, 4]] = g


@njit(cache=True, _nrt=False)
def _unplace(i, tdata, assign, potmask, gnon, guefa, top_pos):
    g = assign[i]
    assign[i] = -1
    potmask[g] &= ~(1 << tdata[i, 0])
    gnon[g] &= ~tdata[i, 1]
    guefa[g] -= tdata[i, 2]
    if tdata[i, 4] >= 0:
        top_pos[tdata[i, 4]] = -1


@njit(cache=True)
def _build_state(assign, tdata, gdata, opp, par, G):
    """Group arrays for ``assign``; ok=False if the placed teams already break a rule."""
    n = tdata.shape[0]
    K = opp.shape[0]
    potmask = np.zeros(G, dtype=np.int64)
    gnon = np.zeros(G, dtype=np.int64)
    guefa = np.zeros(G, dtype=np.int64)
    top_pos = np.full(K, -1, dtype=np.int64)
    res = np.zeros(G, dtype=np.int64)
    ok = True
    for i in range(n):
        g = assign[i]
        if g < 0:
            f = tdata[i, 3]
            if f >= 0:
                res[f] |= 1 << tdata[i, 0]
            continue
        p = tdata[i, 0]
        if (potmask[g] >> p) & 1 or gnon[g] & tdata[i, 1]:
            ok = False
        if tdata[i, 3] >= 0 and tdata[i, 3] != g:
            ok = False
        potmask[g] |= 1 << p
        gnon[g] |= tdata[i, 1]
        guefa[g] += tdata[i, 2]
        if tdata[i, 4] >= 0:
            top_pos[tdata[i, 4]] = g
    for g in range(G):
        if guefa[g] > par[1]:
            ok = False
        if res[g] & potmask[g]:
            ok = False
    for s in range(par[3]):
        for t in range(s + 1, par[3]):
            a, b = top_pos[s], top_pos[t]
            if a < 0 or b < 0:
                continue
            if gdata[a, 0] == gdata[b, 0]:
                ok = False
            if opp[s, t] == 1 and gdata[a, 1] == gdata[b, 1]:
                ok = False
    return ok, potmask, gnon, guefa, top_pos, res


@njit(cache=True)
def _full_valid(assign, tdata, gdata, opp, par, G):
    """True iff ``assign`` is a complete assignment satisfying every active rule."""
    ok, potmask, gnon, guefa, top_pos, res = _build_state(assign, tdata, gdata, opp, par, G)
    if not ok:
        return False
    full = (1 << par[2]) - 1
    for g in range(G):
        if potmask[g] != full or guefa[g] < par[0]:
            return False
    return True


# -- exact completion search ---------------------------------------------------------


@njit(cache=True)
def _evaluate(tdata, gdata, opp, par, assign, potmask, gnon, guefa, top_pos, res, G):
    """Prune the node or pick the next team to branch on (fewest legal groups).

    Returns (-2 if every team is placed, -1 if the node is dead, else team index).
    """
    n = tdata.shape[0]
    n_pots = par[2]
    cov = np.zeros(G, dtype=np.int64)
    ucov = np.zeros(G, dtype=np.int64)
    uefa_left = np.zeros(n_pots, dtype=np.int64)
    best = -1
    best_cnt = G + 1
    n_left = 0
    n_uefa_left = 0
    for i in range(n):
        if assign[i] >= 0:
            continue
        n_left += 1
        p = tdata[i, 0]
        cnt = 0
        for g in range(G):
            if _legal(i, g, tdata, gdata, opp, par, potmask, gnon, guefa, top_pos, res):
                cnt += 1
                cov[g] |= 1 << p
                if tdata[i, 2] == 1:
                    ucov[g] |= 1 << p
        if cnt == 0:
            return -1
        if tdata[i, 2] == 1:
            n_uefa_left += 1
            uefa_left[p] += 1
        if cnt < best_cnt:
            best_cnt = cnt
            best = i
    if n_left == 0:
        for g in range(G):
            if guefa[g] < par[0]:
                return -1
        return -2
    full = (1 << n_pots) - 1
    need_total = 0
    forced = np.zeros(n_pots, dtype=np.int64)
    for g in range(G):
        if cov[g] != (full & ~potmask[g]):
            return -1
        need = par[0] - guefa[g]
        if need > 0:
            avail = _popcount(ucov[g])
            if avail < need:
                return -1
            need_total += need
            if avail == need:
                for p in range(n_pots):
                    if (ucov[g] >> p) & 1:
                        forced[p] += 1
    if need_total > n_uefa_left:
        return -1
    for p in range(n_pots):
        if forced[p] > uefa_left[p]:
            return -1
    return best


class Memo:
    """Exact table of residual problems already proven to have no completion.

    Keys are canonical signatures (see ``_signature``) compared in full, so a
    hit is never a false positive. The table is bounded; when a probe run is
    full the key's home slot is overwritten, which only forgets a result.
    """

    SLOTS = 1 << 16
    MIN_SLOTS = 1 << 10
    PROBE = 8

    def __init__(self, keys: np.ndarray, used: np.ndarray):
        self.keys = keys
        self.used = used

    @classmethod
    def empty(cls, n_groups: int, n_classes: int, n_teams: int = 0) -> "Memo":
        width = n_groups + (n_classes + 7) // 8 + 1
        # small instances have few residual problems; keep their tables small
        slots = min(cls.SLOTS, max(cls.MIN_SLOTS, 1 << (2 * max(1, n_teams - 1).bit_length() + 4)))
        return cls(np.zeros((slots, width), dtype=np.int64), np.zeros(slots, dtype=np.int64))

    def clear(self) -> None:
        self.used[:] = 0

    def __len__(self) -> int:
        return int(np.count_nonzero(self.used))


@njit(cache=True, _nrt=False)
def _signature(assign, cls, n_classes, tdata, gdata, par, potmask, gnon, guefa, top_pos, res, G, out):
    """Canonical description of the residual problem.

    Sorted group profiles (filled pots, tags, UEFA count, reserved pots; the
    quarter while top seeds are unplaced; the group itself if it is reserved),
    remaining team counts per interchangeability class, and the quarters of the
    placed top seeds.
    """
    n = tdata.shape[0]
    K = par[3]
    tops_left = False
    for i in range(n):
        if assign[i] < 0 and tdata[i, 4] >= 0:
            tops_left = True
            break
    for g in range(G):
        v = potmask[g] | (gnon[g] << 8) | (guefa[g] << 16) | (res[g] << 24)
        if tops_left:
            v |= (gdata[g, 0] + 1) << 40
        if res[g] != 0:
            v |= (g + 1) << 44
        out[g] = v
    # insertion sort: G is small
    for a in range(1, G):
        v = out[a]
        b = a - 1
        while b >= 0 and out[b] > v:
            out[b + 1] = out[b]
            b -= 1
        out[b + 1] = v
    n_words = (n_classes + 7) // 8
    for w in range(n_words + 1):
        out[G + w] = 0
    for i in range(n):
        if assign[i] < 0:
            c = cls[i]
            out[G + c // 8] += 1 << (8 * (c % 8))
    t = 0
    if tops_left:
        for s in range(K):
            h = top_pos[s]
            q = gdata[h, 0] + 1 if h >= 0 else 0
            t |= q << (4 * s)
        t |= 1 << 62
    out[G + n_words] = t


@njit(cache=True, _nrt=False)
def _hash(key):
    h = np.uint64(1469598103934665603)
    for v in key:
        h ^= np.uint64(v & 0x7FFFFFFFFFFFFFFF)
        h *= np.uint64(1099511628211)
        h ^= h >> np.uint64(29)
    return h


@njit(cache=True, _nrt=False)
def _memo_find(key, mkeys, mused):
    slots = mkeys.shape[0]
    h = np.int64(_hash(key) % np.uint64(slots))
    for k in range(8):
        s = (h + k) % slots
        if mused[s] == 0:
            return False
        same = True
        for j in range(key.shape[0]):
            if mkeys[s, j] != key[j]:
                same = False
                break
        if same:
            return True
    return False


@njit(cache=True, _nrt=False)
def _memo_add(key, mkeys, mused):
    slots = mkeys.shape[0]
    h = np.int64(_hash(key) % np.uint64(slots))
    target = h
    for k in range(8):
        s = (h + k) % slots
        if mused[s] == 0:
            target = s
            break
    for j in range(key.shape[0]):
        mkeys[target, j] = key[j]
    mused[target] = 1


@njit(cache=True)
def _search(assign0, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, budget, witness):
    """Depth-first completion search with forward checking.

    Branches on the team with the fewest legal groups; groups indistinguishable
    for the remaining problem are tried once per node, and residual problems in
    the memo are known dead. Returns (status, node expansions); on FEASIBLE
    ``witness`` holds a complete valid assignment.
    """
    n = tdata.shape[0]
    assign = assign0.copy()
    ok, potmask, gnon, guefa, top_pos, res = _build_state(assign, tdata, gdata, opp, par, G)
    if not ok:
        return INFEASIBLE, 0
    depth_max = 0
    for i in range(n):
        if assign[i] < 0:
            depth_max += 1
    width = mkeys.shape[1]
    use_memo = mkeys.shape[0] > 0
    team_at = np.full(depth_max + 1, -1, dtype=np.int64)
    cand = np.zeros((depth_max + 1, G), dtype=np.int64)
    ncand = np.zeros(depth_max + 1, dtype=np.int64)
    idx = np.zeros(depth_max + 1, dtype=np.int64)
    placed = np.zeros(depth_max + 1, dtype=np.bool_)
    record = np.zeros(depth_max + 1, dtype=np.bool_)
    sig = np.zeros((depth_max + 1, width), dtype=np.int64)
    keys = np.zeros((G, 5), dtype=np.int64)
    steps = 0

    d = 0
    expand = True
    while d >= 0:
        if expand:
            expand = False
            ncand[d] = 0
            idx[d] = 0
            placed[d] = False
            record[d] = False
            sel = _evaluate(tdata, gdata, opp, par, assign, potmask, gnon, guefa, top_pos, res, G)
            if sel == -2:
                witness[:] = assign
                return FEASIBLE, steps
            if sel >= 0 and use_memo:
                _signature(assign, cls, n_classes, tdata, gdata, par, potmask, gnon, guefa, top_pos, res, G, sig[d])
                if _memo_find(sig[d], mkeys, mused):
                    sel = -1
                else:
                    record[d] = True
            if sel >= 0:
                team_at[d] = sel
                tops_left = False
                if par[3] > 0:
                    for i in range(n):
                        if assign[i] < 0 and tdata[i, 4] >= 0:
                            tops_left = True
                            break
                m = 0
                for g in range(G):
                    if not _legal(sel, g, tdata, gdata, opp, par, potmask, gnon, guefa, top_pos, res):
                        continue
                    k0 = potmask[g]
                    k1 = gnon[g]
                    k2 = guefa[g]
                    k3 = res[g]
                    k4 = gdata[g, 0] if tops_left else -1
                    dup = False
                    if k3 == 0:
                        for c in range(m):
                            if (keys[c, 0] == k0 and keys[c, 1] == k1 and keys[c, 2] == k2
                                    and keys[c, 3] == 0 and keys[c, 4] == k4):
                                dup = True
                                break
                    if dup:
                        continue
                    keys[m, 0] = k0
                    keys[m, 1] = k1
                    keys[m, 2] = k2
                    keys[m, 3] = k3
                    keys[m, 4] = k4
                    cand[d, m] = g
                    m += 1
                ncand[d] = m
        if placed[d]:
            _unplace(team_at[d], tdata, assign, potmask, gnon, guefa, top_pos)
            placed[d] = False
        if idx[d] < ncand[d]:
            g = cand[d, idx[d]]
            idx[d] += 1
            steps += 1
            if steps > budget:
                return EXHAUSTED, steps
            _place(team_at[d], g, tdata, assign, potmask, gnon, guefa, top_pos)
            placed[d] = True
            d += 1
            expand = True
        else:
            if record[d]:
                _memo_add(sig[d], mkeys, mused)
            d -= 1
    return INFEASIBLE, steps


def _memo_arrays(comp: Compiled, use_memo: bool = True):
    if use_memo:
        return comp.memo.keys, comp.memo.used
    return np.zeros((0, comp.memo.keys.shape[1]), dtype=np.int64), np.zeros(0, dtype=np.int64)


def search(assign0: np.ndarray, comp: Compiled, budget: int = _NO_BUDGET, use_memo: bool = True):
    """Exact completion search on a group-index array; returns (status, steps, witness)."""
    mkeys, mused = _memo_arrays(comp, use_memo)
    witness = np.full(comp.n_teams, -1, dtype=np.int64)
    status, steps = _search(
        np.ascontiguousarray(assign0, dtype=np.int64), comp.tdata, comp.gdata, comp.opp, comp.par,
        comp.n_groups, comp.cls, comp.n_classes, mkeys, mused, budget, witness,
    )
    return int(status), int(steps), witness


@njit(cache=True)
def _search_batch(assigns, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused):
    m = assigns.shape[0]
    out = np.zeros(m, dtype=np.int64)
    witness = np.full(tdata.shape[0], -1, dtype=np.int64)
    for r in range(m):
        status, _ = _search(assigns[r], tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, _NO_BUDGET, witness)
        out[r] = status
    return out


def search_batch(assigns: np.ndarray, comp: Compiled) -> np.ndarray:
    """Verdict (FEASIBLE / INFEASIBLE) per row of ``assigns``."""
    mkeys, mused = _memo_arrays(comp)
    return _search_batch(
        np.ascontiguousarray(assigns, dtype=np.int64), comp.tdata, comp.gdata, comp.opp, comp.par,
        comp.n_groups, comp.cls, comp.n_classes, mkeys, mused,
    )


# -- recursive backtracking as drawn in the flowchart ----------------------------------------


@njit(cache=True)
def backtrack(assign0, order, tdata, gdata, opp, par, G, budget):
    """Place ``order`` one team at a time, next legal group first; on a dead end
    move the previous team to its next group. Every placement attempt is a step.
    """
    assign = assign0.copy()
    ok, potmask, gnon, guefa, top_pos, res = _build_state(assign, tdata, gdata, opp, par, G)
    m = order.shape[0]
    if not ok:
        return INFEASIBLE, 0, assign
    full = (1 << par[2]) - 1
    group_of = np.full(m, -1, dtype=np.int64)
    steps = 0
    i = 0
    k = 0
    while True:
        if i == m:
            good = True
            for g in range(G):
                if guefa[g] < par[0] or potmask[g] != full:
                    good = False
            if good:
                return FEASIBLE, steps, assign
            i -= 1
            k = group_of[i] + 1
            _unplace(order[i], tdata, assign, potmask, gnon, guefa, top_pos)
            continue
        t = order[i]
        found = False
        g = k
        while g < G:
            steps += 1
            if steps > budget:
                return EXHAUSTED, steps, assign
            if _legal(t, g, tdata, gdata, opp, par, potmask, gnon, guefa, top_pos, res):
                _place(t, g, tdata, assign, potmask, gnon, guefa, top_pos)
                if potmask[g] == full and guefa[g] < par[0]:
                    _unplace(t, tdata, assign, potmask, gnon, guefa, top_pos)
                else:
                    found = True
                    break
            g += 1
        if found:
            group_of[i] = g
            i += 1
            k = 0
        else:
            if i == 0:
                return INFEASIBLE, steps, assign
            i -= 1
            k = group_of[i] + 1
            _unplace(order[i], tdata, assign, potmask, gnon, guefa, top_pos)


# -- Skip mechanism -------------------------------------------------------------------


@njit(cache=True)
def _skip_feasible(t, g, assign, witness, scratch, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused):
    """Can the state (with t already placed in g) be completed? Updates the witness.

    A completion found earlier is reused when it already puts t in g, or when
    swapping t with the witness occupant of g's slot keeps it valid.
    """
    n = tdata.shape[0]
    if witness[t] == g:
        return True, False
    p = tdata[t, 0]
    h = witness[t]
    u = -1
    for j in range(n):
        if witness[j] == g and tdata[j, 0] == p:
            u = j
            break
    if u >= 0 and assign[u] < 0 and h >= 0:
        scratch[:] = witness
        scratch[t] = g
        scratch[u] = h
        if _full_valid(scratch, tdata, gdata, opp, par, G):
            witness[:] = scratch
            return True, False
    status, _ = _search(assign, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, _NO_BUDGET, scratch)
    if status == FEASIBLE:
        witness[:] = scratch
        return True, True
    return False, True


@njit(cache=True)
def skip_sequence(assign, witness, seq, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, out_group, out_skipped):
    """Run the Skip mechanism for the teams in ``seq`` (in draw order), in place.

    ``witness`` must be a valid completion of ``assign`` on entry. Returns the
    number of teams placed (len(seq) unless the mechanism got stuck) and the
    number of completion searches run.
    """
    ok, potmask, gnon, guefa, top_pos, res = _build_state(assign, tdata, gdata, opp, par, G)
    scratch = np.empty_like(witness)
    searches = 0
    for e in range(seq.shape[0]):
        t = seq[e]
        p = tdata[t, 0]
        chosen = -1
        skipped = 0
        for g in range(G):
            if (potmask[g] >> p) & 1:
                continue
            if _legal(t, g, tdata, gdata, opp, par, potmask, gnon, guefa, top_pos, res):
                _place(t, g, tdata, assign, potmask, gnon, guefa, top_pos)
                feas, searched = _skip_feasible(
                    t, g, assign, witness, scratch, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused
                )
                searches += searched
                if feas:
                    chosen = g
                    break
                _unplace(t, tdata, assign, potmask, gnon, guefa, top_pos)
            skipped |= 1 << g
        if chosen < 0:
            return e, searches
        out_group[e] = chosen
        out_skipped[e] = skipped
    return seq.shape[0], searches


@njit(cache=True)
def skip_batch(init_assign, init_witness, seqs, tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, counts, finals):
    """Many Skip draws from one starting state; adds co-membership to ``counts``.

    ``finals`` (n_draws x n_teams, or zero rows) receives each final assignment.
    Returns the number of draws that got stuck (must be zero).
    """
    n = tdata.shape[0]
    n_draws, m = seqs.shape
    assign = np.empty(n, dtype=np.int64)
    witness = np.empty(n, dtype=np.int64)
    out_group = np.empty(m, dtype=np.int64)
    out_skipped = np.empty(m, dtype=np.int64)
    members = np.empty((G, par[2]), dtype=np.int64)
    stuck = 0
    for r in range(n_draws):
        assign[:] = init_assign
        witness[:] = init_witness
        placed, _ = skip_sequence(
            assign, witness, seqs[r], tdata, gdata, opp, par, G, cls, n_classes, mkeys, mused, out_group, out_skipped
        )
        if placed < m:
            stuck += 1
            continue
        for i in range(n):
            members[assign[i], tdata[i, 0]] = i
        for g in range(G):
            for a in range(par[2]):
                for b in range(a + 1, par[2]):
                    x = members[g, a]
                    y = members[g, b]
                    counts[x, y] += 1
                    counts[y, x] += 1
        if finals.shape[0] > 0:
            finals[r, :] = assign
    return stuck


# -- unconstrained proposals and rejection -----------------------------------------------


@njit(cache=True)
def _seed(s):
    np.random.seed(s)


@njit(cache=True)
def rejection_chunk(seed, n_proposals, max_accept, tdata, gdata, opp, par, G, pots_mask, check_min, out):
    """Propose uniform unconstrained draws (each pot an independent random
    bijection onto the groups) and keep those satisfying every active rule.

    Groups are filled one at a time and a proposal is abandoned at its first
    broken rule; accepted proposals are distributed exactly as with a full
    generate-then-check loop. Only pots in ``pots_mask`` are drawn; the UEFA
    lower bound is enforced only when ``check_min`` is set.

    With an empty ``out`` acceptances are only counted.

    Returns (accepted, proposals used).
    """
    np.random.seed(seed)
    n = tdata.shape[0]
    P = par[2]
    K = opp.shape[0]
    fixed_at = np.full((G, P), -1, dtype=np.int64)
    pool = np.zeros((P, n), dtype=np.int64)
    size = np.zeros(P, dtype=np.int64)
    for i in range(n):
        p = tdata[i, 0]
        if tdata[i, 3] >= 0:
            fixed_at[tdata[i, 3], p] = i
        else:
            pool[p, size[p]] = i
            size[p] += 1
    left = np.zeros(P, dtype=np.int64)
    assign = np.full(n, -1, dtype=np.int64)
    top_pos = np.full(K, -1, dtype=np.int64)
    accepted = 0
    used = 0
    while used < n_proposals:
        used += 1
        for p in range(P):
            left[p] = size[p]
        for s in range(K):
            top_pos[s] = -1
        ok = True
        for g in range(G):
            nonu = 0
            u = 0
            for p in range(P):
                if not (pots_mask >> p) & 1:
                    continue
                t = fixed_at[g, p]
                if t < 0:
                    r = left[p]
                    j = np.random.randint(0, r)
                    t = pool[p, j]
                    pool[p, j] = pool[p, r - 1]
                    pool[p, r - 1] = t
                    left[p] = r - 1
                if nonu & tdata[t, 1]:
                    ok = False
                    break
                nonu |= tdata[t, 1]
                u += tdata[t, 2]
                ts = tdata[t, 4]
                if ts >= 0:
                    q = gdata[g, 0]
                    for s in range(K):
                        h = top_pos[s]
                        if h < 0:
                            continue
                        if gdata[h, 0] == q or (opp[ts, s] == 1 and gdata[h, 1] == gdata[g, 1]):
                            ok = False
                            break
                    if not ok:
                        break
                    top_pos[ts] = g
                assign[t] = g
            if not ok:
                break
            if u > par[1] or (check_min and u < par[0]):
                ok = False
                break
        if ok:
            if out.shape[0] > 0:
                for i in range(n):
                    out[accepted, i] = assign[i] if (pots_mask >> tdata[i, 0]) & 1 else -1
            accepted += 1
            if accepted >= max_accept:
                break
    return accepted, used


@njit(cache=True)
def unconstrained_proposal(seed, tdata, G, P):
    """One uniform unconstrained assignment (fixed teams stay in their groups)."""
    np.random.seed(seed)
    n = tdata.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    fixed_groups = np.zeros((P, G), dtype=np.bool_)
    for i in range(n):
        if tdata[i, 3] >= 0:
            assign[i] = tdata[i, 3]
            fixed_groups[tdata[i, 0], tdata[i, 3]] = True
    for p in range(P):
        free = np.empty(G, dtype=np.int64)
        m = 0
        for g in range(G):
            if not fixed_groups[p, g]:
                free[m] = g
                m += 1
        free = free[:m]
        np.random.shuffle(free)
        k = 0
        for i in range(n):
            if tdata[i, 0] == p and tdata[i, 3] < 0:
                assign[i] = free[k]
                k += 1
    return assign
