"""Random draw procedures.

The Skip mechanism draws the teams of each pot in random order and seats each
one in the first group (label order) that has a free slot for its pot, breaks
no rule, and still admits a valid completion. Also here: the unconstrained
sampler, the rejection sampler behind the uniform baseline, and post-draw
labelling of anonymous groups.

Randomness: draw ``k`` of procedure ``pid`` under master seed ``s`` uses a
Philox stream with key ``SeedSequence([s, pid])`` and counter ``(0, 0, k, 0)``,
so batches give the same draws whatever the chunking or worker count.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _engine
from .constraints import check_full
from .model import DrawState, Instance, Labelling


class SkipError(RuntimeError):
    """No group can take the drawn team; the completion oracle is wrong or the start state was infeasible."""


@dataclass(frozen=True)
class Procedure:
    """A pot order plus a labelling policy, e.g. ``1-2-3-4 ex-ante``."""

    pot_order: tuple
    labelling: Labelling = Labelling.EX_ANTE

    def __post_init__(self):
        order = tuple(int(p) for p in self.pot_order)
        object.__setattr__(self, "pot_order", order)
        object.__setattr__(self, "labelling", Labelling.parse(self.labelling))
        if sorted(order) != list(range(1, len(order) + 1)):
            raise ValueError(f"pot order {order} is not a permutation of 1..{len(order)}")

    @classmethod
    def parse(cls, order: str | Sequence[int], labelling="ex-ante") -> "Procedure":
        if isinstance(order, str):
            order = [int(x) for x in order.replace("-", ",").split(",") if x.strip()]
        return cls(tuple(order), Labelling.parse(labelling))

    @property
    def name(self) -> str:
        return "-".join(map(str, self.pot_order))

    @property
    def id(self) -> int:
        """Stable integer id: lexicographic rank of the pot order, times two, plus policy."""
        n = len(self.pot_order)
        rank = 0
        rest = list(range(1, n + 1))
        for k, p in enumerate(self.pot_order):
            i = rest.index(p)
            rank += i * math.factorial(n - 1 - k)
            rest.pop(i)
        return 2 * rank + (self.labelling is Labelling.EX_POST)

    def __str__(self) -> str:
        return f"{self.name} {self.labelling.value}"


def all_procedures(n_pots: int = 4, labellings: Iterable = (Labelling.EX_ANTE, Labelling.EX_POST)) -> list:
    """Every pot order under every policy, official order first within each policy."""
    return [
        Procedure(order, lab)
        for lab in map(Labelling.parse, labellings)
        for order in itertools.permutations(range(1, n_pots + 1))
    ]


@functools.lru_cache(maxsize=256)
def _stream_key(master_seed: int, procedure_id: int) -> np.ndarray:
    key = np.random.SeedSequence([int(master_seed), int(procedure_id)]).generate_state(2, dtype=np.uint64)
    key.flags.writeable = False
    return key


def draw_rng(master_seed: int, procedure_id: int, k: int) -> np.random.Generator:
    counter = np.array([0, 0, int(k), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_stream_key(master_seed, procedure_id), counter=counter))


class _DrawStreams:
    """Reuses one Philox generator across consecutive draws; same streams as :func:`draw_rng`."""

    def __init__(self, master_seed: int, procedure_id: int):
        self._key = _stream_key(master_seed, procedure_id)
        self._bits = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bits)
        self._state = self._bits.state

    def __call__(self, k: int) -> np.random.Generator:
        state = dict(self._state)
        state["state"] = {"counter": np.array([0, 0, int(k), 0], dtype=np.uint64), "key": self._key.copy()}
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bits.state = state
        return self._gen


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# -- transcripts ------------------------------------------------------------------


@dataclass(frozen=True)
class DrawEvent:
    team: str
    skipped: tuple
    group: str


@dataclass
class DrawTranscript:
    procedure: Procedure
    seed: int | None
    events: list = field(default_factory=list)
    assignment: dict = field(default_factory=dict)
    draw_index: int | None = None

    def to_jsonl(self) -> str:
        lines = [json.dumps({"team": e.team, "skipped": list(e.skipped), "group": e.group}) for e in self.events]
        lines.append(
            json.dumps(
                {
                    "final": self.assignment,
                    "seed": self.seed,
                    "draw_index": self.draw_index,
                    "pot_order": list(self.procedure.pot_order),
                    "labelling": self.procedure.labelling.value,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "DrawTranscript":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "final" not in rows[-1]:
            raise ValueError("transcript must end with a line holding the final assignment")
        tail = rows[-1]
        events = [DrawEvent(r["team"], tuple(r["skipped"]), r["group"]) for r in rows[:-1]]
        return cls(
            Procedure(tuple(tail["pot_order"]), tail["labelling"]),
            tail.get("seed"),
            events,
            dict(tail["final"]),
            tail.get("draw_index"),
        )

    def replay(self, instance: Instance) -> DrawState:
        """Re-run the Skip mechanism on the recorded draw order.

        Raises ``ValueError`` if a recorded placement differs from what the
        engine does now.
        """
        order = [e.team for e in self.events]
        state, again = skip_sequence(instance, _start_state(instance, self.procedure.labelling), order, self.procedure.labelling)
        for old, new in zip(self.events, again):
            if old != new:
                raise ValueError(f"replay diverged at {old.team}: recorded {old.group}, engine {new.group}")
        if state.assignment != self.assignment:
            raise ValueError("replayed assignment differs from the recorded one")
        return state


# -- Skip mechanism ---------------------------------------------------------------


def _start_state(instance: Instance, labelling) -> DrawState:
    state = DrawState(instance)
    if Labelling.parse(labelling) is Labelling.EX_ANTE:
        for team_id, label in instance.pre_assigned.items():
            state.place(team_id, label)
    return state


def skip_sequence(instance: Instance, state: DrawState, teams: Sequence[str], labelling="ex-ante"):
    """Seat ``teams`` one after another with the Skip mechanism.

    Returns the new state and one :class:`DrawEvent` per team. ``state`` is
    not modified.
    """
    comp = _engine.compile_instance(instance, labelling)
    assign = state.to_array()
    status, _, witness = _engine.search(assign, comp)
    if status != _engine.FEASIBLE:
        raise SkipError("the starting state has no valid completion")
    seq = np.array([instance.team_index[t] for t in teams], dtype=np.int64)
    out_group = np.empty(len(seq), dtype=np.int64)
    out_skipped = np.empty(len(seq), dtype=np.int64)
    mkeys, mused = _engine._memo_arrays(comp)
    placed, _ = _engine.skip_sequence(
        assign, witness, seq, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups,
        comp.cls, comp.n_classes, mkeys, mused, out_group, out_skipped,
    )
    if placed < len(seq):
        raise SkipError(f"no group can take {teams[placed]!r}")
    labels = instance.group_labels
    events = [
        DrawEvent(t, tuple(labels[g] for g in range(len(labels)) if (int(mask) >> g) & 1), labels[int(g)])
        for t, g, mask in zip(teams, out_group, out_skipped)
    ]
    return DrawState.from_array(instance, assign), events


def skip_place(instance: Instance, state: DrawState, team: str, labelling="ex-ante") -> tuple:
    """Seat one drawn team in ``state`` (in place).

    Returns ``(group, skipped)``: the chosen label and the labels with a free
    slot that were tried and rejected before it.
    """
    new, (event,) = skip_sequence(instance, state, [instance.find(team).id], labelling)
    state.place(event.team, event.group)
    return event.group, tuple(event.skipped)


def _drawable(instance: Instance, pot: int, labelling: Labelling) -> list:
    return [
        t.id
        for t in instance.pots[pot - 1]
        if labelling is Labelling.EX_POST or t.pre_assigned_group is None
    ]


def draw_sequence(instance: Instance, procedure: Procedure, rng) -> list:
    """Order in which the balls come out: pot by pot, each pot shuffled."""
    rng = _as_rng(rng)
    seq = []
    for pot in procedure.pot_order:
        teams = _drawable(instance, pot, procedure.labelling)
        seq.extend(teams[i] for i in rng.permutation(len(teams)))
    return seq


def run_skip_draw(instance: Instance, procedure: Procedure, rng=None, *, seed=None, draw_index=None):
    """One full Skip draw.

    Pass either a ``Generator`` as ``rng``, or ``seed`` (and optionally
    ``draw_index``) to use the counter-based stream for that draw. Under
    ex-post labelling the groups come back in creation order; see
    :func:`label_ex_post`.

    Returns
    -------
    (DrawState, DrawTranscript)
    """
    if rng is None:
        if seed is None:
            raise ValueError("need rng or seed")
        rng = draw_rng(seed, procedure.id, draw_index or 0)
    start = _start_state(instance, procedure.labelling)
    seq = draw_sequence(instance, procedure, rng)
    state, events = skip_sequence(instance, start, seq, procedure.labelling)
    if check_full(instance, state, procedure.labelling):
        raise SkipError("Skip draw produced an invalid assignment")
    transcript = DrawTranscript(procedure, seed, events, state.assignment, draw_index)
    return state, transcript


def _skip_chunk(args):
    instance, procedure, seed, start, stop = args
    comp = _engine.compile_instance(instance, procedure.labelling)
    init = _start_state(instance, procedure.labelling).to_array()
    status, _, witness = _engine.search(init, comp)
    if status != _engine.FEASIBLE:
        raise SkipError(f"{instance.name} is infeasible under {procedure.labelling.value}")
    index = instance.team_index
    pots = [np.array([index[t] for t in _drawable(instance, p, procedure.labelling)], dtype=np.int64) for p in procedure.pot_order]
    streams = _DrawStreams(seed, procedure.id)
    seqs = np.empty((stop - start, sum(len(p) for p in pots)), dtype=np.int64)
    for row, k in enumerate(range(start, stop)):
        rng = streams(k)
        seqs[row] = np.concatenate([p[rng.permutation(len(p))] for p in pots])
    n = comp.n_teams
    counts = np.zeros((n, n), dtype=np.int64)
    mkeys, mused = _engine._memo_arrays(comp)
    stuck = _engine.skip_batch(
        init, witness, seqs, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups,
        comp.cls, comp.n_classes, mkeys, mused, counts, np.zeros((0, n), dtype=np.int64),
    )
    if stuck:
        raise SkipError(f"{stuck} draws got stuck")
    return counts


def _map_chunks(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def skip_counts(instance: Instance, procedure: Procedure, n_draws: int, seed: int, workers: int = 1, chunk: int = 5000) -> np.ndarray:
    """Co-membership counts over draws ``0 .. n_draws-1`` of ``procedure``.

    Deterministic in ``(instance, procedure, n_draws, seed)``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    jobs = [(instance, procedure, seed, a, min(a + chunk, n_draws)) for a in range(0, n_draws, chunk)]
    return sum(_map_chunks(_skip_chunk, jobs, workers))


# -- ex-post labelling ------------------------------------------------------------


def label_ex_post(instance: Instance, state: DrawState) -> DrawState:
    """Give the groups of a finished ex-post draw labels that satisfy the
    host seats and bracket rules.

    Groups are taken in their current label order and each gets the smallest
    label that still allows the rest to be labelled, so the result is the
    lexicographically smallest valid labelling.
    """
    if not state.is_complete:
        raise ValueError("label_ex_post needs a complete assignment")
    labels = instance.group_labels
    groups = [state.members(g) for g in labels]
    seat_of = instance.pre_assigned
    seated_labels = set(seat_of.values())
    b = instance.bracket
    tops = b.top_seeds if b is not None else frozenset()
    pairs = b.opposite_pairs if b is not None else frozenset()

    def allowed(k: int, label: str, chosen: list) -> bool:
        members = groups[k]
        seats = {seat_of[t] for t in members if t in seat_of}
        if seats:
            if seats != {label}:
                return False
        elif label in seated_labels:
            return False
        for t in members:
            if t not in tops:
                continue
            for j, other_label in enumerate(chosen):
                for u in groups[j]:
                    if u not in tops:
                        continue
                    if b.quarter_of(label) == b.quarter_of(other_label):
                        return False
                    if frozenset({t, u}) in pairs and b.pathway_of(label) == b.pathway_of(other_label):
                        return False
        return True

    chosen: list = []

    def extend() -> bool:
        k = len(chosen)
        if k == len(groups):
            return True
        for label in labels:
            if label in chosen or not allowed(k, label, chosen):
                continue
            chosen.append(label)
            if extend():
                return True
            chosen.pop()
        return False

    if not extend():
        raise ValueError("no labelling satisfies the host seats and bracket rules")
    out = DrawState(instance)
    for k, members in enumerate(groups):
        for t in members:
            out.place(t, chosen[k])
    return out


# -- unconstrained and rejection sampling -----------------------------------------


def sample_unconstrained(instance: Instance, rng=None, labelling="ex-ante") -> DrawState:
    """Each pot independently and uniformly permuted onto the groups.

    Under ex-ante labelling pre-assigned teams stay in their groups and the
    rest of the pot is permuted over the remaining groups.
    """
    rng = _as_rng(rng)
    labelling = Labelling.parse(labelling)
    state = DrawState(instance)
    for pot in instance.pots:
        free_groups = list(instance.group_labels)
        movers = []
        for t in pot:
            if labelling is Labelling.EX_ANTE and t.pre_assigned_group is not None:
                state.place(t.id, t.pre_assigned_group)
                free_groups.remove(t.pre_assigned_group)
            else:
                movers.append(t.id)
        for t, k in zip(movers, rng.permutation(len(free_groups))):
            state.place(t, free_groups[k])
    return state


def rejection_sample(instance: Instance, labelling="ex-ante", rng=None, max_proposals: int = 10**7, compiled: bool = True):
    """First accepted unconstrained draw, or ``None`` if the budget runs out.

    Returns ``(state or None, proposals_used)``. ``compiled=False`` runs the
    plain loop over :func:`sample_unconstrained` and :func:`check_full`.
    """
    if max_proposals < 1:
        raise ValueError("max_proposals must be >= 1")
    rng = _as_rng(rng)
    labelling = Labelling.parse(labelling)
    if not compiled:
        for used in range(1, max_proposals + 1):
            state = sample_unconstrained(instance, rng, labelling)
            if not check_full(instance, state, labelling):
                return state, used
        return None, max_proposals
    comp = _engine.compile_instance(instance, labelling)
    out = np.empty((1, comp.n_teams), dtype=np.int64)
    seed = int(rng.integers(0, 2**31 - 1))
    acc, used = _engine.rejection_chunk(
        seed, max_proposals, 1, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups,
        (1 << instance.n_pots) - 1, True, out,
    )
    if acc == 0:
        return None, int(used)
    return DrawState.from_array(instance, out[0]), int(used)


@dataclass
class UniformBatch:
    """Accepted rejection samples plus the proposal accounting behind them."""

    assignments: np.ndarray
    proposals: int
    target: int
    labelling: Labelling
    seed: int
    pots_mask: int
    method: str = "rejection"

    @property
    def accepted(self) -> int:
        return int(self.assignments.shape[0])

    @property
    def exhausted(self) -> bool:
        return self.accepted < self.target


_UNIFORM_STREAM = 1 << 20


def exact_sampling_supported(instance: Instance) -> bool:
    """True when label-dependent rules sit in a single pot."""
    from .counting import CountingUnsupported, _anchor_pot

    try:
        _anchor_pot(instance)
    except CountingUnsupported:
        return False
    return True


def _chunk_seed(seed: int, stream: int, c: int) -> int:
    # numba's generator takes a 32-bit seed
    return int(np.random.SeedSequence([int(seed), int(stream), int(c)]).generate_state(1)[0])


def _rejection_job(args):
    instance, labelling, seed, stream, c, size, cap, pots_mask, check_min = args
    comp = _engine.compile_instance(instance, labelling)
    out = np.empty((cap, comp.n_teams), dtype=np.int64)
    acc, used = _engine.rejection_chunk(
        _chunk_seed(seed, stream, c), size, cap, comp.tdata, comp.gdata, comp.opp, comp.par, comp.n_groups,
        pots_mask, check_min, out,
    )
    return out[:acc].copy(), int(used)


def sample_uniform(
    instance: Instance,
    labelling="ex-ante",
    n_accept: int = 10**4,
    seed: int = 0,
    max_proposals: int | None = None,
    workers: int = 1,
    chunk: int = 1 << 20,
    pots=None,
    check_min: bool = True,
    method: str = "rejection",
) -> UniformBatch:
    """Draw ``n_accept`` valid assignments uniformly at random.

    ``method="rejection"`` filters unconstrained proposals. ``method="exact"``
    samples directly from the group-by-group count (see
    :mod:`drawlab.counting`), uses no proposals and ignores ``workers``;
    ``"auto"`` picks it whenever the instance allows. Both are exactly
    uniform.

    Rejection proposals are processed in fixed chunks, each with its own seed; chunks
    are consumed in index order so the result does not depend on
    ``workers``. ``pots`` restricts the draw to a subset of pots (the other
    teams stay unassigned), and ``check_min=False`` drops the UEFA lower
    bound; both serve the pots-1-2 deadlock study.
    """
    labelling = Labelling.parse(labelling)
    if method not in ("rejection", "exact", "auto"):
        raise ValueError(f"unknown uniform method {method!r}")
    whole = pots is None and check_min
    if method == "auto":
        method = "exact" if whole and exact_sampling_supported(instance) else "rejection"
    if method == "exact":
        if not whole:
            raise ValueError("exact uniform sampling covers complete draws only")
        from .counting import group_counter

        arr = group_counter(instance, labelling).sample_many(n_accept, seed)
        return UniformBatch(arr, 0, n_accept, labelling, seed, (1 << instance.n_pots) - 1, "exact")
    pots = range(1, instance.n_pots + 1) if pots is None else pots
    pots_mask = sum(1 << (p - 1) for p in pots)
    stream = _UNIFORM_STREAM + (labelling is Labelling.EX_POST) + 2 * pots_mask + 512 * int(check_min)
    cap = max(1, min(chunk, n_accept, (1 << 25) // max(1, len(instance.teams))))
    got: list = []
    n_got = 0
    proposals = 0
    c = 0
    workers = max(1, workers)
    while n_got < n_accept and (max_proposals is None or proposals < max_proposals):
        batch = []
        budget = proposals
        for j in range(workers):
            size = chunk if max_proposals is None else min(chunk, max_proposals - budget)
            if size <= 0:
                break
            batch.append((instance, labelling, seed, stream, c + j, size, cap, pots_mask, check_min))
            budget += size
        results = _map_chunks(_rejection_job, batch, workers)
        for job, (rows, used) in zip(batch, results):
            c += 1
            need = n_accept - n_got
            if rows.shape[0] > need:
                # re-run the last chunk so it stops right at the target acceptance
                rows, used = _rejection_job(job[:6] + (need,) + job[7:])
            got.append(rows)
            n_got += rows.shape[0]
            proposals += used
            if n_got >= n_accept:
                break
    arr = np.concatenate(got) if got else np.empty((0, len(instance.teams)), dtype=np.int64)
    return UniformBatch(arr, proposals, n_accept, labelling, seed, pots_mask)
