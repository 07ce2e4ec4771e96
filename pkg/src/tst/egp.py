"""Continuous-time network processes over single-edge moves.

Four generating processes share one event mechanic: every dyad carries a
toggle rate derived from the potential change dq its move would cause,
holding times are exponential in the total rate, and one move fires at a
time.  The rate laws::

    lergm        exp(dq) / (1 + exp(dq))            (sigmoidal)
    ci           min(1, exp(dq))                    (uphill at unit rate)
    cdcstergm    add: nu * exp(dq),  remove: nu     (constant dissolution)
    cfcstergm    add: nu,  remove: nu * exp(dq)     (constant formation)

All four satisfy rate(dq) / rate(-dq) = exp(dq) exactly, so each process
is reversible with stationary graph distribution proportional to
exp(potential).

Simulation is exact: after each move only the rates of dyads sharing an
endpoint with the toggled pair can change, and those are recomputed from
the current graph (no drift; periodically cross-checked against a full
recount).  A numba-compiled kernel is used when numba is importable; the
pure-python loop has identical semantics and consumes the identical
random stream, so both backends produce the same events for the same
seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AbsorbingStateError, BudgetExhaustedError, TstError
from .graph import Graph, NodeAttributeTable
from .model import DyadTable, StatVector, Theta, stats
from .statespace import StateSpace, fmt

VARIANTS = ("lergm", "ci", "cdcstergm", "cfcstergm")
_KIND_CODES = {v: k for k, v in enumerate(VARIANTS)}
CHECK_EVERY = 16384
_BLOCK = 1 << 14

# backend status codes
_NEED_RANDOM = 0
_HIT_TARGET = 1
_BUDGET = 2
_NEED_CAPACITY = 3
_ABSORBING = 4
_CHECK_FAILED = 5


@dataclass(frozen=True)
class EgpKind:
    """Process variant plus the constant-rate parameter for the two
    continuum STERGM variants (ignored by lergm and ci)."""

    variant: str
    nu: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown process variant {self.variant!r}")
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @property
    def code(self) -> int:
        return _KIND_CODES[self.variant]


def move_rate(kind: EgpKind, dq: float, adding: bool) -> float:
    """Toggle rate for a move with potential change dq.

    ``adding`` is True when the move creates the edge.  dq must be finite.
    """
    return _rate_scalar(kind.code, kind.nu, dq, adding)


def _rate_scalar(code: int, nu: float, dq: float, adding: bool) -> float:
    # branch structure mirrored exactly by the compiled kernel
    if code == 0:  # lergm
        if dq >= 0.0:
            return 1.0 / (1.0 + math.exp(-dq))
        e = math.exp(dq)
        return e / (1.0 + e)
    if code == 1:  # ci
        return 1.0 if dq >= 0.0 else math.exp(dq)
    if code == 2:  # cdcstergm
        return nu * math.exp(dq) if adding else nu
    return nu if adding else nu * math.exp(dq)  # cfcstergm


class StateTable:
    """Dense id assignment for states seen by process runs.

    Seeded from a finalized StateSpace so ids agree with states.csv;
    states never seen by the chain sample get fresh ids past the end, in
    first-encounter order (feed trajectories in a fixed order for
    reproducible ids).
    """

    def __init__(self, space: StateSpace | None = None):
        self.ids: dict[StatVector, int] = {}
        self.stats_by_id: list[StatVector] = []
        self.base = 0
        if space is not None:
            for rec in space.by_id:
                self.ids[rec.stats] = rec.id
                self.stats_by_id.append(rec.stats)
            self.base = len(space.by_id)

    def id_for(self, sv: StatVector) -> int:
        sid = self.ids.get(sv)
        if sid is None:
            sid = len(self.stats_by_id)
            self.ids[sv] = sid
            self.stats_by_id.append(sv)
        return sid

    def stats_of(self, sid: int) -> StatVector:
        return self.stats_by_id[sid]

    def novel(self) -> list[tuple[int, StatVector]]:
        return [(i, self.stats_by_id[i]) for i in range(self.base, len(self.stats_by_id))]


@dataclass
class Trajectory:
    """Time-stamped toggle sequence from one process run.

    ``times[k]``/``dyads[k]``/``states[k]`` describe event k: the moment,
    the toggled pair, and the state id occupied after the move.  The run
    starts in state ``seed_state`` at time ``t0`` with graph
    ``start_graph`` (after source-return truncation these describe the
    final re-entry, not the original seed).
    """

    kind: EgpKind
    seed_state: int
    t0: float
    start_graph: Graph
    times: np.ndarray
    dyads: np.ndarray
    states: np.ndarray
    source_id: int | None = None
    target_id: int | None = None
    seed_index: int | None = None
    seed: int | None = None

    def __len__(self):
        return len(self.times)

    def walk_length(self) -> int:
        return len(self.times)

    def state_sequence(self) -> list[int]:
        """seed state followed by the post-event states."""
        return [self.seed_state, *self.states.tolist()]


# ---------------------------------------------------------------------------
# Reference event engine (pure python)
# ---------------------------------------------------------------------------


class _EventLoop:
    """Bitmask-adjacency engine; one instance per run."""

    def __init__(self, kind: EgpKind, g0: Graph, theta: Theta, attrs: NodeAttributeTable):
        self.kind = kind
        self.table = DyadTable(attrs)
        self.th = theta.as_tuple()
        self.adj, self.deg = self.table.masks_of(g0)
        self.cur = stats(g0, attrs)
        self.n = attrs.n
        self.rates = [self._rate_of(k) for k in range(self.table.m)]
        self.t = 0.0
        self.events = 0

    def _rate_of(self, k: int) -> float:
        t = self.table
        the, th2, thm1, thm2, thd1, thd2 = self.th
        i = t.i_of[k]
        j = t.j_of[k]
        ai = self.adj[i]
        present = (ai >> j) & 1
        common = ai & self.adj[j]
        dd1 = (common & t.trimask1[k]).bit_count()
        dd2 = (common & t.trimask2[k]).bit_count()
        d2s = self.deg[i] + self.deg[j] - (2 if present else 0)
        mag = the + th2 * d2s + thm1 * t.match1[k] + thm2 * t.match2[k] + thd1 * dd1 + thd2 * dd2
        dq = -mag if present else mag
        return _rate_scalar(self.kind.code, self.kind.nu, dq, not present)

    def step(self, u: float, e: float):
        """Fire one event; returns the toggled (i, j)."""
        rates = self.rates
        total = 0.0
        for r in rates:
            total += r
        if total <= 0.0:
            raise AbsorbingStateError("all move rates are zero")
        thr = u * total
        acc = 0.0
        pick = -1
        last_pos = -1
        for k, r in enumerate(rates):
            if r > 0.0:
                last_pos = k
            acc += r
            if thr < acc:
                pick = k
                break
        if pick < 0:
            pick = last_pos
        dt = e / total
        t_new = self.t + dt
        if t_new == self.t:
            t_new = math.nextafter(self.t, math.inf)
        self.t = t_new

        tb = self.table
        i = tb.i_of[pick]
        j = tb.j_of[pick]
        delta = tb.signed_delta(self.adj, self.deg, pick)
        sign = delta.t_e
        self.adj[i] ^= 1 << j
        self.adj[j] ^= 1 << i
        self.deg[i] += sign
        self.deg[j] += sign
        self.cur = self.cur.add(delta)
        for v in (i, j):
            row = tb.pair_index[v]
            for w in range(self.n):
                if w != v:
                    kk = row[w]
                    self.rates[kk] = self._rate_of(kk)
        self.events += 1
        if self.events % CHECK_EVERY == 0:
            self._self_check()
        return i, j

    def _self_check(self):
        if self.table.stats_of_masks(self.adj, self.deg) != self.cur:
            raise TstError("internal: tracked statistics diverged from the graph")
        for k in range(self.table.m):
            if self._rate_of(k) != self.rates[k]:
                raise TstError("internal: incrementally maintained rate diverged")

    def snapshot_graph(self) -> Graph:
        return Graph.from_neighbor_masks(self.n, self.adj)


def simulate(
    kind: EgpKind,
    g0: Graph,
    theta: Theta,
    attrs: NodeAttributeTable,
    stop,
    rng: np.random.Generator,
    state_table: StateTable | None = None,
    max_events: int = 100_000_000,
) -> Trajectory:
    """Run one trajectory until ``stop(state_vector, time)`` holds.

    The predicate is checked on the initial state (so it can stop before
    any event) and after every move.  The caller is responsible for a
    predicate that halts almost surely; ``max_events`` is a hard safety
    bound (BudgetExhaustedError carries the partial trajectory).
    """
    table = state_table if state_table is not None else StateTable()
    loop = _EventLoop(kind, g0, theta, attrs)
    times: list[float] = []
    dyads: list[tuple[int, int]] = []
    states: list[int] = []
    seed_sid = table.id_for(loop.cur)
    start_graph = g0.copy()
    if not stop(loop.cur, loop.t):
        us = es = None
        b = _BLOCK
        while True:
            if b >= _BLOCK:
                us = rng.random(size=_BLOCK).tolist()
                es = rng.standard_exponential(size=_BLOCK).tolist()
                b = 0
            i, j = loop.step(us[b], es[b])
            b += 1
            times.append(loop.t)
            dyads.append((i, j))
            states.append(table.id_for(loop.cur))
            if stop(loop.cur, loop.t):
                break
            if loop.events >= max_events:
                raise BudgetExhaustedError(
                    f"no stop after {loop.events} events",
                    partial_trajectory=_package(kind, seed_sid, 0.0, start_graph, times, dyads, states),
                )
    return _package(kind, seed_sid, 0.0, start_graph, times, dyads, states)


def _package(kind, seed_sid, t0, start_graph, times, dyads, states) -> Trajectory:
    return Trajectory(
        kind=kind,
        seed_state=seed_sid,
        t0=t0,
        start_graph=start_graph,
        times=np.asarray(times, dtype=np.float64),
        dyads=np.asarray(dyads, dtype=np.int32).reshape(-1, 2),
        states=np.asarray(states, dtype=np.int32),
    )


# ---------------------------------------------------------------------------
# Driver for the two interchangeable backends
# ---------------------------------------------------------------------------


def run_until_target(
    kind: EgpKind,
    g0: Graph,
    theta: Theta,
    attrs: NodeAttributeTable,
    source_sv,
    target_sv,
    rng: np.random.Generator,
    state_table: StateTable | None = None,
    max_events: int = 100_000_000,
    use_kernel: bool | None = None,
) -> Trajectory:
    """One walk from the source state to the target state.

    The starting graph must occupy the source state.  Whenever the walk
    re-enters the source state its record restarts there (the re-entry
    becomes position 0 and earlier events are dropped), so the returned
    trajectory starts at the source, never revisits it, and ends at the
    target.  ``max_events`` counts every simulated event including
    discarded ones; on exhaustion BudgetExhaustedError carries the
    partial trajectory.
    """
    source = StatVector(*(int(x) for x in source_sv))
    target = StatVector(*(int(x) for x in target_sv))
    if stats(g0, attrs) != source:
        raise ValueError("starting graph is not in the source state")
    status, t0, start_graph, times, dyads, ev_stats, events_done = _run_backend(
        kind, g0, theta, attrs, source, target, rng, max_events, use_kernel
    )
    table = state_table if state_table is not None else StateTable()
    traj = Trajectory(
        kind=kind,
        seed_state=table.id_for(source),
        t0=t0,
        start_graph=start_graph,
        times=np.asarray(times, dtype=np.float64),
        dyads=np.asarray(dyads, dtype=np.int32).reshape(-1, 2),
        states=np.asarray([table.id_for(sv) for sv in ev_stats], dtype=np.int32),
    )
    if status == _BUDGET:
        raise BudgetExhaustedError(
            f"target not reached within {events_done} events",
            partial_trajectory=traj,
            events=events_done,
        )
    return traj


def run_events(
    kind: EgpKind,
    g0: Graph,
    theta: Theta,
    attrs: NodeAttributeTable,
    n_events: int,
    rng: np.random.Generator,
    state_table: StateTable | None = None,
    use_kernel: bool | None = None,
) -> Trajectory:
    """Exactly ``n_events`` events with no stopping rule or truncation."""
    _, t0, start_graph, times, dyads, ev_stats, _ = _run_backend(
        kind, g0, theta, attrs, None, None, rng, n_events, use_kernel
    )
    table = state_table if state_table is not None else StateTable()
    sv0 = stats(g0, attrs)
    return Trajectory(
        kind=kind,
        seed_state=table.id_for(sv0),
        t0=t0,
        start_graph=start_graph,
        times=np.asarray(times, dtype=np.float64),
        dyads=np.asarray(dyads, dtype=np.int32).reshape(-1, 2),
        states=np.asarray([table.id_for(sv) for sv in ev_stats], dtype=np.int32),
    )


def simulate_until_target(
    kind: EgpKind,
    seeds: list[Graph],
    theta: Theta,
    attrs: NodeAttributeTable,
    source_sv,
    target_sv,
    rng: np.random.Generator,
    per_seed: int = 1,
    state_table: StateTable | None = None,
    max_events: int = 100_000_000,
) -> list[Trajectory]:
    """Source-to-target walks for every seed graph (serial driver)."""
    out = []
    for idx, g in enumerate(seeds):
        for _ in range(per_seed):
            traj = run_until_target(
                kind, g.copy(), theta, attrs, source_sv, target_sv, rng,
                state_table=state_table, max_events=max_events,
            )
            traj.seed_index = idx
            out.append(traj)
    return out


def _run_backend(kind, g0, theta, attrs, source, target, rng, max_events, use_kernel):
    """Dispatch to the compiled or the reference engine.

    source=None disables truncation; target=None disables the stopping
    rule (the run ends on the event budget, reported as that status).
    """
    if use_kernel is None:
        use_kernel = kernel_available()
    if use_kernel:
        return _run_kernel(kind, g0, theta, attrs, source, target, rng, max_events)
    return _run_py(kind, g0, theta, attrs, source, target, rng, max_events)


def _run_py(kind, g0, theta, attrs, source, target, rng, max_events):
    loop = _EventLoop(kind, g0, theta, attrs)
    times: list[float] = []
    dyads: list[tuple[int, int]] = []
    ev_stats: list[StatVector] = []
    t0 = 0.0
    start_graph = g0.copy()
    status = _BUDGET
    us = es = None
    b = _BLOCK
    while loop.events < max_events:
        if b >= _BLOCK:
            us = rng.random(size=_BLOCK).tolist()
            es = rng.standard_exponential(size=_BLOCK).tolist()
            b = 0
        i, j = loop.step(us[b], es[b])
        b += 1
        if source is not None and loop.cur == source:
            times.clear()
            dyads.clear()
            ev_stats.clear()
            t0 = loop.t
            start_graph = loop.snapshot_graph()
            continue
        times.append(loop.t)
        dyads.append((i, j))
        ev_stats.append(loop.cur)
        if target is not None and loop.cur == target:
            status = _HIT_TARGET
            break
    return status, t0, start_graph, times, dyads, ev_stats, loop.events


# -- compiled backend -------------------------------------------------------

_KERNEL = None
_KERNEL_FAILED = False


def kernel_available() -> bool:
    global _KERNEL_FAILED
    if _KERNEL_FAILED:
        return False
    try:
        _get_kernel()
        return True
    except ImportError:
        _KERNEL_FAILED = True
        return False


def _get_kernel():
    global _KERNEL
    if _KERNEL is None:
        from ._egp_kernel import until_target_kernel

        _KERNEL = until_target_kernel
    return _KERNEL


def _run_kernel(kind, g0, theta, attrs, source, target, rng, max_events):
    kernel = _get_kernel()
    table = DyadTable(attrs)
    n = attrs.n
    nd = table.m
    adj = g0.adj.astype(np.uint8)
    deg = g0.deg.astype(np.int64)
    cur = np.asarray(stats(g0, attrs), dtype=np.int64)
    i_of = np.asarray(table.i_of, dtype=np.int64)
    j_of = np.asarray(table.j_of, dtype=np.int64)
    match1 = np.asarray(table.match1, dtype=np.int64)
    match2 = np.asarray(table.match2, dtype=np.int64)
    tmask1 = np.zeros((nd, n), dtype=np.uint8)
    tmask2 = np.zeros((nd, n), dtype=np.uint8)
    for k in range(nd):
        i, j = table.i_of[k], table.j_of[k]
        if attrs.b1[i] == attrs.b1[j]:
            tmask1[k] = (attrs.b1 == attrs.b1[i]).astype(np.uint8)
        if attrs.b2[i] == attrs.b2[j]:
            tmask2[k] = (attrs.b2 == attrs.b2[i]).astype(np.uint8)
    pair_index = np.asarray(table.pair_index, dtype=np.int64)
    th = np.asarray(theta.as_tuple(), dtype=np.float64)
    truncate = source is not None
    has_target = target is not None
    source_a = np.asarray(source if truncate else (0,) * 6, dtype=np.int64)
    target_a = np.asarray(target if has_target else (0,) * 6, dtype=np.int64)

    rates = np.empty(nd, dtype=np.float64)  # filled by the kernel at entry
    cap = _BLOCK
    times = np.empty(cap, dtype=np.float64)
    dyads = np.empty((cap, 2), dtype=np.int32)
    ev_stats = np.empty((cap, 6), dtype=np.int32)
    start_adj = adj.copy()
    start_deg = deg.copy()
    fstate = np.zeros(2, dtype=np.float64)  # t, t0
    istate = np.array([0, 0, _BLOCK], dtype=np.int64)  # events_done, write_ptr, buf_pos
    us = np.empty(0, dtype=np.float64)
    es = np.empty(0, dtype=np.float64)

    while True:
        if istate[2] >= len(us):
            us = rng.random(size=_BLOCK)
            es = rng.standard_exponential(size=_BLOCK)
            istate[2] = 0
        status = int(
            kernel(
                adj, deg, cur, i_of, j_of, match1, match2, tmask1, tmask2,
                pair_index, th, kind.code, kind.nu,
                1 if truncate else 0, source_a, 1 if has_target else 0, target_a,
                rates, fstate, istate, times, dyads, ev_stats,
                start_adj, start_deg, us, es, max_events, CHECK_EVERY,
            )
        )
        if status == _NEED_CAPACITY:
            cap *= 2
            times = _grow(times, cap)
            dyads = _grow(dyads, cap)
            ev_stats = _grow(ev_stats, cap)
            continue
        if status == _NEED_RANDOM:
            continue
        if status == _ABSORBING:
            raise AbsorbingStateError("all move rates are zero")
        if status == _CHECK_FAILED:
            raise TstError("internal: kernel self-check failed")
        break

    wp = int(istate[1])
    start_graph = Graph(n)
    start_graph.adj[:] = start_adj.astype(bool)
    np.copyto(start_graph.deg, start_graph.adj.sum(axis=1))
    ev = [StatVector(*row) for row in ev_stats[:wp].tolist()]
    return status, float(fstate[1]), start_graph, times[:wp].copy(), dyads[:wp].copy(), ev, int(istate[0])


def _grow(arr: np.ndarray, cap: int) -> np.ndarray:
    out = np.empty((cap,) + arr.shape[1:], dtype=arr.dtype)
    out[: len(arr)] = arr
    return out


# ---------------------------------------------------------------------------
# Trajectory files
# ---------------------------------------------------------------------------


def save_trajectory_csv(traj: Trajectory, fh) -> None:
    fh.write(f"# kind={traj.kind.variant}\n")
    fh.write(f"# nu={fmt(traj.kind.nu)}\n")
    fh.write(f"# seed={traj.seed if traj.seed is not None else ''}\n")
    fh.write(f"# source_id={traj.source_id if traj.source_id is not None else ''}\n")
    fh.write(f"# target_id={traj.target_id if traj.target_id is not None else ''}\n")
    fh.write(f"# seed_index={traj.seed_index if traj.seed_index is not None else ''}\n")
    fh.write(f"# n={traj.start_graph.n}\n")
    fh.write(f"# t0={fmt(traj.t0)}\n")
    fh.write(f"# seed_state={traj.seed_state}\n")
    edges = ";".join(f"{i}-{j}" for i, j in traj.start_graph.edges())
    fh.write(f"# start_edges={edges}\n")
    w = csv.writer(fh)
    w.writerow(["time", "i", "j", "state_id"])
    for k in range(len(traj)):
        w.writerow([
            fmt(float(traj.times[k])), int(traj.dyads[k, 0]),
            int(traj.dyads[k, 1]), int(traj.states[k]),
        ])


def load_trajectory_csv(fh) -> Trajectory:
    header = {}
    pos = fh.tell()
    while True:
        line = fh.readline()
        if not line.startswith("#"):
            fh.seek(pos)
            break
        pos = fh.tell()
        key, _, val = line[1:].strip().partition("=")
        header[key.strip()] = val
    n = int(header["n"])
    g = Graph(n)
    if header.get("start_edges"):
        for part in header["start_edges"].split(";"):
            i, _, j = part.partition("-")
            g.toggle((int(i), int(j)))
    rows = list(csv.DictReader(fh))

    def opt(key):
        return int(header[key]) if header.get(key) else None

    return Trajectory(
        kind=EgpKind(header["kind"], float(header["nu"])),
        seed_state=int(header["seed_state"]),
        t0=float(header["t0"]),
        start_graph=g,
        times=np.asarray([float(r["time"]) for r in rows], dtype=np.float64),
        dyads=np.asarray([[int(r["i"]), int(r["j"])] for r in rows], dtype=np.int32).reshape(-1, 2),
        states=np.asarray([int(r["state_id"]) for r in rows], dtype=np.int32),
        source_id=opt("source_id"),
        target_id=opt("target_id"),
        seed_index=opt("seed_index"),
        seed=opt("seed"),
    )


def save_state_table_csv(table: StateTable, fh) -> None:
    """Novel states (ids past the chain-sampled space) with their stats."""
    w = csv.writer(fh)
    w.writerow(["id", "t_e", "t_2s", "t_m1", "t_m2", "t_d1", "t_d2"])
    for sid, sv in table.novel():
        w.writerow([sid, *sv])


def load_state_table_csv(fh, table: StateTable) -> StateTable:
    for row in csv.DictReader(fh):
        sv = StatVector(
            int(row["t_e"]), int(row["t_2s"]), int(row["t_m1"]),
            int(row["t_m2"]), int(row["t_d1"]), int(row["t_d2"]),
        )
        sid = table.id_for(sv)
        if sid != int(row["id"]):
            raise TstError(f"state table id mismatch: {sid} != {row['id']}")
    return table
