"""Change paths through the observed state space.

A change path is a non-repeating sequence of states, consecutive in the
transition structure, from a source state to a target state.  The best
such path maximizes the product of state probabilities, i.e. the sum of
log probabilities over visited states; with node costs -logp (strictly
positive once probabilities are estimated) this is a shortest-path
problem, solved by Dijkstra with each edge charged the cost of the state
it enters and the source state's cost added once.

Positions along a path are expressed by the change coordinate, spaced
evenly from 0 at the source to 1 at the target.  Interior states whose
log probability is a strict local maximum are "intermediate" states
(locally stable waypoints); strict local minima are "transition" states
(barriers).
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from heapq import heappop, heappush
from math import inf, isnan

import numpy as np

from .errors import DisconnectedStatesError, NoInteriorError
from .statespace import StateSpace, fmt

MILESTONE_KINDS = ("source", "target", "intermediate", "transition", "plain")


@dataclass
class ChangePath:
    """States along a path with coordinates, weights, and milestone labels."""

    states: list[int]
    coords: list[float]
    logp: list[float]
    q: list[float]
    milestones: list[str]

    def __len__(self):
        return len(self.states)

    def hops(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class MilestoneLabel:
    kind: str  # "intermediate" or "transition"
    index: int
    coord: float
    logp: float


def change_coordinate(length: int) -> list[float]:
    """Evenly spaced positions in [0, 1]; a single state sits at 0."""
    if length < 1:
        raise ValueError("need at least one state")
    if length == 1:
        return [0.0]
    return [i / (length - 1) for i in range(length)]


def _node_costs(space: StateSpace, weight: str) -> list[float]:
    if weight == "logp":
        return [-rec.logp for rec in space.by_id]
    if weight == "q":
        # potential-only surrogate: pretend equal state multiplicities and
        # normalize potentials into log probabilities
        qs = np.array([rec.q for rec in space.by_id])
        lse = float(np.logaddexp.reduce(qs))
        return [lse - float(q) for q in qs]
    raise ValueError(f"unknown weight {weight!r}")


def mspcp(space: StateSpace, source: int, target: int, weight: str = "logp",
          smooth_window: int = 1) -> ChangePath:
    """Maximum state probability change path from source to target.

    Runs Dijkstra over the observed transition structure with node costs
    -logp (or a potential-based surrogate with weight="q").  Among
    equal-cost optima the lexicographically smallest id sequence is
    returned, which makes the output deterministic when the model's
    symmetry creates exact ties.  Raises DisconnectedStatesError when no
    observed path connects the endpoints.
    """
    if not space.finalized:
        raise ValueError("state space must be finalized")
    nstates = len(space.by_id)
    if not (0 <= source < nstates and 0 <= target < nstates):
        raise DisconnectedStatesError(f"state id out of range (source={source}, target={target})")
    if source == target:
        return _build_path(space, [source], smooth_window)

    cost = _node_costs(space, weight)
    adj = space.adjacency()

    dist = [inf] * nstates
    dist[source] = cost[source]
    done = [False] * nstates
    pq = [(dist[source], source)]
    while pq:
        du, u = heappop(pq)
        if done[u]:
            continue
        done[u] = True
        for v in adj[u]:
            nd = du + cost[v]
            if nd < dist[v]:
                dist[v] = nd
                heappush(pq, (nd, v))
    if dist[target] == inf:
        raise DisconnectedStatesError(
            f"states {source} and {target} are not connected in the observed transitions"
        )

    # Tight edges (u, v): dist[u] + cost[v] == dist[v] exactly.  Node costs
    # are strictly positive, so the tight graph is a DAG and every
    # source->target path in it attains the optimum.  Walk it greedily,
    # always taking the smallest-id successor from which the target stays
    # reachable: that is the lexicographically smallest optimal sequence.
    reach = _reverse_reachable(adj, dist, cost, target)
    seq = [source]
    u = source
    while u != target:
        nxt = None
        for v in sorted(adj[u]):
            if reach[v] and dist[u] + cost[v] == dist[v]:
                nxt = v
                break
        if nxt is None:  # defensive; cannot happen when dist[target] < inf
            raise DisconnectedStatesError("tight-path walk failed")
        seq.append(nxt)
        u = nxt
    return _build_path(space, seq, smooth_window)


def _reverse_reachable(adj, dist, cost, target):
    """States from which the target is reachable along tight edges."""
    reach = [False] * len(adj)
    reach[target] = True
    stack = [target]
    while stack:
        v = stack.pop()
        dv = dist[v]
        cv = cost[v]
        for u in adj[v]:
            if not reach[u] and dist[u] + cv == dv:
                reach[u] = True
                stack.append(u)
    return reach


def _build_path(space: StateSpace, seq: list[int], smooth_window: int = 1) -> ChangePath:
    recs = [space.by_id[s] for s in seq]
    path = ChangePath(
        states=list(seq),
        coords=change_coordinate(len(seq)),
        logp=[r.logp for r in recs],
        q=[r.q for r in recs],
        milestones=["plain"] * len(seq),
    )
    label_milestones(path, smooth_window)
    return path


def label_milestones(path: ChangePath, smooth_window: int = 1) -> ChangePath:
    """Refresh path.milestones in place (endpoints + detected extrema)."""
    labels = ["plain"] * len(path)
    labels[0] = "source"
    labels[-1] = "target"
    if len(path) >= 3 and not any(isnan(x) for x in path.logp):
        for m in find_milestones(path, smooth_window):
            labels[m.index] = m.kind
    path.milestones = labels
    return path


def moving_median(values, window: int):
    """Median filter with an odd window, shrinking at the boundaries."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    if window == 1:
        return list(values)
    h = window // 2
    n = len(values)
    return [statistics.median(values[max(0, i - h):min(n, i + h + 1)]) for i in range(n)]


def find_milestones(path: ChangePath, smooth_window: int = 1) -> list[MilestoneLabel]:
    """Interior extrema of (optionally median-smoothed) log probability.

    Strict local maxima are intermediate states, strict local minima are
    transition states.  A plateau of equal values counts once, at its
    midpoint, and only when both flanks are strictly lower (resp. higher).
    Endpoints are never labeled.  Raises NoInteriorError for paths with
    fewer than three states.
    """
    if len(path) < 3:
        raise NoInteriorError(f"path of length {len(path)} has no interior")
    vals = moving_median(path.logp, smooth_window)
    out: list[MilestoneLabel] = []
    runs = []
    i = 0
    n = len(vals)
    while i < n:
        j = i
        while j + 1 < n and vals[j + 1] == vals[i]:
            j += 1
        runs.append((i, j))
        i = j + 1
    for a, b in runs[1:-1]:
        left = vals[a - 1]
        right = vals[b + 1]
        mid = (a + b) // 2
        if left < vals[a] and right < vals[a]:
            out.append(MilestoneLabel("intermediate", mid, path.coords[mid], path.logp[mid]))
        elif left > vals[a] and right > vals[a]:
            out.append(MilestoneLabel("transition", mid, path.coords[mid], path.logp[mid]))
    return out


def stats_along_path(path: ChangePath, space) -> list[dict]:
    """Per-state rows of raw and max-normalized statistics.

    ``space`` needs only a ``stats_of(id)`` lookup.  Each statistic is
    normalized by its maximum over the path; an identically zero column
    stays zero.
    """
    svs = [space.stats_of(s) for s in path.states]
    maxima = [max(sv[k] for sv in svs) for k in range(6)]
    rows = []
    for idx, sid in enumerate(path.states):
        sv = svs[idx]
        row = {
            "coord": path.coords[idx],
            "id": sid,
            "t_e": sv.t_e, "t_2s": sv.t_2s, "t_m1": sv.t_m1,
            "t_m2": sv.t_m2, "t_d1": sv.t_d1, "t_d2": sv.t_d2,
            "q": path.q[idx],
            "logp": path.logp[idx],
        }
        for k, name in enumerate(("t_e", "t_2s", "t_m1", "t_m2", "t_d1", "t_d2")):
            row["n_" + name] = sv[k] / maxima[k] if maxima[k] else 0.0
        rows.append(row)
    return rows


MSPCP_COLUMNS = [
    "coord", "id", "t_e", "t_2s", "t_m1", "t_m2", "t_d1", "t_d2", "q", "logp",
    "milestone", "n_t_e", "n_t_2s", "n_t_m1", "n_t_m2", "n_t_d1", "n_t_d2",
]


def save_mspcp_csv(path: ChangePath, space, fh) -> None:
    rows = stats_along_path(path, space)
    w = csv.writer(fh)
    w.writerow(MSPCP_COLUMNS)
    for idx, row in enumerate(rows):
        w.writerow([
            fmt(row["coord"]), row["id"], row["t_e"], row["t_2s"], row["t_m1"],
            row["t_m2"], row["t_d1"], row["t_d2"], fmt(row["q"]), fmt(row["logp"]),
            path.milestones[idx],
            fmt(row["n_t_e"]), fmt(row["n_t_2s"]), fmt(row["n_t_m1"]),
            fmt(row["n_t_m2"]), fmt(row["n_t_d1"]), fmt(row["n_t_d2"]),
        ])


def load_mspcp_csv(fh) -> ChangePath:
    rows = list(csv.DictReader(fh))
    return ChangePath(
        states=[int(r["id"]) for r in rows],
        coords=[float(r["coord"]) for r in rows],
        logp=[float(r["logp"]) for r in rows],
        q=[float(r["q"]) for r in rows],
        milestones=[r["milestone"] for r in rows],
    )
