"""Reducing process walks to change paths and comparing them.

A simulated walk wanders: it backtracks and makes excursions before
reaching the target.  Analysis proceeds in stages: prune each walk to its
underlying change path (fewest-hop route through the digraph of visited
states), classify the path as following the primary corridor or the
secondary one (by the edge count where polarization crosses zero), warp
paths onto a common change-coordinate grid so potential profiles line up,
and summarize walk/path length distributions.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DimensionError, EmptyInputError, MalformedTrajectoryError
from .model import StatVector, Theta, potential
from .paths import ChangePath, change_coordinate
from .statespace import fmt


class StateStatsView:
    """stats/q/logp lookups over chain-sampled plus process-only states."""

    def __init__(self, theta: Theta):
        self.theta = theta
        self._stats: dict[int, StatVector] = {}
        self._logp: dict[int, float] = {}

    @classmethod
    def from_space(cls, space, extra_table=None) -> "StateStatsView":
        view = cls(space.theta)
        for rec in space.by_id:
            view._stats[rec.id] = rec.stats
            view._logp[rec.id] = rec.logp
        if extra_table is not None:
            for sid, sv in extra_table.novel():
                view._stats[sid] = sv
        return view

    def stats_of(self, sid: int) -> StatVector:
        return self._stats[sid]

    def q_of(self, sid: int) -> float:
        return potential(self.theta, self._stats[sid])

    def logp_of(self, sid: int) -> float:
        return self._logp.get(sid, math.nan)


def prune_to_path(traj, source_id: int, target_id: int, view: StateStatsView) -> ChangePath:
    """Fewest-hop source-to-target route through the walk's visit digraph.

    Nodes are visited states, arcs are observed consecutive transitions.
    Among equal-hop choices the successor visited earliest (first visit in
    the walk) wins, which makes the reduction deterministic.
    """
    seq = traj.state_sequence() if hasattr(traj, "state_sequence") else list(traj)
    if seq[0] != source_id:
        raise MalformedTrajectoryError("walk does not begin at the source state")
    first_visit: dict[int, int] = {}
    succ: dict[int, set] = {}
    prev = seq[0]
    first_visit[prev] = 0
    for pos, sid in enumerate(seq[1:], start=1):
        if sid not in first_visit:
            first_visit[sid] = pos
        if sid != prev:
            succ.setdefault(prev, set()).add(sid)
        prev = sid

    # hop distance to the target over reversed arcs
    dist = {target_id: 0}
    frontier = deque([target_id])
    pred: dict[int, list] = {}
    for u, vs in succ.items():
        for v in vs:
            pred.setdefault(v, []).append(u)
    while frontier:
        v = frontier.popleft()
        for u in pred.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                frontier.append(u)
    if source_id not in dist:
        raise MalformedTrajectoryError("target unreachable in the visit digraph")

    states = [source_id]
    u = source_id
    while u != target_id:
        best = None
        for v in succ.get(u, ()):
            if dist.get(v, -1) == dist[u] - 1:
                if best is None or first_visit[v] < first_visit[best]:
                    best = v
        states.append(best)
        u = best
    return ChangePath(
        states=states,
        coords=change_coordinate(len(states)),
        logp=[view.logp_of(s) for s in states],
        q=[view.q_of(s) for s in states],
        milestones=["source"] + ["plain"] * (len(states) - 2) + ["target"]
        if len(states) > 1 else ["source"],
    )


@dataclass(frozen=True)
class PathClass:
    """Primary/secondary label with the evidence used to decide it."""

    label: str
    neutral_edge_count: int
    tau: float
    neutral_index: int


def classify_path(path: ChangePath, reference: ChangePath, view: StateStatsView) -> PathClass:
    """Label a path by its edge count at the polarization-neutral point.

    The neutral point is the first path state minimizing |t_m1 - t_m2|.
    The threshold tau is midway between the reference path's maximum edge
    count and its source edge count: the primary corridor keeps density
    high through the crossover, the secondary one lets it fall back.
    """
    ref_e = [view.stats_of(s).t_e for s in reference.states]
    tau = (max(ref_e) + ref_e[0]) / 2.0
    pols = [abs(view.stats_of(s).t_m1 - view.stats_of(s).t_m2) for s in path.states]
    idx = min(range(len(pols)), key=lambda k: (pols[k], k))
    e_here = view.stats_of(path.states[idx]).t_e
    label = "primary" if e_here >= tau else "secondary"
    return PathClass(label, e_here, tau, idx)


def components_at_neutral(traj, path: ChangePath, cls: PathClass) -> int:
    """Connected components of the graph at the neutral state's first
    occupancy (replayed from the recorded start graph).  Descriptive
    output only."""
    target_state = path.states[cls.neutral_index]
    g = traj.start_graph.copy()
    if traj.seed_state != target_state:
        hit = False
        for k in range(len(traj)):
            g.toggle((int(traj.dyads[k, 0]), int(traj.dyads[k, 1])))
            if int(traj.states[k]) == target_state:
                hit = True
                break
        if not hit:
            raise MalformedTrajectoryError("neutral state not found in walk replay")
    seen = [False] * g.n
    comps = 0
    for start in range(g.n):
        if seen[start]:
            continue
        comps += 1
        stack = [start]
        seen[start] = True
        while stack:
            v = stack.pop()
            for w in np.nonzero(g.adj[v])[0].tolist():
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return comps


# ---------------------------------------------------------------------------
# Alignment
# ---------------------------------------------------------------------------


@dataclass
class AlignedCurve:
    """A path's potential and statistics resampled on a common grid.

    ``warp`` maps grid coordinates to the path's own change coordinate;
    it is piecewise linear through ``warp_knots_in`` -> ``warp_knots_out``
    with pinned endpoints and strictly increasing values.
    """

    grid: np.ndarray
    q: np.ndarray
    stats: np.ndarray  # shape (6, len(grid))
    warp_knots_in: np.ndarray
    warp_knots_out: np.ndarray

    def warp(self, x):
        return np.interp(x, self.warp_knots_in, self.warp_knots_out)


_MIN_GAP = 1e-6


def _path_interpolators(path: ChangePath, view: StateStatsView):
    x = np.asarray(path.coords)
    q = np.asarray(path.q)
    svs = np.asarray([view.stats_of(s) for s in path.states], dtype=float)
    f_q = PchipInterpolator(x, q)
    f_stats = [PchipInterpolator(x, svs[:, k]) for k in range(6)]
    return f_q, f_stats


def align(
    paths: list[ChangePath],
    view: StateStatsView,
    grid_size: int = 201,
    knots: int = 9,
    max_sweeps: int = 100,
    tol: float = 1e-6,
) -> list[AlignedCurve]:
    """Warp paths so their potential profiles agree as well as possible.

    Each path's potential-versus-coordinate profile is interpolated by a
    monotone cubic spline; each path gets a monotone piecewise-linear
    warp (``knots`` interior knots, endpoints pinned) optimized by block
    coordinate descent against the mean profile, which is recomputed
    after every sweep.  Descent is enforced: a knot move is kept only if
    it lowers that path's squared error, so the pooled RMSE never rises.
    Stops when a sweep improves pooled RMSE by less than ``tol``.
    """
    if not paths:
        raise EmptyInputError("no paths to align")
    grid = np.linspace(0.0, 1.0, grid_size)
    interp = [_path_interpolators(p, view) for p in paths]
    kin = np.linspace(0.0, 1.0, knots + 2)
    kouts = [kin.copy() for _ in paths]
    if len(paths) == 1:
        f_q, f_stats = interp[0]
        return [_make_curve(grid, f_q, f_stats, kin, kouts[0])]

    qcurves = np.stack([interp[p][0](np.interp(grid, kin, kouts[p])) for p in range(len(paths))])
    pooled = _pooled_rmse(qcurves)
    for _ in range(max_sweeps):
        mean = qcurves.mean(axis=0)
        for p in range(len(paths)):
            f_q = interp[p][0]
            kout = kouts[p]
            for k in range(1, knots + 1):
                lo = kout[k - 1] + _MIN_GAP
                hi = kout[k + 1] - _MIN_GAP
                if lo >= hi:
                    continue
                cur_err = _sq_err(f_q, kin, kout, grid, mean)
                best_v, best_err = kout[k], cur_err
                for v in np.linspace(lo, hi, 17):
                    trial = kout.copy()
                    trial[k] = v
                    err = _sq_err(f_q, kin, trial, grid, mean)
                    if err < best_err:
                        best_err = err
                        best_v = v
                kout[k] = best_v
            qcurves[p] = f_q(np.interp(grid, kin, kout))
        new_pooled = _pooled_rmse(qcurves)
        if new_pooled > pooled + 1e-12:
            raise AssertionError("alignment sweep increased pooled RMSE")
        if pooled - new_pooled < tol:
            pooled = new_pooled
            break
        pooled = new_pooled

    return [
        _make_curve(grid, interp[p][0], interp[p][1], kin, kouts[p])
        for p in range(len(paths))
    ]


def _sq_err(f_q, kin, kout, grid, mean):
    vals = f_q(np.interp(grid, kin, kout))
    diff = vals - mean
    return float(diff @ diff)


def _pooled_rmse(qcurves: np.ndarray) -> float:
    mean = qcurves.mean(axis=0)
    return float(np.sqrt(np.mean((qcurves - mean) ** 2)))


def _make_curve(grid, f_q, f_stats, kin, kout) -> AlignedCurve:
    warped = np.interp(grid, kin, kout)
    return AlignedCurve(
        grid=grid.copy(),
        q=f_q(warped),
        stats=np.stack([f(warped) for f in f_stats]),
        warp_knots_in=kin.copy(),
        warp_knots_out=kout.copy(),
    )


def mean_curves(curves: list[AlignedCurve]) -> AlignedCurve:
    """Pointwise mean potential and mean max-normalized statistics.

    Statistics are normalized per curve (each row divided by its maximum,
    zero rows left at zero) before averaging, so the result's ``stats``
    rows are mean normalized profiles in [0, 1].
    """
    if not curves:
        raise EmptyInputError("no curves to average")
    grid = curves[0].grid
    for c in curves[1:]:
        if len(c.grid) != len(grid) or not np.allclose(c.grid, grid):
            raise DimensionError("curves do not share a grid")
    q = np.mean([c.q for c in curves], axis=0)
    normed = []
    for c in curves:
        m = c.stats.max(axis=1, keepdims=True)
        normed.append(np.where(m > 0, c.stats / np.where(m > 0, m, 1.0), 0.0))
    return AlignedCurve(
        grid=grid.copy(),
        q=q,
        stats=np.mean(normed, axis=0),
        warp_knots_in=curves[0].warp_knots_in.copy(),
        warp_knots_out=np.full_like(curves[0].warp_knots_out, np.nan),
    )


# ---------------------------------------------------------------------------
# Length summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalStats:
    median: float
    q1: float
    q3: float
    notch_lo: float
    notch_hi: float
    n: int


def _interval(values) -> IntervalStats:
    arr = np.asarray(values, dtype=float)
    med = float(np.median(arr))
    q1 = float(np.percentile(arr, 25))
    q3 = float(np.percentile(arr, 75))
    # notched-median interval: median +- 1.57 * IQR / sqrt(n)
    half = 1.57 * (q3 - q1) / math.sqrt(len(arr))
    return IntervalStats(med, q1, q3, med - half, med + half, len(arr))


def length_stats(trajs, paths) -> dict:
    """Per-process walk/path length summaries and walk-to-path ratios.

    ``trajs`` and ``paths`` are parallel; lengths count events and hops
    respectively.  Returns {variant: {"walk": IntervalStats, "path":
    IntervalStats, "ratio_median": float}}.
    """
    if not trajs or len(trajs) != len(paths):
        raise EmptyInputError("need parallel, non-empty trajectory and path lists")
    groups: dict[str, list[tuple[int, int]]] = {}
    for traj, path in zip(trajs, paths):
        groups.setdefault(traj.kind.variant, []).append((traj.walk_length(), path.hops()))
    out = {}
    for variant, pairs in groups.items():
        walks = [w for w, _ in pairs]
        hops = [p for _, p in pairs]
        ratios = [w / p for w, p in pairs]
        out[variant] = {
            "walk": _interval(walks),
            "path": _interval(hops),
            "ratio_median": float(np.median(ratios)),
        }
    return out


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

PATHS_COLUMNS = [
    "traj_id", "egp", "class", "path_len", "walk_len",
    "neutral_edge_count", "tau", "neutral_components",
]


def write_paths_csv(rows, fh) -> None:
    w = csv.writer(fh)
    w.writerow(PATHS_COLUMNS)
    for r in rows:
        w.writerow([
            r["traj_id"], r["egp"], r["class"], r["path_len"], r["walk_len"],
            r["neutral_edge_count"], fmt(r["tau"]), r["neutral_components"],
        ])


CURVE_COLUMNS = ["coord", "q", "n_t_e", "n_t_2s", "n_t_m1", "n_t_m2", "n_t_d1", "n_t_d2"]


def write_curve_csv(curve: AlignedCurve, fh) -> None:
    w = csv.writer(fh)
    w.writerow(CURVE_COLUMNS)
    for k in range(len(curve.grid)):
        w.writerow([
            fmt(float(curve.grid[k])), fmt(float(curve.q[k])),
            *(fmt(float(curve.stats[s, k])) for s in range(6)),
        ])


LENGTH_COLUMNS = ["egp", "kind", "median", "q1", "q3", "notch_lo", "notch_hi"]


def write_lengths_csv(summary: dict, fh) -> None:
    w = csv.writer(fh)
    w.writerow(LENGTH_COLUMNS)
    for variant in sorted(summary):
        for kind in ("walk", "path"):
            s = summary[variant][kind]
            w.writerow([variant, kind, fmt(s.median), fmt(s.q1), fmt(s.q3), fmt(s.notch_lo), fmt(s.notch_hi)])
