"""Observed state space: occupancy counts and the transition structure.

Sampled graphs are collapsed into states keyed by their exact statistic
vector.  Each state's probability is estimated by its occupancy frequency
(every chain step counts, accepted or not), and single-toggle moves
observed between states define a symmetric adjacency over states.  Only
states that were actually visited exist here; path search operates on
this observed subspace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .errors import DimensionError, EmptySpaceError, RegimeNotFoundError
from .model import StatVector, Theta, potential


@dataclass
class StateRecord:
    id: int
    stats: StatVector
    count: int
    q: float
    logp: float = math.nan


class StateSpace:
    """Accumulator for states, occupancy counts, and transitions.

    Build by repeated ``accumulate``/``record_transition`` (or by merging
    per-chain partial accumulators, in a fixed order for reproducible
    ids), then ``finalize_probs`` once before any probability lookups.
    """

    def __init__(self, theta: Theta):
        self.theta = theta
        self.records: dict[StatVector, StateRecord] = {}
        self.by_id: list[StateRecord] = []
        self.transitions: set[tuple[int, int]] = set()
        self.total = 0
        self.finalized = False
        self._adjacency: list[list[int]] | None = None

    def __len__(self):
        return len(self.by_id)

    # -- construction -------------------------------------------------

    def accumulate(self, visit: StatVector, count: int = 1) -> "StateSpace":
        """Count ``count`` occupancy observations of a state, creating its
        record (with the next dense id) on first visit."""
        rec = self.records.get(visit)
        if rec is None:
            visit = StatVector(*(int(x) for x in visit))
            rec = StateRecord(len(self.by_id), visit, 0, potential(self.theta, visit))
            self.records[visit] = rec
            self.by_id.append(rec)
        rec.count += count
        self.total += count
        self.finalized = False
        return self

    def record_transition(self, s: StatVector, s2: StatVector) -> "StateSpace":
        """Record an observed single-toggle move between two states.

        Stored symmetrically and idempotently; self-transitions are
        ignored (they carry no path information).  Both endpoints must
        already have records.
        """
        if s == s2:
            return self
        a = self.records[StatVector(*s)].id
        b = self.records[StatVector(*s2)].id
        self.transitions.add((a, b) if a < b else (b, a))
        self._adjacency = None
        return self

    def merge(self, other: "StateSpace") -> "StateSpace":
        """Fold another accumulator into this one (associative and
        commutative up to id assignment, which follows merge order)."""
        if other.theta != self.theta:
            raise DimensionError("cannot merge spaces with different parameters")
        for rec in other.by_id:
            self.accumulate(rec.stats, rec.count)
        for a, b in sorted(other.transitions):
            self.record_transition(other.by_id[a].stats, other.by_id[b].stats)
        return self

    def finalize_probs(self) -> "StateSpace":
        """Set logp = log(count) - log(total occupancy) on every record."""
        if self.total <= 0 or not self.by_id:
            raise EmptySpaceError("no observations accumulated")
        logtot = math.log(self.total)
        for rec in self.by_id:
            rec.logp = math.log(rec.count) - logtot
        self.finalized = True
        return self

    # -- lookups ------------------------------------------------------

    def id_of(self, sv: StatVector) -> int | None:
        rec = self.records.get(StatVector(*sv))
        return None if rec is None else rec.id

    def stats_of(self, sid: int) -> StatVector:
        return self.by_id[sid].stats

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists over state ids (built lazily, cached)."""
        if self._adjacency is None:
            adj: list[list[int]] = [[] for _ in self.by_id]
            for a, b in sorted(self.transitions):
                adj[a].append(b)
                adj[b].append(a)
            self._adjacency = adj
        return self._adjacency

    def find_aligned_states(self, hi: int = 80, lo: int = 50):
        """Highest-probability state in each alignment regime.

        A state is b1-aligned when t_m1 > hi and t_m2 < lo, and
        symmetrically for b2.  Returns (b1_aligned, b2_aligned) records;
        ties on count break toward the smaller id.  Raises
        RegimeNotFoundError if either regime has no sampled state.
        """
        if not self.finalized:
            raise EmptySpaceError("finalize_probs before selecting states")
        best1 = best2 = None
        for rec in self.by_id:
            sv = rec.stats
            if sv.t_m1 > hi and sv.t_m2 < lo:
                if best1 is None or rec.count > best1.count:
                    best1 = rec
            if sv.t_m2 > hi and sv.t_m1 < lo:
                if best2 is None or rec.count > best2.count:
                    best2 = rec
        if best1 is None:
            raise RegimeNotFoundError(f"no state with t_m1 > {hi} and t_m2 < {lo}")
        if best2 is None:
            raise RegimeNotFoundError(f"no state with t_m2 > {hi} and t_m1 < {lo}")
        return best1, best2


# ---------------------------------------------------------------------------
# Persistence: states.csv / transitions.csv
# ---------------------------------------------------------------------------

STATE_COLUMNS = ["id", "t_e", "t_2s", "t_m1", "t_m2", "t_d1", "t_d2", "count", "q", "logp"]


def fmt(x) -> str:
    """Shortest round-trip decimal form (deterministic across runs)."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def save_states_csv(space: StateSpace, fh) -> None:
    w = csv.writer(fh)
    w.writerow(STATE_COLUMNS)
    for rec in space.by_id:
        w.writerow(
            [rec.id, *rec.stats, rec.count, fmt(rec.q), fmt(rec.logp)]
        )


def save_transitions_csv(space: StateSpace, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["src_id", "dst_id"])
    for a, b in sorted(space.transitions):
        w.writerow([a, b])


def load_space(states_fh, transitions_fh, theta: Theta) -> StateSpace:
    """Rebuild a finalized StateSpace from its two CSV files."""
    space = StateSpace(theta)
    for row in csv.DictReader(states_fh):
        sv = StatVector(*(int(row[c]) for c in STATE_COLUMNS[1:7]))
        rec = StateRecord(int(row["id"]), sv, int(row["count"]), float(row["q"]), float(row["logp"]))
        if rec.id != len(space.by_id):
            raise DimensionError("states file not sorted by dense id")
        space.records[sv] = rec
        space.by_id.append(rec)
        space.total += rec.count
    for row in csv.DictReader(transitions_fh):
        a, b = int(row["src_id"]), int(row["dst_id"])
        space.transitions.add((a, b) if a < b else (b, a))
    space.finalized = True
    return space
