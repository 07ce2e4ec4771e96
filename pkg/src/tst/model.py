"""Graph statistics, model parameters, and the graph potential.

The model is an exponential-family distribution over graphs with six
sufficient statistics: edge count, 2-star count, per-attribute matched
edge counts, and per-attribute fully-matched triangle counts.  The
potential of a graph is the dot product of the parameter vector with its
statistic vector; graph probability is proportional to exp(potential).

Statistics are exact integers (states are keyed by them and must hash
exactly); the potential is the only floating-point quantity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError
from .graph import Graph, NodeAttributeTable, as_dyad


class StatVector(NamedTuple):
    """The six sufficient statistics of a graph (or a signed difference
    of two such vectors)."""

    t_e: int
    t_2s: int
    t_m1: int
    t_m2: int
    t_d1: int
    t_d2: int

    def add(self, other: "StatVector") -> "StatVector":
        return StatVector(*(a + b for a, b in zip(self, other)))

    def sub(self, other: "StatVector") -> "StatVector":
        return StatVector(*(a - b for a, b in zip(self, other)))

FIELD_NAMES = StatVector._fields


@dataclass(frozen=True)
class Theta:
    """Model parameters, one per statistic."""

    edge: float
    twostar: float
    match_b1: float
    match_b2: float
    tri_b1: float
    tri_b2: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if not np.isfinite(v):
                raise ValueError(f"theta.{name} must be finite, got {v}")

    def as_tuple(self):
        return (self.edge, self.twostar, self.match_b1, self.match_b2, self.tri_b1, self.tri_b2)

    def as_dict(self):
        return {
            "edge": self.edge,
            "twostar": self.twostar,
            "match_b1": self.match_b1,
            "match_b2": self.match_b2,
            "tri_b1": self.tri_b1,
            "tri_b2": self.tri_b2,
        }

    def scaled(self, factor: float) -> "Theta":
        return Theta(*(x * factor for x in self.as_tuple()))


def stats(g: Graph, attrs: NodeAttributeTable) -> StatVector:
    """Exact statistic vector of a graph.

    Raises DimensionError if the graph and attribute table disagree on n.
    """
    if g.n != attrs.n:
        raise DimensionError(f"graph has n={g.n}, attributes have n={attrs.n}")
    adj = g.adj
    deg = g.deg
    t_e = int(deg.sum()) // 2
    t_2s = int((deg * (deg - 1) // 2).sum())
    upper = np.triu(adj, k=1)
    m1 = attrs.b1[:, None] == attrs.b1[None, :]
    m2 = attrs.b2[:, None] == attrs.b2[None, :]
    t_m1 = int((upper & m1).sum())
    t_m2 = int((upper & m2).sum())
    t_d1 = _matched_triangles(adj, attrs.b1)
    t_d2 = _matched_triangles(adj, attrs.b2)
    return StatVector(t_e, t_2s, t_m1, t_m2, t_d1, t_d2)


def _matched_triangles(adj: np.ndarray, attr: np.ndarray) -> int:
    # triangles whose three nodes share the attribute value: count within
    # each attribute class separately
    total = 0
    for v in (0, 1):
        sel = attr == v
        a = adj[np.ix_(sel, sel)].astype(np.int64)
        total += int(np.trace(a @ a @ a)) // 6
    return total


def potential(theta: Theta, t: StatVector) -> float:
    """theta . t as a float."""
    return float(sum(c * x for c, x in zip(theta.as_tuple(), t)))


def change_stats(g: Graph, attrs: NodeAttributeTable, d) -> StatVector:
    """Signed statistic change for toggling dyad d on g.

    Equals stats(toggle(g, d)) - stats(g) without evaluating either side:
    O(n) via the common neighborhood of the dyad.
    """
    if g.n != attrs.n:
        raise DimensionError(f"graph has n={g.n}, attributes have n={attrs.n}")
    i, j = as_dyad(d[0], d[1], g.n)
    present = bool(g.adj[i, j])
    sign = -1 if present else 1
    # 2-star delta counts pairs at i and j on the graph without the edge
    d2s = int(g.deg[i] + g.deg[j]) - (2 if present else 0)
    m1 = int(attrs.b1[i] == attrs.b1[j])
    m2 = int(attrs.b2[i] == attrs.b2[j])
    common = g.adj[i] & g.adj[j]
    dd1 = int((common & (attrs.b1 == attrs.b1[i])).sum()) if m1 else 0
    dd2 = int((common & (attrs.b2 == attrs.b2[i])).sum()) if m2 else 0
    return StatVector(sign, sign * d2s, sign * m1, sign * m2, sign * dd1, sign * dd2)


class DyadTable:
    """Precomputed per-dyad lookups for tight sampling loops.

    Dyads are enumerated in lexicographic (i < j) order.  For each dyad
    the table stores the endpoints, attribute-match flags, and the bitmask
    of nodes sharing the relevant attribute value (zero when the endpoints
    do not match), so a single-toggle statistic change reduces to two
    popcounts and a degree sum over python ints.
    """

    __slots__ = (
        "n", "m", "i_of", "j_of", "match1", "match2",
        "trimask1", "trimask2", "pair_index", "attrs",
    )

    def __init__(self, attrs: NodeAttributeTable):
        n = attrs.n
        b1 = attrs.b1.tolist()
        b2 = attrs.b2.tolist()
        mask1 = [sum(1 << k for k in range(n) if b1[k] == v) for v in (0, 1)]
        mask2 = [sum(1 << k for k in range(n) if b2[k] == v) for v in (0, 1)]
        self.n = n
        self.attrs = attrs
        self.i_of = []
        self.j_of = []
        self.match1 = []
        self.match2 = []
        self.trimask1 = []
        self.trimask2 = []
        self.pair_index = [[-1] * n for _ in range(n)]
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                self.i_of.append(i)
                self.j_of.append(j)
                self.match1.append(1 if b1[i] == b1[j] else 0)
                self.match2.append(1 if b2[i] == b2[j] else 0)
                self.trimask1.append(mask1[b1[i]] if b1[i] == b1[j] else 0)
                self.trimask2.append(mask2[b2[i]] if b2[i] == b2[j] else 0)
                self.pair_index[i][j] = k
                self.pair_index[j][i] = k
                k += 1
        self.m = k

    def masks_of(self, g: Graph):
        """Kernel state: (neighbor bitmask list, degree list)."""
        if g.n != self.n:
            raise DimensionError(f"graph has n={g.n}, table has n={self.n}")
        return g.neighbor_masks(), g.deg.tolist()

    def signed_delta(self, adj, deg, k: int) -> StatVector:
        """change_stats for dyad index k against kernel state (adj, deg)."""
        i = self.i_of[k]
        j = self.j_of[k]
        present = (adj[i] >> j) & 1
        sign = -1 if present else 1
        d2s = deg[i] + deg[j] - (2 if present else 0)
        common = adj[i] & adj[j]
        dd1 = (common & self.trimask1[k]).bit_count()
        dd2 = (common & self.trimask2[k]).bit_count()
        return StatVector(
            sign, sign * d2s, sign * self.match1[k], sign * self.match2[k],
            sign * dd1, sign * dd2,
        )

    def stats_of_masks(self, adj, deg) -> StatVector:
        """Full recount from kernel state (used for periodic self-checks)."""
        t = [0] * 6
        for k in range(self.m):
            i = self.i_of[k]
            j = self.j_of[k]
            if (adj[i] >> j) & 1:
                t[0] += 1
                t[2] += self.match1[k]
                t[3] += self.match2[k]
                common = adj[i] & adj[j]
                t[4] += (common & self.trimask1[k]).bit_count()
                t[5] += (common & self.trimask2[k]).bit_count()
        t[1] = sum(d * (d - 1) // 2 for d in deg)
        t[4] //= 3  # each matched triangle counted once per edge
        t[5] //= 3
        return StatVector(*t)
