"""Undirected labeled graphs with binary node attributes.

Graphs are simple (no self-loops, no multi-edges) on a fixed node set
0..n-1.  Adjacency is stored densely as a boolean matrix plus a degree
array: at the sizes this package targets (tens of nodes) dense storage is
optimal and makes single-edge toggles O(1).  Node indices are 0-based in
memory; the file readers accept an index base for 1-based sources.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DimensionError, InvalidDesignError, InvalidDyadError

Dyad = tuple  # canonical (i, j) with i < j


def as_dyad(i: int, j: int, n: int) -> Dyad:
    """Validate and canonicalize a node pair.

    Raises InvalidDyadError for self-loops or out-of-range indices.
    """
    i = int(i)
    j = int(j)
    if i == j:
        raise InvalidDyadError(f"self-loop dyad ({i}, {j})")
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidDyadError(f"dyad ({i}, {j}) out of range for n={n}")
    return (i, j) if i < j else (j, i)


class NodeAttributeTable:
    """Two binary attributes per node.

    Values must be 0/1.  The table is immutable after construction and can
    be shared freely between workers.
    """

    __slots__ = ("n", "b1", "b2")

    def __init__(self, b1, b2):
        b1 = np.asarray(b1, dtype=np.int8)
        b2 = np.asarray(b2, dtype=np.int8)
        if b1.ndim != 1 or b2.ndim != 1 or len(b1) != len(b2):
            raise DimensionError("attribute vectors must be 1-D and equal length")
        for name, v in (("b1", b1), ("b2", b2)):
            if not np.isin(v, (0, 1)).all():
                raise InvalidDesignError(f"{name} values must be 0 or 1")
        self.n = len(b1)
        self.b1 = b1
        self.b1.setflags(write=False)
        self.b2 = b2
        self.b2.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, NodeAttributeTable)
            and self.n == other.n
            and bool((self.b1 == other.b1).all())
            and bool((self.b2 == other.b2).all())
        )

    def __repr__(self):
        return f"NodeAttributeTable(n={self.n})"


def make_faction_attributes(n: int) -> NodeAttributeTable:
    """Balanced, orthogonal two-attribute design.

    Nodes are assigned by quarters: 0..n/4-1 -> (0,0), then (0,1), (1,0),
    (1,1).  Each attribute splits the group exactly in half and the two
    attributes are exactly uncorrelated.  Requires n divisible by 4.
    """
    if n <= 0 or n % 4 != 0:
        raise InvalidDesignError(f"balanced design needs n divisible by 4, got {n}")
    q = n // 4
    b1 = [0] * (2 * q) + [1] * (2 * q)
    b2 = ([0] * q + [1] * q) * 2
    return NodeAttributeTable(b1, b2)


class Graph:
    """Undirected simple graph with O(1) edge toggling.

    ``adj`` is a symmetric boolean matrix with a zero diagonal; ``deg``
    holds node degrees.  ``toggle`` mutates in place and returns self;
    use ``copy()`` when the previous value must be preserved.
    """

    __slots__ = ("n", "adj", "deg")

    def __init__(self, n: int):
        if n < 1:
            raise DimensionError(f"graph needs at least one node, got n={n}")
        self.n = int(n)
        self.adj = np.zeros((n, n), dtype=bool)
        self.deg = np.zeros(n, dtype=np.int64)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        g = cls(n)
        for i, j in edges:
            d = as_dyad(i, j, n)
            if not g.adj[d[0], d[1]]:
                g.toggle(d)
        return g

    def copy(self) -> "Graph":
        g = Graph.__new__(Graph)
        g.n = self.n
        g.adj = self.adj.copy()
        g.deg = self.deg.copy()
        return g

    def has_edge(self, i: int, j: int) -> bool:
        i, j = as_dyad(i, j, self.n)
        return bool(self.adj[i, j])

    def toggle(self, d) -> "Graph":
        """Flip the presence of edge d=(i, j); returns this graph."""
        i, j = as_dyad(d[0], d[1], self.n)
        present = self.adj[i, j]
        self.adj[i, j] = self.adj[j, i] = not present
        step = -1 if present else 1
        self.deg[i] += step
        self.deg[j] += step
        return self

    def edge_count(self) -> int:
        return int(self.deg.sum()) // 2

    def edges(self):
        """Edges as sorted canonical (i, j) pairs."""
        ii, jj = np.nonzero(np.triu(self.adj, k=1))
        return list(zip(ii.tolist(), jj.tolist()))

    def neighbor_masks(self):
        """Adjacency rows packed as python ints (bit k = neighbor k)."""
        masks = []
        for i in range(self.n):
            m = 0
            for j in np.nonzero(self.adj[i])[0].tolist():
                m |= 1 << j
            masks.append(m)
        return masks

    @classmethod
    def from_neighbor_masks(cls, n: int, masks) -> "Graph":
        g = cls(n)
        for i in range(n):
            m = masks[i]
            for j in range(i + 1, n):
                if (m >> j) & 1:
                    g.toggle((i, j))
        return g

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and bool((self.adj == other.adj).all())
        )

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count()})"


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------
#
# Edge list: a header line "n=<N>" followed by one "i j" pair per line,
# 0-based by default.  A file may hold several graphs as blank-line
# separated blocks, each with its own header.
# Attributes: CSV with columns node,b1,b2.


def write_edgelist(g: Graph, fh, index_base: int = 0) -> None:
    fh.write(f"n={g.n}\n")
    for i, j in g.edges():
        fh.write(f"{i + index_base} {j + index_base}\n")


def read_edgelist(fh, index_base: int = 0) -> Graph:
    graphs = read_graph_blocks(fh, index_base)
    if len(graphs) != 1:
        raise DimensionError(f"expected a single graph block, found {len(graphs)}")
    return graphs[0]


def write_graph_blocks(graphs, fh, index_base: int = 0) -> None:
    for k, g in enumerate(graphs):
        if k:
            fh.write("\n")
        write_edgelist(g, fh, index_base)


def read_graph_blocks(fh, index_base: int = 0):
    graphs = []
    g = None
    for raw in fh:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("n="):
            g = Graph(int(line[2:]))
            graphs.append(g)
            continue
        if g is None:
            raise DimensionError("edge line before n=<N> header")
        parts = line.split()
        if len(parts) != 2:
            raise DimensionError(f"malformed edge line: {line!r}")
        i, j = (int(p) - index_base for p in parts)
        g.toggle(as_dyad(i, j, g.n))
    return graphs


def write_attributes(attrs: NodeAttributeTable, fh, index_base: int = 0) -> None:
    w = csv.writer(fh)
    w.writerow(["node", "b1", "b2"])
    for k in range(attrs.n):
        w.writerow([k + index_base, int(attrs.b1[k]), int(attrs.b2[k])])


def read_attributes(fh, index_base: int = 0) -> NodeAttributeTable:
    rows = list(csv.DictReader(fh))
    if not rows:
        raise DimensionError("empty attribute file")
    b1 = [0] * len(rows)
    b2 = [0] * len(rows)
    for row in rows:
        k = int(row["node"]) - index_base
        if not 0 <= k < len(rows):
            raise DimensionError(f"node index {k} out of range")
        b1[k] = int(row["b1"])
        b2[k] = int(row["b2"])
    return NodeAttributeTable(b1, b2)
