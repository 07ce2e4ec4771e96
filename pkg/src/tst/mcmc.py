"""Metropolis edge-toggle sampling of the graph distribution.

One chain step proposes a uniformly random dyad and accepts the toggle
with probability min(1, exp(dq)), where dq is the potential change.  The
acceptance test runs in log space (log u < dq) so extreme potentials
cannot overflow.  Allowable chain moves are exactly single-edge changes,
matching the transition structure assumed by the path analysis.

Chains serve three jobs here: producing overdispersed seed graphs from a
heated (parameter-divided) model, long state-recording runs that feed a
StateSpace accumulator, and rejection sampling of graphs conditioned to
lie in a chosen state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhaustedError
from .graph import Graph, NodeAttributeTable
from .model import DyadTable, StatVector, Theta, stats
from .statespace import StateSpace

_BLOCK = 1 << 15


@dataclass(frozen=True)
class ChainConfig:
    """Chain protocol constants.

    heat divides the parameter vector (heat=1 leaves it unchanged); seed
    is the master seed from which per-chain streams are derived.
    """

    steps: int
    burnin: int = 0
    thin: int = 1
    heat: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.burnin < 0:
            raise ValueError("steps and burnin must be nonnegative")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not self.heat > 0:
            raise ValueError("heat must be positive")


class EdgeToggleSampler:
    """Uniform-dyad Metropolis sampler bound to one (theta, attrs) pair.

    Construct once and reuse: the per-dyad lookup table is built up
    front.  ``step`` performs a single proposal; ``run`` is the tight
    loop used for long chains.  Both mutate the graph in place.
    """

    def __init__(self, theta: Theta, attrs: NodeAttributeTable):
        self.theta = theta
        self.attrs = attrs
        self.table = DyadTable(attrs)
        self._th = theta.as_tuple()

    def step(self, g: Graph, rng: np.random.Generator):
        """One proposal; returns (graph, accepted, dq)."""
        k = int(rng.integers(0, self.table.m))
        u = rng.random()
        masks, deg = self.table.masks_of(g)
        dq = self._dq(masks, deg, k)
        accepted = dq >= 0.0 or np.log1p(-u) < dq
        if accepted:
            g.toggle((self.table.i_of[k], self.table.j_of[k]))
        return g, bool(accepted), dq

    def _dq(self, adj, deg, k: int) -> float:
        the, th2, thm1, thm2, thd1, thd2 = self._th
        t = self.table
        i = t.i_of[k]
        j = t.j_of[k]
        present = (adj[i] >> j) & 1
        common = adj[i] & adj[j]
        dd1 = (common & t.trimask1[k]).bit_count()
        dd2 = (common & t.trimask2[k]).bit_count()
        d2s = deg[i] + deg[j] - (2 if present else 0)
        mag = the + th2 * d2s + thm1 * t.match1[k] + thm2 * t.match2[k] + thd1 * dd1 + thd2 * dd2
        return -mag if present else mag

    def run(self, g: Graph, steps: int, rng: np.random.Generator, sink: StateSpace | None = None) -> Graph:
        """Run ``steps`` proposals, mutating g.

        With a sink, visits and transitions are gathered in local maps and
        merged into the sink afterwards (per-step sink calls would double
        the loop cost).  The seed state is counted once up front, then the
        occupied state once per step: rejected proposals re-count the
        current state, so occupancy reflects time spent, not move counts.
        """
        table = self.table
        the, th2, thm1, thm2, thd1, thd2 = self._th
        i_of = table.i_of
        j_of = table.j_of
        m1_ = table.match1
        m2_ = table.match2
        t1m = table.trimask1
        t2m = table.trimask2
        ndyad = table.m
        adj, deg = table.masks_of(g)

        record = sink is not None
        if record:
            cur = stats(g, self.attrs)
            visits: dict[StatVector, int] = {cur: 1}
            trans: set[tuple[StatVector, StatVector]] = set()

        left = steps
        while left > 0:
            b = min(_BLOCK, left)
            ks = rng.integers(0, ndyad, size=b).tolist()
            lus = np.log1p(-rng.random(size=b)).tolist()
            for s in range(b):
                k = ks[s]
                i = i_of[k]
                j = j_of[k]
                ai = adj[i]
                aj = adj[j]
                present = (ai >> j) & 1
                common = ai & aj
                dd1 = (common & t1m[k]).bit_count()
                dd2 = (common & t2m[k]).bit_count()
                if present:
                    d2s = deg[i] + deg[j] - 2
                    dq = -(the + th2 * d2s + thm1 * m1_[k] + thm2 * m2_[k] + thd1 * dd1 + thd2 * dd2)
                    sign = -1
                else:
                    d2s = deg[i] + deg[j]
                    dq = the + th2 * d2s + thm1 * m1_[k] + thm2 * m2_[k] + thd1 * dd1 + thd2 * dd2
                    sign = 1
                if dq >= 0.0 or lus[s] < dq:
                    adj[i] = ai ^ (1 << j)
                    adj[j] = aj ^ (1 << i)
                    deg[i] += sign
                    deg[j] += sign
                    if record:
                        new = StatVector(
                            cur[0] + sign,
                            cur[1] + sign * d2s,
                            cur[2] + sign * m1_[k],
                            cur[3] + sign * m2_[k],
                            cur[4] + sign * dd1,
                            cur[5] + sign * dd2,
                        )
                        trans.add((cur, new) if cur < new else (new, cur))
                        cur = new
                if record:
                    c = visits.get(cur)
                    visits[cur] = 1 if c is None else c + 1
            left -= b

        if record:
            for sv, cnt in visits.items():
                sink.accumulate(sv, cnt)
            for a, b2 in sorted(trans):
                sink.record_transition(a, b2)
        _write_back(g, adj)
        return g


def _write_back(g: Graph, masks) -> None:
    n = g.n
    for i in range(n):
        m = masks[i]
        row = g.adj[i]
        for j in range(n):
            row[j] = (m >> j) & 1
    np.copyto(g.deg, g.adj.sum(axis=1))


def metropolis_step(g: Graph, theta: Theta, attrs: NodeAttributeTable, rng: np.random.Generator):
    """Single Metropolis step; convenience wrapper.

    Builds the dyad table on every call: use EdgeToggleSampler directly
    for loops.
    """
    return EdgeToggleSampler(theta, attrs).step(g, rng)


def run_recording_chain(
    seed_graph: Graph,
    theta: Theta,
    attrs: NodeAttributeTable,
    steps: int,
    sink: StateSpace,
    rng: np.random.Generator,
) -> None:
    """Record every visited state (occupancy) and accepted move into sink."""
    EdgeToggleSampler(theta, attrs).run(seed_graph, steps, rng, sink=sink)


def sample_heated_seeds(
    theta: Theta,
    attrs: NodeAttributeTable,
    cfg: ChainConfig,
    count: int,
    rng: np.random.Generator,
) -> list[Graph]:
    """Overdispersed seed graphs from one chain at theta / heat.

    The flattened potential keeps the overall landscape shape while
    letting the chain mix across the whole graph space; after cfg.burnin
    steps from the empty graph, a snapshot is taken every cfg.thin steps.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sampler = EdgeToggleSampler(theta.scaled(1.0 / cfg.heat), attrs)
    g = Graph(attrs.n)
    sampler.run(g, cfg.burnin, rng)
    seeds = []
    for _ in range(count):
        sampler.run(g, cfg.thin, rng)
        seeds.append(g.copy())
    return seeds


def rejection_sample_state(
    theta: Theta,
    attrs: NodeAttributeTable,
    target,
    count: int,
    cfg: ChainConfig,
    rng: np.random.Generator,
    batch: int = 500,
    max_draws: int = 10_000,
) -> list[Graph]:
    """Thinned chain draws filtered to a state predicate.

    ``target`` is any predicate over StatVector.  Draws are taken in
    batches of ``batch`` (each draw costs cfg.thin steps) and the chain is
    extended until ``count`` draws satisfy the predicate.  Raises
    BudgetExhaustedError (with the observed acceptance rate) if
    ``max_draws`` thinned draws are exhausted first.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sampler = EdgeToggleSampler(theta, attrs)
    g = Graph(attrs.n)
    sampler.run(g, cfg.burnin, rng)
    kept: list[Graph] = []
    drawn = 0
    while len(kept) < count:
        if drawn >= max_draws:
            raise BudgetExhaustedError(
                f"rejection sampler kept {len(kept)}/{count} after {drawn} draws",
                acceptance_rate=len(kept) / drawn,
                kept=len(kept),
                draws=drawn,
            )
        for _ in range(min(batch, max_draws - drawn)):
            sampler.run(g, cfg.thin, rng)
            drawn += 1
            if target(stats(g, attrs)):
                kept.append(g.copy())
                if len(kept) == count:
                    break
    return kept[:count]
