"""Directed communication graphs and the graph conditions learning depends on.

Edge ``(i, j)`` means agent ``i`` transmits to agent ``j``.  Consequently the
*neighbors* of ``j`` are its **in-neighbors**: the agents it hears from.  Every
function here uses that convention; getting the direction backwards is the
single easiest way to break the robustness checks.
"""

from __future__ import annotations

import os
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

from .exceptions import CapacityError, InputError

Edge = Tuple[int, int]

BRUTE_FORCE_MAX_NODES = 20


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable directed graph on agents ``0 .. node_count - 1``."""

    node_count: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        n = self.node_count
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise InputError(f"node_count must be a positive integer, got {n!r}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i}, {j}) has an endpoint outside 0..{n - 1}")
            if i == j:
                raise InputError(f"self-loop at node {i} is not allowed")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> "DirectedGraph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    @cached_property
    def in_neighbors(self) -> Tuple[FrozenSet[int], ...]:
        acc: List[Set[int]] = [set() for _ in self.nodes]
        for i, j in self.edges:
            acc[j].add(i)
        return tuple(frozenset(s) for s in acc)

    @cached_property
    def out_neighbors(self) -> Tuple[FrozenSet[int], ...]:
        acc: List[Set[int]] = [set() for _ in self.nodes]
        for i, j in self.edges:
            acc[i].add(j)
        return tuple(frozenset(s) for s in acc)

    def in_degree(self, i: int) -> int:
        return len(self.in_neighbors[_check_node(self, i)])

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def symmetrized(self) -> "DirectedGraph":
        """Return the graph with every edge made bidirectional."""
        return DirectedGraph(self.node_count, self.edges | {(j, i) for i, j in self.edges})

    def without_edges(self, edges: Iterable[Edge]) -> "DirectedGraph":
        return DirectedGraph(self.node_count, self.edges - {tuple(e) for e in edges})


def _check_node(g: DirectedGraph, i: int) -> int:
    if not 0 <= i < g.node_count:
        raise InputError(f"agent id {i} out of range 0..{g.node_count - 1}")
    return i


def _check_subset(g: DirectedGraph, nodes: Iterable[int], what: str) -> FrozenSet[int]:
    s = frozenset(int(v) for v in nodes)
    bad = sorted(v for v in s if not 0 <= v < g.node_count)
    if bad:
        raise InputError(f"{what} contains ids outside 0..{g.node_count - 1}: {bad}")
    return s


def _check_r(r: int) -> int:
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        raise InputError(f"r must be a positive integer, got {r!r}")
    return r


def neighbors(g: DirectedGraph, i: int) -> FrozenSet[int]:
    """Agents that transmit *to* ``i``, i.e. ``{j : (j, i) in edges}``."""
    return g.in_neighbors[_check_node(g, i)]


def reachable_from(g: DirectedGraph, sources: Iterable[int]) -> FrozenSet[int]:
    """All nodes with a directed path from some node of ``sources`` (sources included)."""
    start = _check_subset(g, sources, "sources")
    seen = set(start)
    queue = deque(start)
    while queue:
        u = queue.popleft()
        for v in g.out_neighbors[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def is_reachable(g: DirectedGraph, sources: Iterable[int], targets: Iterable[int]) -> bool:
    """True iff every target has a directed path from at least one source."""
    src = _check_subset(g, sources, "sources")
    tgt = _check_subset(g, targets, "targets")
    if src & tgt:
        raise InputError(f"sources and targets overlap on {sorted(src & tgt)}")
    if not tgt:
        return True
    return tgt <= reachable_from(g, src)


def _bfs_distances(g: DirectedGraph, u: int) -> dict:
    dist = {u: 0}
    queue = deque([u])
    while queue:
        a = queue.popleft()
        for b in g.out_neighbors[a]:
            if b not in dist:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def diameter(g: DirectedGraph) -> Optional[int]:
    """Longest shortest path over ordered pairs that are connected.

    Returns ``None`` ("unbounded") when no ordered pair of distinct nodes is
    connected.  A single-node graph has diameter 0.  Diagnostic only.
    """
    if g.node_count == 1:
        return 0
    best = None
    for u in g.nodes:
        far = max(_bfs_distances(g, u).values())
        if far > 0 and (best is None or far > best):
            best = far
    return best


def is_r_reachable(g: DirectedGraph, C: Iterable[int], r: int) -> bool:
    """True iff some ``i`` in ``C`` has at least ``r`` neighbors outside ``C``."""
    c = _check_subset(g, C, "C")
    if not c:
        raise InputError("C must be non-empty")
    _check_r(r)
    return any(len(g.in_neighbors[i] - c) >= r for i in c)


def percolation_layers(g: DirectedGraph, S: Iterable[int], r: int) -> List[FrozenSet[int]]:
    """Bootstrap-percolation layers started from ``S`` with threshold ``r``.

    Layer 0 is ``S``; layer ``k`` holds the inactive nodes with at least ``r``
    neighbors in the union of layers ``0..k-1``.  Stops at the fixpoint, so the
    union of the layers is the final active set.  Counter-based, O(|V| + |E|).
    """
    active = _check_subset(g, S, "S")
    _check_r(r)
    if not active:
        return [frozenset()]
    hits = [0] * g.node_count
    seen = set(active)
    layers = [frozenset(active)]
    current = layers[0]
    while True:
        nxt = set()
        for u in current:
            for v in g.out_neighbors[u]:
                if v in seen:
                    continue
                hits[v] += 1
                if hits[v] >= r:
                    nxt.add(v)
        if not nxt:
            return layers
        seen |= nxt
        current = frozenset(nxt)
        layers.append(current)


def stalled_set(g: DirectedGraph, S: Iterable[int], r: int) -> FrozenSet[int]:
    """Nodes never activated by percolation from ``S``; empty iff strongly r-robust."""
    active = frozenset().union(*percolation_layers(g, S, r))
    return frozenset(g.nodes) - active


def is_strongly_r_robust(g: DirectedGraph, S: Iterable[int], r: int) -> bool:
    """Strong r-robustness w.r.t. ``S``, decided by bootstrap percolation."""
    return not stalled_set(g, S, r)


def brute_force_strongly_r_robust(g: DirectedGraph, S: Iterable[int], r: int) -> bool:
    """Exponential oracle: check r-reachability of every non-empty ``C`` outside ``S``."""
    if g.node_count > BRUTE_FORCE_MAX_NODES:
        raise CapacityError(
            f"brute-force robustness is limited to {BRUTE_FORCE_MAX_NODES} nodes, got {g.node_count}"
        )
    s = _check_subset(g, S, "S")
    _check_r(r)
    rest = [v for v in g.nodes if v not in s]
    nb_mask = [sum(1 << j for j in g.in_neighbors[i]) for i in g.nodes]
    for bits in range(1, 1 << len(rest)):
        cmask = 0
        members = []
        for k, v in enumerate(rest):
            if bits >> k & 1:
                cmask |= 1 << v
                members.append(v)
        if not any((nb_mask[i] & ~cmask).bit_count() >= r for i in members):
            return False
    return True


# -- generators -------------------------------------------------------------

def path_graph(n: int, bidirectional: bool = False) -> DirectedGraph:
    g = DirectedGraph(n, frozenset((i, i + 1) for i in range(n - 1)))
    return g.symmetrized() if bidirectional else g


def cycle_graph(n: int, bidirectional: bool = False) -> DirectedGraph:
    if n < 2:
        raise InputError("a cycle needs at least 2 nodes")
    edges = {(i, (i + 1) % n) for i in range(n)}
    g = DirectedGraph(n, frozenset(edges))
    return g.symmetrized() if bidirectional else g


def complete_graph(n: int) -> DirectedGraph:
    """Bidirectional complete graph."""
    return DirectedGraph(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))


def circulant_graph(n: int, offsets: Iterable[int]) -> DirectedGraph:
    """Bidirectional circulant graph: ``i`` linked with ``i +/- k`` for each offset."""
    edges = set()
    for k in offsets:
        for i in range(n):
            j = (i + k) % n
            if i != j:
                edges.add((i, j))
                edges.add((j, i))
    return DirectedGraph(n, frozenset(edges))


def random_digraph(n: int, p: float, seed: int) -> DirectedGraph:
    """Each ordered pair ``(i, j)``, ``i != j``, is an edge independently with prob. ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"edge probability must lie in [0, 1], got {p}")
    rnd = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and rnd.random() < p]
    return DirectedGraph(n, frozenset(edges))


GENERATORS = {
    "path": path_graph,
    "cycle": cycle_graph,
    "complete": complete_graph,
    "circulant": circulant_graph,
    "random": random_digraph,
}


# -- edge-list text format ---------------------------------------------------

def parse_edge_list(text: str) -> DirectedGraph:
    """Parse ``n=<count>`` followed by one ``i j`` pair per line.

    Blank lines and ``#`` comments are ignored.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            key, sep, value = line.partition("=")
            if not sep or key.strip() != "n":
                raise InputError(f"line {lineno}: expected header 'n=<count>', got {raw!r}")
            try:
                n = int(value)
            except ValueError:
                raise InputError(f"line {lineno}: node count {value.strip()!r} is not an integer") from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise InputError(f"line {lineno}: non-integer agent id in {raw!r}") from None
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise InputError(f"line {lineno}: invalid edge {raw.strip()!r} for n={n}")
        edges.append((i, j))
    if n is None:
        raise InputError("missing 'n=<count>' header")
    return DirectedGraph.from_edges(n, edges)


def format_edge_list(g: DirectedGraph) -> str:
    lines = [f"n={g.node_count}"]
    lines.extend(f"{i} {j}" for i, j in g.sorted_edges())
    return "\n".join(lines) + "\n"


def read_edge_list(path: "os.PathLike[str] | str") -> DirectedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read())
