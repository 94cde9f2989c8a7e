"""Small graph utilities shared by the automata and oracle layers.

Graphs are adjacency dicts ``u -> [(v, labels), ...]`` where ``labels`` is a
frozenset of hashable tags carried by that edge (parallel edges with
different labels are real).  The central operation finds a reachable lasso
whose loop covers a required set of tags: generalized Büchi acceptance
with both node- and edge-based conditions.  Paths are returned as edge
lists ``(u, labels, v)`` so callers can recover which parallel edge ran.
"""

from __future__ import annotations

from typing import Callable, Hashable, Iterable


class ResourceCap(RuntimeError):
    """A construction outgrew its configured state cap."""


def tarjan_sccs(adj: dict, starts: Iterable) -> list:
    """Strongly connected components reachable from ``starts`` (iterative)."""
    index: dict = {}
    low: dict = {}
    on: set = set()
    stack: list = []
    counter = [0]
    comps: list = []

    def visit(root):
        work = [(root, iter(adj.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on.add(root)
        while work:
            node, it = work[-1]
            pushed = False
            for (w, _labels) in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(adj.get(w, ()))))
                    pushed = True
                    break
                if w in on:
                    low[node] = min(low[node], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                comps.append(comp)

    for s in starts:
        if s not in index:
            visit(s)
    return comps


def bfs_edges(adj: dict, sources: Iterable, goal: Callable, restrict=None):
    """Shortest edge path from a source to a node satisfying ``goal``.

    Returns ``(edges, node)`` where ``edges`` is a (possibly empty) list of
    ``(u, labels, v)`` triples, or ``None`` when unreachable.
    """
    sources = [s for s in sources if restrict is None or s in restrict]
    parent: dict = {s: None for s in sources}
    for s in sources:
        if goal(s):
            return [], s
    frontier = sources
    while frontier:
        nxt = []
        for u in frontier:
            for (v, labels) in adj.get(u, ()):
                if v in parent or (restrict is not None and v not in restrict):
                    continue
                parent[v] = (u, labels)
                if goal(v):
                    return _unwind(parent, v), v
                nxt.append(v)
        frontier = nxt
    return None


def _unwind(parent, node) -> list:
    edges = []
    while parent[node] is not None:
        u, labels = parent[node]
        edges.append((u, labels, node))
        node = u
    edges.reverse()
    return edges


def find_accepting_lasso(
    adj: dict,
    starts: Iterable,
    required: Iterable[Hashable] = (),
    node_tags: Callable[[Hashable], frozenset] | None = None,
):
    """Search for a reachable lasso whose loop covers all required tags.

    A tag is covered if some loop node carries it (per ``node_tags``) or
    some traversed loop edge carries it.  Returns ``(stem_edges,
    loop_edges)`` with a nonempty closed loop, or ``None``.  With no
    requirements any reachable cycle qualifies.
    """
    starts = list(starts)
    required = list(required)
    tags_of = node_tags or (lambda n: frozenset())

    for comp in tarjan_sccs(adj, starts):
        internal = [
            (u, labels, v)
            for u in comp
            for (v, labels) in adj.get(u, ())
            if v in comp
        ]
        if not internal:
            continue
        covered = set()
        for u in comp:
            covered.update(t for t in required if t in tags_of(u))
        for (_u, labels, _v) in internal:
            covered.update(t for t in required if t in labels)
        if any(t not in covered for t in required):
            continue
        hit = bfs_edges(adj, starts, lambda n: n in comp)
        if hit is None:
            continue
        stem, anchor = hit
        loop = _close_loop(adj, comp, anchor, required, tags_of)
        if loop is not None:
            return stem, loop
    return None


def _close_loop(adj, comp, anchor, required, tags_of):
    """Nonempty closed edge walk from anchor covering every required tag."""
    walk: list = []
    cur = anchor

    def walk_nodes():
        yield anchor
        for (_u, _l, v) in walk:
            yield v

    def covered(t) -> bool:
        if any(t in tags_of(n) for n in walk_nodes()):
            return True
        return any(t in labels for (_u, labels, _v) in walk)

    for t in required:
        if covered(t):
            continue
        hit = bfs_edges(adj, [cur], lambda n: t in tags_of(n), restrict=comp)
        if hit is not None:
            walk.extend(hit[0])
            cur = hit[1]
            continue
        edge = next(
            (
                (u, labels, v)
                for (u, labels, v) in (
                    (u, l, v) for u in comp for (v, l) in adj.get(u, ()) if v in comp
                )
                if t in labels
            ),
            None,
        )
        if edge is None:
            return None
        hit = bfs_edges(adj, [cur], lambda n: n == edge[0], restrict=comp)
        if hit is None:
            return None
        walk.extend(hit[0])
        walk.append(edge)
        cur = edge[2]
    if cur == anchor and not walk:
        # force at least one edge around the component
        step = next(((anchor, l, v) for (v, l) in adj.get(anchor, ()) if v in comp), None)
        if step is None:
            return None
        walk.append(step)
        cur = step[2]
    hit = bfs_edges(adj, [cur], lambda n: n == anchor, restrict=comp)
    if hit is None:
        return None
    walk.extend(hit[0])
    return walk
