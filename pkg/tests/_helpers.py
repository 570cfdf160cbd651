"""Shared test oracles: brute-force enumerations kept independent of the
implementation paths they check."""

from __future__ import annotations

import math
import random
from functools import reduce

from agvplan.terrain import Edge, Instance, Node, TerrainGraph


def fnv1a_reference(text: str) -> int:
    """Independent FNV-1a 64-bit (fold-based, unlike the production loop)."""
    return reduce(
        lambda h, b: ((h ^ b) * 1099511628211) % 2**64,
        text.encode("utf-8"),
        14695981039346656037,
    )


def brute_force_shortest(graph: TerrainGraph, weights, src: str) -> dict[str, float]:
    """Min-cost walk per node by exhaustive simple-path DFS (nonnegative
    weights make some simple path optimal)."""
    best = {n.id: math.inf for n in graph.nodes}
    best[src] = 0.0

    def rec(v: str, cost: float, visited: set[str]) -> None:
        for arc in graph.out_arcs[v]:
            if arc.to in visited:
                continue
            nc = cost + weights[arc.idx]
            if nc < best[arc.to]:
                best[arc.to] = nc
            rec(arc.to, nc, visited | {arc.to})

    rec(src, 0.0, {src})
    return best


def random_small_graph(seed: int, max_nodes: int = 7) -> TerrainGraph:
    """Connected random graph with 2..max_nodes nodes (chain + extra edges)."""
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    nodes = [
        Node(f"n{i}", rng.uniform(0, 1000), rng.uniform(0, 1000), rng.uniform(0, 50))
        for i in range(n)
    ]
    pairs = {(i - 1, i) for i in range(1, n)}
    extra = rng.randint(0, n)
    for _ in range(extra):
        i, j = rng.sample(range(n), 2)
        pairs.add((min(i, j), max(i, j)))
    edges = [
        Edge(
            f"e{k}",
            nodes[i].id,
            nodes[j].id,
            rng.randint(1, 1000),
            rng.uniform(0.0, 50.0),
        )
        for k, (i, j) in enumerate(sorted(pairs))
    ]
    return TerrainGraph(nodes, edges)


def enumerate_min_distance(
    graph: TerrainGraph,
    inst: Instance,
    n_max: int,
    pen_milli: dict[int, int] | None = None,
    p_cap: int | None = None,
) -> int | None:
    """Minimum distance (mm) over all arc-distinct walks start->dest with
    per-vertex in/out counts <= n_max that cover every mandatory node;
    optionally restricted to walks whose summed penalty <= p_cap.

    Returns None when no such walk exists.  Walks are enumerated directly;
    an arc-distinct walk and a balanced connected arc selection are the
    same thing up to Eulerian reordering.
    """
    mandatory = set(inst.mandatory)
    pens = pen_milli or {}
    cin = {n.id: 0 for n in graph.nodes}
    cout = {n.id: 0 for n in graph.nodes}
    best: list[float] = [math.inf]
    used: set[int] = set()

    def rec(v: str, dist: int, pen: int, covered: set[str]) -> None:
        if dist >= best[0]:
            return
        if v == inst.dest and mandatory <= covered:
            if inst.start != inst.dest or used:
                best[0] = dist
                return  # extensions only add distance
        for arc in graph.out_arcs[v]:
            if arc.idx in used:
                continue
            if cout[v] + 1 > n_max or cin[arc.to] + 1 > n_max:
                continue
            npen = pen + pens.get(arc.idx, 0)
            if p_cap is not None and npen > p_cap:
                continue
            used.add(arc.idx)
            cout[v] += 1
            cin[arc.to] += 1
            rec(arc.to, dist + arc.dist_mm, npen, covered | {arc.to})
            used.discard(arc.idx)
            cout[v] -= 1
            cin[arc.to] -= 1

    rec(inst.start, 0, 0, {inst.start})
    return None if math.isinf(best[0]) else int(best[0])


def random_trail(graph: TerrainGraph, start: str, dest: str, rng: random.Random):
    """Random arc-distinct walk from start to dest; None if the random
    exploration dead-ends elsewhere."""
    used = set()
    walk = []
    v = start
    while True:
        if v == dest and walk and rng.random() < 0.5:
            return walk
        options = [a for a in graph.out_arcs[v] if a.idx not in used]
        if not options:
            return walk if (v == dest and walk) else None
        arc = rng.choice(options)
        used.add(arc.idx)
        walk.append(arc)
        v = arc.to
