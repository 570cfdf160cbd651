"""Terrain graph model: JSON I/O, random generation, Dijkstra, instance checks.

Graphs are undirected at the mobility level (an edge can be driven both
ways) but every edge is expanded into two directed arcs so the planner can
reason per direction.  Distances are carried as integer millimeters so cost
comparisons downstream are exact.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Callable, Iterable, Mapping, Sequence

WORLD_SIZE_M = 5000.0
ELEVATION_MAX_M = 200.0

# Value-noise octaves for generated elevation: (relative frequency, amplitude).
# Three sinusoidal octaves; direction and phase are drawn from the seeded RNG.
_NOISE_OCTAVES = ((1.5, 1.0), (3.0, 0.5), (6.0, 0.25))
_NOISE_AMPLITUDE = sum(a for _, a in _NOISE_OCTAVES)

# Generated edges: detour factor over straight-line 3D distance, and the
# chance/size of terrain ruggedness added on top of the endpoint slope.
# Generated slopes are capped at 35 degrees; under the feasibility oracle
# that keeps fine-weather infeasibility unreachable, so the weather classes
# separate cleanly.
_MAX_DETOUR_FACTOR = 0.2
_RUGGED_EDGE_PROB = 0.5
_RUGGED_SLOPE_RANGE_DEG = (8.0, 30.0)
_GEN_MAX_SLOPE_DEG = 35.0


class GraphError(ValueError):
    """Malformed or inconsistent graph/instance document."""


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Edge:
    id: str
    u: str
    v: str
    dist_mm: int
    max_slope_deg: float

    @property
    def dist_m(self) -> float:
        return self.dist_mm / 1000.0


@dataclass(frozen=True)
class Arc:
    """Directed view of an edge; the two arcs of an edge share its features."""

    idx: int
    frm: str
    to: str
    dist_mm: int
    max_slope_deg: float
    edge_id: str


@dataclass(frozen=True)
class Instance:
    """One planning problem: start, destination, mandatory visit set."""

    start: str
    dest: str
    mandatory: tuple[str, ...] = ()


def _mm(meters: float) -> int:
    return int(round(meters * 1000.0))


class TerrainGraph:
    """Immutable node/edge collection with the derived directed-arc view.

    Construction validates ids and structure; connectivity is checked by
    ``load_graph`` (tests may build disconnected graphs directly).
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge]):
        self.nodes: list[Node] = list(nodes)
        self.edges: list[Edge] = list(edges)
        self.node_by_id: dict[str, Node] = {}
        for n in self.nodes:
            if n.id in self.node_by_id:
                raise GraphError(f"duplicate node id '{n.id}'")
            if not all(math.isfinite(c) for c in (n.x, n.y, n.z)):
                raise GraphError(f"non-finite coordinates on node '{n.id}'")
            self.node_by_id[n.id] = n

        self.edge_by_id: dict[str, Edge] = {}
        seen_pairs: set[tuple[str, str]] = set()
        for e in self.edges:
            if e.id in self.edge_by_id:
                raise GraphError(f"duplicate edge id '{e.id}'")
            for endpoint in (e.u, e.v):
                if endpoint not in self.node_by_id:
                    raise GraphError(
                        f"edge '{e.id}' references unknown node '{endpoint}'"
                    )
            if e.u == e.v:
                raise GraphError(f"edge '{e.id}' is a self-loop on '{e.u}'")
            pair = (min(e.u, e.v), max(e.u, e.v))
            if pair in seen_pairs:
                raise GraphError(f"edge '{e.id}' duplicates node pair {pair}")
            seen_pairs.add(pair)
            if e.dist_mm <= 0:
                raise GraphError(f"edge '{e.id}' has non-positive distance")
            if not 0.0 <= e.max_slope_deg < 90.0:
                raise GraphError(f"edge '{e.id}' slope outside [0, 90)")
            self.edge_by_id[e.id] = e

        self.edge_by_pair: dict[tuple[str, str], Edge] = {
            (min(e.u, e.v), max(e.u, e.v)): e for e in self.edges
        }
        self.arcs: list[Arc] = []
        self.out_arcs: dict[str, list[Arc]] = {n.id: [] for n in self.nodes}
        self.in_arcs: dict[str, list[Arc]] = {n.id: [] for n in self.nodes}
        for i, e in enumerate(self.edges):
            fwd = Arc(2 * i, e.u, e.v, e.dist_mm, e.max_slope_deg, e.id)
            rev = Arc(2 * i + 1, e.v, e.u, e.dist_mm, e.max_slope_deg, e.id)
            self.arcs.extend((fwd, rev))
            self.out_arcs[e.u].append(fwd)
            self.in_arcs[e.v].append(fwd)
            self.out_arcs[e.v].append(rev)
            self.in_arcs[e.u].append(rev)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TerrainGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"TerrainGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def edge_between(self, u: str, v: str) -> Edge | None:
        return self.edge_by_pair.get((min(u, v), max(u, v)))

    def reachable_from(self, src: str) -> set[str]:
        seen = {src}
        stack = [src]
        while stack:
            v = stack.pop()
            for arc in self.out_arcs[v]:
                if arc.to not in seen:
                    seen.add(arc.to)
                    stack.append(arc.to)
        return seen

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        return len(self.reachable_from(self.nodes[0].id)) == len(self.nodes)


def _euclid3d(a: Node, b: Node) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def _endpoint_slope_deg(a: Node, b: Node) -> float:
    planar = math.hypot(a.x - b.x, a.y - b.y)
    dz = abs(a.z - b.z)
    if dz == 0.0:
        return 0.0
    if planar == 0.0:
        raise GraphError(
            f"vertical edge between coincident positions '{a.id}' and '{b.id}'"
        )
    return math.degrees(math.atan(dz / planar))


def load_graph(text: str) -> TerrainGraph:
    """Parse and validate a graph-JSON document.

    Missing dist_m is filled with the straight-line 3D distance, missing
    max_slope_deg with the endpoint slope.  Raises GraphError naming the
    offending id on any schema violation, duplicate, dangling endpoint or
    disconnected graph.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphError("document must be an object with 'nodes' and 'edges'")

    nodes = []
    for raw in doc["nodes"]:
        if not isinstance(raw, dict) or "id" not in raw:
            raise GraphError(f"node entry without id: {raw!r}")
        nid = raw["id"]
        if not isinstance(nid, str):
            raise GraphError(f"node id must be a string, got {nid!r}")
        try:
            nodes.append(
                Node(nid, float(raw["x"]), float(raw["y"]), float(raw["z"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"bad coordinates on node '{nid}': {exc}") from exc
    node_by_id = {n.id: n for n in nodes}

    edges = []
    for raw in doc["edges"]:
        if not isinstance(raw, dict) or "id" not in raw:
            raise GraphError(f"edge entry without id: {raw!r}")
        eid = raw["id"]
        try:
            u, v = raw["u"], raw["v"]
        except KeyError as exc:
            raise GraphError(f"edge '{eid}' missing endpoint {exc}") from exc
        for endpoint in (u, v):
            if endpoint not in node_by_id:
                raise GraphError(f"edge '{eid}' references unknown node '{endpoint}'")
        a, b = node_by_id[u], node_by_id[v]
        if "dist_m" in raw and raw["dist_m"] is not None:
            dist_m = float(raw["dist_m"])
        else:
            dist_m = _euclid3d(a, b)
        if "max_slope_deg" in raw and raw["max_slope_deg"] is not None:
            slope = float(raw["max_slope_deg"])
        else:
            slope = _endpoint_slope_deg(a, b)
        edges.append(Edge(eid, u, v, _mm(dist_m), slope))

    graph = TerrainGraph(nodes, edges)
    if graph.nodes and not graph.is_connected():
        reachable = graph.reachable_from(graph.nodes[0].id)
        missing = sorted(n.id for n in graph.nodes if n.id not in reachable)
        raise GraphError(f"graph is disconnected: cannot reach {missing}")
    return graph


def graph_to_json(graph: TerrainGraph) -> str:
    doc = {
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, "z": n.z} for n in graph.nodes
        ],
        "edges": [
            {
                "id": e.id,
                "u": e.u,
                "v": e.v,
                "dist_m": e.dist_mm / 1000.0,
                "max_slope_deg": e.max_slope_deg,
            }
            for e in graph.edges
        ],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def instance_from_json(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from exc
    try:
        mandatory = tuple(doc.get("mandatory", ()))
        return Instance(doc["start"], doc["dest"], mandatory)
    except (KeyError, TypeError) as exc:
        raise GraphError(f"bad instance document: {exc}") from exc


def instance_to_json(inst: Instance) -> str:
    doc = {"start": inst.start, "dest": inst.dest, "mandatory": list(inst.mandatory)}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def _elevation_field(rng: random.Random) -> Callable[[float, float], float]:
    octaves = []
    for rel_freq, amp in _NOISE_OCTAVES:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        octaves.append((rel_freq / WORLD_SIZE_M, amp, math.cos(theta), math.sin(theta), phase))

    def elevation(x: float, y: float) -> float:
        raw = sum(
            amp * math.sin(2.0 * math.pi * freq * (cx * x + sy * y) + phase)
            for freq, amp, cx, sy, phase in octaves
        )
        return (raw + _NOISE_AMPLITUDE) / (2.0 * _NOISE_AMPLITUDE) * ELEVATION_MAX_M

    return elevation


def _mst_pairs(positions: Sequence[tuple[float, float]]) -> set[tuple[int, int]]:
    """Prim's MST over planar distance; deterministic tie-break by index."""
    n = len(positions)
    if n <= 1:
        return set()
    in_tree = [False] * n
    best_cost = [math.inf] * n
    best_from = [0] * n
    in_tree[0] = True
    for j in range(1, n):
        best_cost[j] = math.dist(positions[0], positions[j])
    pairs: set[tuple[int, int]] = set()
    for _ in range(n - 1):
        pick = -1
        for j in range(n):
            if not in_tree[j] and (pick < 0 or best_cost[j] < best_cost[pick]):
                pick = j
        i = best_from[pick]
        pairs.add((min(i, pick), max(i, pick)))
        in_tree[pick] = True
        for j in range(n):
            if not in_tree[j]:
                d = math.dist(positions[pick], positions[j])
                if d < best_cost[j]:
                    best_cost[j] = d
                    best_from[j] = pick
    return pairs


def generate_graph(n_nodes: int, k_nearest: int, seed: int) -> TerrainGraph:
    """Random terrain graph: uniform nodes on a 5 km square, smooth elevation,
    k-nearest-neighbor edges plus MST edges for connectivity.

    Deterministic for fixed (n_nodes, k_nearest, seed).
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if k_nearest < 1:
        raise ValueError("k_nearest must be >= 1")
    rng = random.Random(seed)
    elevation = _elevation_field(rng)

    positions = [
        (rng.uniform(0.0, WORLD_SIZE_M), rng.uniform(0.0, WORLD_SIZE_M))
        for _ in range(n_nodes)
    ]
    nodes = [
        Node(f"n{i}", x, y, elevation(x, y)) for i, (x, y) in enumerate(positions)
    ]

    pairs: set[tuple[int, int]] = set()
    for i in range(n_nodes):
        ranked = sorted(
            (j for j in range(n_nodes) if j != i),
            key=lambda j: (math.dist(positions[i], positions[j]), j),
        )
        for j in ranked[:k_nearest]:
            pairs.add((min(i, j), max(i, j)))
    pairs |= _mst_pairs(positions)

    edges = []
    for eidx, (i, j) in enumerate(sorted(pairs)):
        a, b = nodes[i], nodes[j]
        straight = _euclid3d(a, b)
        dist_m = straight * (1.0 + _MAX_DETOUR_FACTOR * rng.random())
        slope = _endpoint_slope_deg(a, b)
        if rng.random() < _RUGGED_EDGE_PROB:
            slope += rng.uniform(*_RUGGED_SLOPE_RANGE_DEG)
        edges.append(
            Edge(f"e{eidx}", a.id, b.id, _mm(dist_m), min(slope, _GEN_MAX_SLOPE_DEG))
        )

    return TerrainGraph(nodes, edges)


def dijkstra(
    graph: TerrainGraph,
    weights: Mapping[int, float] | Sequence[float],
    src: str,
) -> tuple[dict[str, float], dict[str, Arc | None]]:
    """Single-source shortest walks over directed arcs.

    ``weights`` maps arc idx to a nonnegative cost.  Returns (dist, parent)
    where parent[v] is the arc entering v on one optimal tree (None at src)
    and unreachable nodes have infinite dist.
    """
    if src not in graph.node_by_id:
        raise GraphError(f"unknown source node '{src}'")
    dist: dict[str, float] = {n.id: math.inf for n in graph.nodes}
    parent: dict[str, Arc | None] = {src: None}
    dist[src] = 0
    heap: list[tuple[float, str]] = [(0, src)]
    done: set[str] = set()
    while heap:
        d, v = heappop(heap)
        if v in done:
            continue
        done.add(v)
        for arc in graph.out_arcs[v]:
            w = weights[arc.idx]
            if w < 0:
                raise ValueError(f"negative weight on arc {arc.idx}")
            nd = d + w
            if nd < dist[arc.to]:
                dist[arc.to] = nd
                parent[arc.to] = arc
                heappush(heap, (nd, arc.to))
    return dist, parent


def shortest_arc_path(parent: Mapping[str, Arc | None], dest: str) -> list[Arc]:
    """Arc sequence from the tree source to dest, following parent pointers."""
    arcs: list[Arc] = []
    v = dest
    while True:
        arc = parent[v]
        if arc is None:
            break
        arcs.append(arc)
        v = arc.frm
    arcs.reverse()
    return arcs


def greedy_chain(
    graph: TerrainGraph,
    weights: Mapping[int, float] | Sequence[float],
    start: str,
    dest: str,
    mandatory: Iterable[str],
) -> list[Arc] | None:
    """Chain of Dijkstra legs: repeatedly hop to the nearest unvisited
    mandatory node, then finish at dest.  Nodes crossed en route count as
    visited.  Returns the concatenated arc walk, or None if some required
    node is unreachable.
    """
    remaining = set(mandatory) - {start, dest}
    pos = start
    walk: list[Arc] = []
    while remaining:
        dist, parent = dijkstra(graph, weights, pos)
        target = min(remaining, key=lambda m: (dist[m], m))
        if math.isinf(dist[target]):
            return None
        leg = shortest_arc_path(parent, target)
        walk.extend(leg)
        remaining.discard(pos)
        for arc in leg:
            remaining.discard(arc.to)
        pos = target
    dist, parent = dijkstra(graph, weights, pos)
    if math.isinf(dist[dest]):
        return None
    walk.extend(shortest_arc_path(parent, dest))
    return walk


def validate_instance(graph: TerrainGraph, inst: Instance) -> list[str]:
    """Return a list of violations; empty means the instance is solvable in
    principle (ids exist, mandatory distinct, required nodes mutually
    reachable).  Never raises.
    """
    violations = []
    for nid in (inst.start, inst.dest, *inst.mandatory):
        if nid not in graph.node_by_id:
            violations.append(f"unknown node '{nid}'")
    seen: set[str] = set()
    for nid in inst.mandatory:
        if nid in seen:
            violations.append(f"duplicate mandatory node '{nid}'")
        seen.add(nid)
    if violations:
        return violations
    reachable = graph.reachable_from(inst.start)
    for nid in {inst.dest, *inst.mandatory}:
        if nid not in reachable:
            violations.append(f"node '{nid}' not reachable from '{inst.start}'")
    return violations
