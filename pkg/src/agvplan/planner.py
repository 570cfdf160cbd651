"""Flow-based route planner over binary arc variables.

The model places one 0/1 variable on every directed arc.  Per-vertex
balance ties selected in/out counts together (endpoints offset by one, all
counts capped by a throughput limit N), non-endpoint mandatory nodes need a
selected outgoing arc, and a complete selection must be connected so it
realizes as one walk.  Search is depth-first branch-and-bound: a greedy
Dijkstra probe seeds the incumbent, the variable order and (in pcmco mode)
the penalty bound; propagation forces implied arcs and prunes on cost.

Modes: pco minimizes distance alone; pcmco accepts a solution only when it
is strictly shorter and its summed penalty does not exceed the best seen.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .terrain import Arc, Instance, TerrainGraph, greedy_chain, validate_instance

PENALTY_SCALE = 1000


class InvalidInstanceError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class WalkError(ValueError):
    """Arc set cannot be realized as a single start-to-dest walk."""


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 2
    node_budget: int | None = None
    mode: str = "pco"

    def __post_init__(self) -> None:
        if self.mode not in ("pco", "pcmco"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.node_budget is not None and self.node_budget < 1:
            raise ValueError("node_budget must be >= 1 when set")


def penalty_to_milli(p: float) -> int:
    """Fixed-point thousandths with round-half-up (0.4995 -> 500)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"penalty {p} outside [0, 1]")
    return int(
        (Decimal(repr(p)) * PENALTY_SCALE).to_integral_value(rounding=ROUND_HALF_UP)
    )


class FlowModel:
    """Immutable arc data + instance constraints, shared by searches."""

    def __init__(
        self,
        graph: TerrainGraph,
        inst: Instance,
        penalties: Mapping[str, float],
        n_max: int,
    ):
        self.graph = graph
        self.inst = inst
        self.n_max = n_max
        self.node_ids = [n.id for n in graph.nodes]
        self.node_index = {nid: i for i, nid in enumerate(self.node_ids)}
        self.arcs = graph.arcs
        self.frm = [self.node_index[a.frm] for a in self.arcs]
        self.to = [self.node_index[a.to] for a in self.arcs]
        self.dist = [a.dist_mm for a in self.arcs]
        edge_milli = {
            e.id: penalty_to_milli(penalties.get(e.id, 0.0)) for e in graph.edges
        }
        self.pen = [edge_milli[a.edge_id] for a in self.arcs]
        v = len(self.node_ids)
        self.out_idx: list[list[int]] = [[] for _ in range(v)]
        self.in_idx: list[list[int]] = [[] for _ in range(v)]
        for i, a in enumerate(self.arcs):
            self.out_idx[self.frm[i]].append(i)
            self.in_idx[self.to[i]].append(i)
        self.arc_by_nodes = {(a.frm, a.to): i for i, a in enumerate(self.arcs)}
        self.s = self.node_index[inst.start]
        self.d = self.node_index[inst.dest]
        self.cycle = self.s == self.d  # limit conditions force a loop, not an empty plan
        self.min_out = [0] * v
        if self.cycle:
            self.min_out[self.s] = 1
        for nid in inst.mandatory:
            i = self.node_index[nid]
            if i != self.s and i != self.d:
                self.min_out[i] = 1
        self.delta = [0] * v
        if not self.cycle:
            self.delta[self.s] = 1
            self.delta[self.d] = -1


def build_model(
    graph: TerrainGraph,
    inst: Instance,
    penalties: Mapping[str, float],
    cfg: SolverConfig,
) -> FlowModel:
    violations = validate_instance(graph, inst)
    if violations:
        raise InvalidInstanceError(violations)
    return FlowModel(graph, inst, penalties, cfg.n_max)


@dataclass
class ProbeResult:
    arcs: list[Arc]
    walk: list[str]
    dist_mm: int
    pen_milli: int
    capacity_ok: bool


def probe(model: FlowModel, metric: str) -> ProbeResult | None:
    """Greedy Dijkstra chain through the mandatory nodes.

    metric="preference" weighs arcs penalty-first (penalty * 1e6 + dist so
    distance only breaks near-ties); metric="distance" uses distance alone.
    The walk may repeat arcs or exceed the throughput cap; capacity_ok says
    whether it is admissible as an incumbent.
    """
    if metric == "preference":
        weights = [p * 1_000_000 + d for p, d in zip(model.pen, model.dist)]
    elif metric == "distance":
        weights = list(model.dist)
    else:
        raise ValueError(f"unknown probe metric {metric!r}")
    arcs = greedy_chain(
        model.graph, weights, model.inst.start, model.inst.dest, model.inst.mandatory
    )
    if arcs is None:
        return None
    walk = [model.inst.start] + [a.to for a in arcs]
    dist_mm = sum(a.dist_mm for a in arcs)
    pen_milli = sum(model.pen[a.idx] for a in arcs)
    capacity_ok = _walk_capacity_ok(model, arcs)
    return ProbeResult(arcs, walk, dist_mm, pen_milli, capacity_ok)


def _walk_capacity_ok(model: FlowModel, arcs: Sequence[Arc]) -> bool:
    ids = [a.idx for a in arcs]
    if len(set(ids)) != len(ids):
        return False
    cout = [0] * len(model.node_ids)
    cin = [0] * len(model.node_ids)
    for i in ids:
        cout[model.frm[i]] += 1
        cin[model.to[i]] += 1
    return all(o <= model.n_max and i <= model.n_max for o, i in zip(cout, cin))


@dataclass
class SearchState:
    """Mutable search state owned by one solver run."""

    assignment: list[int]
    cout: list[int]
    cin: list[int]
    uout: list[int]
    uin: list[int]
    d_mm: int = 0
    p_milli: int = 0
    best_d: float = float("inf")
    best_p: float = float("inf")
    mode: str = "pco"
    nodes: int = 0
    trail: list[int] = field(default_factory=list)
    incumbent: list[int] | None = None

    @classmethod
    def fresh(cls, model: FlowModel, mode: str) -> "SearchState":
        v = len(model.node_ids)
        return cls(
            assignment=[-1] * len(model.arcs),
            cout=[0] * v,
            cin=[0] * v,
            uout=[len(model.out_idx[i]) for i in range(v)],
            uin=[len(model.in_idx[i]) for i in range(v)],
            mode=mode,
        )


def _assign(state: SearchState, model: FlowModel, arc: int, val: int) -> None:
    state.assignment[arc] = val
    u, v = model.frm[arc], model.to[arc]
    state.uout[u] -= 1
    state.uin[v] -= 1
    if val == 1:
        state.cout[u] += 1
        state.cin[v] += 1
        state.d_mm += model.dist[arc]
        state.p_milli += model.pen[arc]
    state.trail.append(arc)


def _undo_to(state: SearchState, model: FlowModel, mark: int) -> None:
    while len(state.trail) > mark:
        arc = state.trail.pop()
        val = state.assignment[arc]
        state.assignment[arc] = -1
        u, v = model.frm[arc], model.to[arc]
        state.uout[u] += 1
        state.uin[v] += 1
        if val == 1:
            state.cout[u] -= 1
            state.cin[v] -= 1
            state.d_mm -= model.dist[arc]
            state.p_milli -= model.pen[arc]


def _bound_conflict(state: SearchState) -> bool:
    if state.d_mm >= state.best_d:
        return True
    return state.mode == "pcmco" and state.p_milli > state.best_p


def propagate(state: SearchState, model: FlowModel, dirty: Sequence[int] | None = None) -> bool:
    """Fixpoint of vertex-balance forcing plus cost-bound pruning.

    Returns False on conflict.  Forced assignments are recorded on the
    trail so the caller's undo mark covers them.
    """
    if _bound_conflict(state):
        return False
    n_max = model.n_max
    queue = list(range(len(model.node_ids))) if dirty is None else list(dirty)
    queued = [False] * len(model.node_ids)
    for v in queue:
        queued[v] = True
    while queue:
        v = queue.pop()
        queued[v] = False
        co, ci = state.cout[v], state.cin[v]
        po, pi = co + state.uout[v], ci + state.uin[v]
        delta = model.delta[v]
        o_lo = max(co, model.min_out[v], ci + delta)
        o_hi = min(po, n_max, n_max + delta, pi + delta)
        if o_lo > o_hi:
            return False
        forced: list[tuple[int, int]] = []
        if state.uout[v]:
            if po == o_lo:
                forced += [(a, 1) for a in model.out_idx[v] if state.assignment[a] < 0]
            elif co == o_hi:
                forced += [(a, 0) for a in model.out_idx[v] if state.assignment[a] < 0]
        if state.uin[v]:
            if pi == o_lo - delta:
                forced += [(a, 1) for a in model.in_idx[v] if state.assignment[a] < 0]
            elif ci == o_hi - delta:
                forced += [(a, 0) for a in model.in_idx[v] if state.assignment[a] < 0]
        for arc, val in forced:
            if state.assignment[arc] >= 0:
                continue
            _assign(state, model, arc, val)
            if val == 1 and _bound_conflict(state):
                return False
            for w in (model.frm[arc], model.to[arc]):
                if not queued[w]:
                    queued[w] = True
                    queue.append(w)
    return True


def _connected_from_start(model: FlowModel, selected: Sequence[int]) -> bool:
    if not selected:
        return True
    touch: dict[int, list[int]] = {}
    for i in selected:
        touch.setdefault(model.frm[i], []).append(model.to[i])
        touch.setdefault(model.to[i], []).append(model.frm[i])
    if model.s not in touch:
        return False
    seen = {model.s}
    stack = [model.s]
    while stack:
        v = stack.pop()
        for w in touch.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return all(v in seen for v in touch)


@dataclass
class Plan:
    walk: list[str]
    arcs: tuple[int, ...]
    d_end_mm: int
    p_end_milli: int
    optimal: bool
    nodes_explored: int
    solver: str
    probe_p_milli: int | None = None

    @property
    def d_end_m(self) -> float:
        return self.d_end_mm / 1000.0

    @property
    def p_end(self) -> float:
        return self.p_end_milli / PENALTY_SCALE


class _BudgetExhausted(Exception):
    pass


def search(model: FlowModel, cfg: SolverConfig) -> Plan | None:
    """Branch-and-bound over arc variables; None when no plan exists (or
    none was found within the node budget)."""
    metric = "distance" if cfg.mode == "pco" else "preference"
    pr = probe(model, metric)
    if pr is None:
        return None

    state = SearchState.fresh(model, cfg.mode)
    probe_p = None
    if cfg.mode == "pcmco":
        state.best_p = pr.pen_milli
        probe_p = pr.pen_milli
    if pr.capacity_ok:
        state.best_d = pr.dist_mm
        state.incumbent = sorted({a.idx for a in pr.arcs})

    probe_order: list[int] = []
    seen_arcs: set[int] = set()
    for a in pr.arcs:
        if a.idx not in seen_arcs:
            seen_arcs.add(a.idx)
            probe_order.append(a.idx)

    n_vertices = len(model.node_ids)

    def select_var() -> int | None:
        for arc in probe_order:
            if state.assignment[arc] < 0:
                return arc
        best_count = None
        best_vertex = -1
        for v in range(n_vertices):
            undecided = state.uout[v] + state.uin[v]
            if undecided and (best_count is None or undecided < best_count):
                best_count = undecided
                best_vertex = v
        if best_count is None:
            return None
        candidates = [
            a
            for a in model.out_idx[best_vertex] + model.in_idx[best_vertex]
            if state.assignment[a] < 0
        ]
        return min(candidates)

    def accept_if_solution() -> None:
        selected = [i for i, val in enumerate(state.assignment) if val == 1]
        if not _connected_from_start(model, selected):
            return
        if state.d_mm >= state.best_d:
            return
        if state.mode == "pcmco" and state.p_milli > state.best_p:
            return
        state.best_d = state.d_mm
        if state.mode == "pcmco":
            state.best_p = state.p_milli
        state.incumbent = selected

    budget = cfg.node_budget

    def dfs(dirty: Sequence[int] | None) -> None:
        state.nodes += 1
        if budget is not None and state.nodes > budget:
            raise _BudgetExhausted
        mark = len(state.trail)
        if propagate(state, model, dirty):
            arc = select_var()
            if arc is None:
                accept_if_solution()
            else:
                endpoints = (model.frm[arc], model.to[arc])
                for val in (1, 0):
                    inner = len(state.trail)
                    _assign(state, model, arc, val)
                    dfs(endpoints)
                    _undo_to(state, model, inner)
        _undo_to(state, model, mark)

    limit = len(model.arcs) * 3 + 1000
    if sys.getrecursionlimit() < limit:
        sys.setrecursionlimit(limit)
    optimal = True
    try:
        dfs(None)
    except _BudgetExhausted:
        optimal = False
    if state.incumbent is None:
        return None

    selected_arcs = [model.arcs[i] for i in state.incumbent]
    walk = extract_walk(selected_arcs, model.inst)
    return Plan(
        walk=walk,
        arcs=tuple(state.incumbent),
        d_end_mm=sum(model.dist[i] for i in state.incumbent),
        p_end_milli=sum(model.pen[i] for i in state.incumbent),
        optimal=optimal,
        nodes_explored=state.nodes,
        solver=cfg.mode,
        probe_p_milli=probe_p,
    )


def extract_walk(arcs: Sequence[Arc], inst: Instance) -> list[str]:
    """Order an arc multiset into the walk it realizes (every arc used
    exactly once, junctions resolved by ascending arc idx)."""
    if not arcs:
        if inst.start != inst.dest:
            raise WalkError("empty arc set cannot join distinct endpoints")
        return [inst.start]
    balance: dict[str, int] = {}
    for a in arcs:
        balance[a.frm] = balance.get(a.frm, 0) + 1
        balance[a.to] = balance.get(a.to, 0) - 1
    expected = {} if inst.start == inst.dest else {inst.start: 1, inst.dest: -1}
    for node, net in balance.items():
        if net != expected.get(node, 0):
            raise WalkError(f"balance violated at node '{node}'")
    for node, net in expected.items():
        if net != balance.get(node, 0):
            raise WalkError(f"balance violated at node '{node}'")

    adj: dict[str, list[Arc]] = {}
    for a in sorted(arcs, key=lambda a: a.idx):
        adj.setdefault(a.frm, []).append(a)
    ptr = {node: 0 for node in adj}
    stack = [inst.start]
    out: list[str] = []
    while stack:
        v = stack[-1]
        avail = adj.get(v, [])
        p = ptr.get(v, 0)
        if p < len(avail):
            ptr[v] = p + 1
            stack.append(avail[p].to)
        else:
            out.append(stack.pop())
    walk = out[::-1]
    if len(walk) != len(arcs) + 1:
        raise WalkError("arc set is not connected through the start node")
    return walk


def plan_cost(walk: Sequence[str], model: FlowModel) -> tuple[float, float]:
    """(distance m, penalty) summed over the traversed arc multiset."""
    d_mm = 0
    p_milli = 0
    for u, v in zip(walk, walk[1:]):
        arc = model.arc_by_nodes.get((u, v))
        if arc is None:
            raise WalkError(f"walk step '{u}' -> '{v}' is not an arc")
        d_mm += model.dist[arc]
        p_milli += model.pen[arc]
    return d_mm / 1000.0, p_milli / PENALTY_SCALE


def plan_to_json(plan: Plan, interventions: int | None = None) -> str:
    import json

    doc: dict = {
        "walk": list(plan.walk),
        "d_end_m": plan.d_end_m,
        "p_end": plan.p_end,
    }
    if interventions is not None:
        doc["interventions"] = interventions
    doc["optimal"] = plan.optimal
    doc["nodes_explored"] = plan.nodes_explored
    doc["solver"] = plan.solver
    return json.dumps(doc, separators=(",", ":")) + "\n"
