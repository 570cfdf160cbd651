import math
import random
from collections import Counter

import pytest

from agvplan.planner import (
    FlowModel,
    InvalidInstanceError,
    SearchState,
    SolverConfig,
    WalkError,
    build_model,
    extract_walk,
    penalty_to_milli,
    plan_cost,
    probe,
    propagate,
    search,
)
from agvplan.terrain import Edge, Instance, Node, TerrainGraph

from _helpers import enumerate_min_distance, random_small_graph, random_trail


def line_graph():
    nodes = [Node("s", 0, 0, 0), Node("a", 1, 0, 0), Node("d", 2, 0, 0)]
    edges = [Edge("e0", "s", "a", 1000, 0.0), Edge("e1", "a", "d", 1000, 0.0)]
    return TerrainGraph(nodes, edges)


def square_graph():
    """s and d joined by two parallel 2-hop routes, via a and via b."""
    nodes = [Node(n, i, 0, 0) for i, n in enumerate("sabd")]
    edges = [
        Edge("sa", "s", "a", 1000, 0.0),
        Edge("ad", "a", "d", 1000, 0.0),
        Edge("sb", "s", "b", 1000, 0.0),
        Edge("bd", "b", "d", 1000, 0.0),
    ]
    return TerrainGraph(nodes, edges)


def diamond_graph():
    """Direct s-d (3 m) against a 2+2 m detour through a."""
    nodes = [Node("s", 0, 0, 0), Node("a", 1, 0, 0), Node("d", 2, 0, 0)]
    edges = [
        Edge("sa", "s", "a", 2000, 0.0),
        Edge("ad", "a", "d", 2000, 0.0),
        Edge("sd", "s", "d", 3000, 0.0),
    ]
    return TerrainGraph(nodes, edges)


def plan_valid(plan, graph, inst, n_max):
    """Full validity: walk realizes the arc set, covers mandatory, caps."""
    assert plan.walk[0] == inst.start and plan.walk[-1] == inst.dest
    for m in inst.mandatory:
        assert m in plan.walk
    walk_arcs = []
    arc_by_nodes = {(a.frm, a.to): a for a in graph.arcs}
    for u, v in zip(plan.walk, plan.walk[1:]):
        assert (u, v) in arc_by_nodes
        walk_arcs.append(arc_by_nodes[(u, v)].idx)
    assert sorted(walk_arcs) == sorted(plan.arcs)  # Eulerian consistency
    assert len(set(plan.arcs)) == len(plan.arcs)
    cin = Counter()
    cout = Counter()
    for i in plan.arcs:
        arc = graph.arcs[i]
        cout[arc.frm] += 1
        cin[arc.to] += 1
    assert all(c <= n_max for c in cin.values())
    assert all(c <= n_max for c in cout.values())
    assert plan.d_end_mm == sum(graph.arcs[i].dist_mm for i in plan.arcs)


class TestBuildModel:
    def test_penalty_rounding_half_up(self):
        assert penalty_to_milli(0.4995) == 500
        assert penalty_to_milli(0.0) == 0
        assert penalty_to_milli(1.0) == 1000
        assert penalty_to_milli(0.25) == 250

    def test_penalty_range_checked(self):
        with pytest.raises(ValueError):
            penalty_to_milli(1.5)

    def test_line_graph_has_four_variables(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        assert len(model.arcs) == 4

    def test_invalid_instance_raises(self):
        g = line_graph()
        with pytest.raises(InvalidInstanceError, match="unknown node"):
            build_model(g, Instance("s", "zz"), {}, SolverConfig())

    def test_same_start_dest_flagged_as_cycle(self):
        g = line_graph()
        model = build_model(g, Instance("s", "s"), {}, SolverConfig())
        assert model.cycle
        assert model.min_out[model.s] == 1  # the empty plan is inadmissible


class TestProbe:
    def test_forced_line(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d", ("a",)), {}, SolverConfig())
        pr = probe(model, "distance")
        assert pr.walk == ["s", "a", "d"]

    def test_preference_avoids_penalized_side(self):
        g = square_graph()
        pens = {"sa": 1.0, "ad": 1.0, "sb": 0.0, "bd": 0.0}
        model = build_model(g, Instance("s", "d"), pens, SolverConfig())
        pr = probe(model, "preference")
        assert pr.walk == ["s", "b", "d"]
        assert pr.pen_milli == 0

    def test_distance_metric_takes_two_hops(self):
        g = square_graph()
        pens = {"sa": 1.0, "ad": 1.0, "sb": 0.0, "bd": 0.0}
        model = build_model(g, Instance("s", "d"), pens, SolverConfig())
        pr = probe(model, "distance")
        assert pr.dist_mm == 2000
        assert pr.walk in (["s", "a", "d"], ["s", "b", "d"])

    def test_unknown_metric(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        with pytest.raises(ValueError):
            probe(model, "speed")


class TestPropagate:
    def test_balance_violation_is_conflict(self):
        # interior vertex a: one committed in-arc, all out-arcs set to 0
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        state = SearchState.fresh(model, "pco")
        by_nodes = model.arc_by_nodes
        from agvplan.planner import _assign

        _assign(state, model, by_nodes[("s", "a")], 1)
        _assign(state, model, by_nodes[("a", "d")], 0)
        _assign(state, model, by_nodes[("a", "s")], 0)
        assert propagate(state, model) is False

    def test_start_single_out_arc_forced(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        state = SearchState.fresh(model, "pco")
        assert propagate(state, model) is True
        assert state.assignment[model.arc_by_nodes[("s", "a")]] == 1

    def test_penalty_bound_conflict_in_pcmco(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {"e0": 0.5}, SolverConfig(mode="pcmco"))
        state = SearchState.fresh(model, "pcmco")
        state.best_p = 0
        from agvplan.planner import _assign

        _assign(state, model, model.arc_by_nodes[("s", "a")], 1)
        assert propagate(state, model) is False


class TestSearch:
    def test_square_pco_two_hops(self):
        g = square_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig(mode="pco"))
        plan = search(model, SolverConfig(mode="pco"))
        assert plan.d_end_mm == 2000
        assert plan.optimal
        assert enumerate_min_distance(g, Instance("s", "d"), 2) == 2000

    def test_square_pcmco_takes_clean_side(self):
        g = square_graph()
        pens = {"sa": 1.0, "ad": 1.0, "sb": 0.0, "bd": 0.0}
        cfg = SolverConfig(mode="pcmco")
        plan = search(build_model(g, Instance("s", "d"), pens, cfg), cfg)
        assert plan.walk == ["s", "b", "d"]
        assert plan.p_end_milli == 0
        assert plan.d_end_mm == 2000

    def test_diamond_tradeoff(self):
        g = diamond_graph()
        pens = {"sa": 0.0, "ad": 0.0, "sd": 1.0}
        pco_cfg = SolverConfig(mode="pco")
        pco = search(build_model(g, Instance("s", "d"), pens, pco_cfg), pco_cfg)
        assert pco.d_end_mm == 3000
        pcmco_cfg = SolverConfig(mode="pcmco")
        pcmco = search(build_model(g, Instance("s", "d"), pens, pcmco_cfg), pcmco_cfg)
        assert pcmco.d_end_mm == 4000
        assert pcmco.p_end_milli == 0
        assert pcmco.probe_p_milli == 0
        assert pcmco.walk == ["s", "a", "d"]

    def test_start_equals_dest_needs_cycle(self):
        # triangle: cheapest cycle through s is out-and-back on the shortest edge
        nodes = [Node("s", 0, 0, 0), Node("b", 1, 0, 0), Node("c", 2, 0, 0)]
        edges = [
            Edge("sb", "s", "b", 1000, 0.0),
            Edge("bc", "b", "c", 1000, 0.0),
            Edge("sc", "s", "c", 3000, 0.0),
        ]
        g = TerrainGraph(nodes, edges)
        cfg = SolverConfig(mode="pco")
        plan = search(build_model(g, Instance("s", "s"), {}, cfg), cfg)
        assert plan is not None
        assert plan.walk[0] == plan.walk[-1] == "s"
        assert len(plan.walk) > 1
        assert plan.d_end_mm == enumerate_min_distance(g, Instance("s", "s"), 2) == 2000

    def test_infeasible_star_with_low_throughput(self):
        # visiting two dead-end mandatory leaves forces 3 passes through hub
        nodes = [Node(n, i, 0, 0) for i, n in enumerate(["s", "h", "m1", "m2", "d"])]
        edges = [
            Edge("sh", "s", "h", 1000, 0.0),
            Edge("hm1", "h", "m1", 1000, 0.0),
            Edge("hm2", "h", "m2", 1000, 0.0),
            Edge("hd", "h", "d", 1000, 0.0),
        ]
        g = TerrainGraph(nodes, edges)
        inst = Instance("s", "d", ("m1", "m2"))
        cfg = SolverConfig(n_max=2, mode="pco")
        assert search(build_model(g, inst, {}, cfg), cfg) is None
        assert enumerate_min_distance(g, inst, 2) is None
        cfg3 = SolverConfig(n_max=3, mode="pco")
        plan = search(build_model(g, inst, {}, cfg3), cfg3)
        assert plan is not None
        assert plan.d_end_mm == enumerate_min_distance(g, inst, 3) == 6000

    def test_backtracking_through_dead_end_mandatory(self):
        nodes = [Node("s", 0, 0, 0), Node("m", 1, 0, 0), Node("d", 2, 0, 0)]
        edges = [Edge("sm", "s", "m", 1000, 0.0), Edge("sd", "s", "d", 1000, 0.0)]
        g = TerrainGraph(nodes, edges)
        cfg = SolverConfig(mode="pco")
        plan = search(build_model(g, Instance("s", "d", ("m",)), {}, cfg), cfg)
        assert plan.walk == ["s", "m", "s", "d"]
        assert plan.d_end_mm == 3000

    def test_matches_enumeration_on_random_instances(self):
        rng = random.Random(0)
        for trial in range(120):
            g = random_small_graph(trial, max_nodes=8)
            ids = [n.id for n in g.nodes]
            start = rng.choice(ids)
            dest = rng.choice(ids)
            pool = [i for i in ids if i not in (start, dest)]
            mandatory = tuple(rng.sample(pool, min(len(pool), rng.randint(0, 3))))
            inst = Instance(start, dest, mandatory)
            cfg = SolverConfig(n_max=2, mode="pco")
            plan = search(build_model(g, inst, {}, cfg), cfg)
            expected = enumerate_min_distance(g, inst, 2)
            if expected is None:
                assert plan is None
            else:
                assert plan is not None and plan.optimal
                assert plan.d_end_mm == expected
                plan_valid(plan, g, inst, 2)

    def test_pcmco_dominance_properties(self):
        rng = random.Random(1)
        for trial in range(60):
            g = random_small_graph(1000 + trial, max_nodes=8)
            ids = [n.id for n in g.nodes]
            start, dest = rng.choice(ids), rng.choice(ids)
            pool = [i for i in ids if i not in (start, dest)]
            mandatory = tuple(rng.sample(pool, min(len(pool), rng.randint(0, 2))))
            inst = Instance(start, dest, mandatory)
            pens = {e.id: rng.random() for e in g.edges}
            pco_cfg = SolverConfig(mode="pco")
            pcm_cfg = SolverConfig(mode="pcmco")
            pco = search(build_model(g, inst, pens, pco_cfg), pco_cfg)
            pcm = search(build_model(g, inst, pens, pcm_cfg), pcm_cfg)
            if pco is None:
                continue
            if pcm is not None:
                assert pcm.d_end_mm >= pco.d_end_mm
                assert pcm.p_end_milli <= pcm.probe_p_milli
                plan_valid(pcm, g, inst, 2)

    def test_deterministic(self):
        g = random_small_graph(77, max_nodes=8)
        inst = Instance(g.nodes[0].id, g.nodes[-1].id)
        pens = {e.id: (i % 7) / 7 for i, e in enumerate(g.edges)}
        cfg = SolverConfig(mode="pcmco")
        p1 = search(build_model(g, inst, pens, cfg), cfg)
        p2 = search(build_model(g, inst, pens, cfg), cfg)
        assert p1.walk == p2.walk and p1.arcs == p2.arcs
        assert p1.nodes_explored == p2.nodes_explored

    def test_budget_exhaustion_marks_suboptimal(self):
        g = random_small_graph(5, max_nodes=7)
        inst = Instance(g.nodes[0].id, g.nodes[-1].id)
        cfg = SolverConfig(mode="pco", node_budget=3)
        plan = search(build_model(g, inst, {}, cfg), cfg)
        if plan is not None:  # probe seeded an incumbent before the cap
            assert not plan.optimal


class TestExtractWalk:
    def arcs_for(self, graph, pairs):
        by_nodes = {(a.frm, a.to): a for a in graph.arcs}
        return [by_nodes[p] for p in pairs]

    def test_simple_chain(self):
        g = line_graph()
        arcs = self.arcs_for(g, [("s", "a"), ("a", "d")])
        assert extract_walk(arcs, Instance("s", "d")) == ["s", "a", "d"]

    def test_out_and_back(self):
        nodes = [Node("s", 0, 0, 0), Node("a", 1, 0, 0), Node("d", 2, 0, 0)]
        edges = [Edge("sa", "s", "a", 1, 0.0), Edge("sd", "s", "d", 1, 0.0)]
        g = TerrainGraph(nodes, edges)
        arcs = self.arcs_for(g, [("s", "a"), ("a", "s"), ("s", "d")])
        assert extract_walk(arcs, Instance("s", "d")) == ["s", "a", "s", "d"]

    def test_disconnected_cycle_rejected(self):
        nodes = [Node(n, i, 0, 0) for i, n in enumerate("sdbc")]
        edges = [
            Edge("sd", "s", "d", 1, 0.0),
            Edge("bc", "b", "c", 1, 0.0),
        ]
        g = TerrainGraph(nodes, edges)
        arcs = self.arcs_for(g, [("s", "d"), ("b", "c"), ("c", "b")])
        with pytest.raises(WalkError, match="connected"):
            extract_walk(arcs, Instance("s", "d"))

    def test_unbalanced_rejected(self):
        g = line_graph()
        arcs = self.arcs_for(g, [("s", "a")])
        with pytest.raises(WalkError, match="balance"):
            extract_walk(arcs, Instance("s", "d"))

    def test_empty_cycle_walk(self):
        assert extract_walk([], Instance("s", "s")) == ["s"]
        with pytest.raises(WalkError):
            extract_walk([], Instance("s", "d"))

    def test_thousand_random_balanced_sets(self):
        ok = 0
        rng = random.Random(9)
        trial = 0
        while ok < 1000:
            trial += 1
            g = random_small_graph(trial % 300, max_nodes=6)
            ids = [n.id for n in g.nodes]
            start, dest = rng.choice(ids), rng.choice(ids)
            arcs = random_trail(g, start, dest, rng)
            if arcs is None or (start == dest and not arcs):
                continue
            walk = extract_walk(arcs, Instance(start, dest))
            assert walk[0] == start and walk[-1] == dest
            assert len(walk) == len(arcs) + 1
            used = sorted((u, v) for u, v in zip(walk, walk[1:]))
            assert used == sorted((a.frm, a.to) for a in arcs)
            ok += 1


class TestPlanCost:
    def test_empty_walk(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        assert plan_cost([], model) == (0.0, 0.0)
        assert plan_cost(["s"], model) == (0.0, 0.0)

    def test_arithmetic(self):
        nodes = [Node("s", 0, 0, 0), Node("a", 1, 0, 0), Node("d", 2, 0, 0)]
        edges = [Edge("sa", "s", "a", 100, 0.0), Edge("ad", "a", "d", 200, 0.0)]
        g = TerrainGraph(nodes, edges)
        model = build_model(
            g, Instance("s", "d"), {"sa": 0.25, "ad": 0.5}, SolverConfig()
        )
        d, p = plan_cost(["s", "a", "d"], model)
        assert d == pytest.approx(0.3)
        assert p == pytest.approx(0.75)

    def test_consistent_with_selected_arcs(self):
        g = square_graph()
        pens = {"sa": 0.1, "ad": 0.2, "sb": 0.3, "bd": 0.4}
        cfg = SolverConfig(mode="pco")
        model = build_model(g, Instance("s", "d"), pens, cfg)
        plan = search(model, cfg)
        d, p = plan_cost(plan.walk, model)
        assert d == pytest.approx(plan.d_end_m)
        assert p == pytest.approx(plan.p_end)

    def test_non_adjacent_step_rejected(self):
        g = line_graph()
        model = build_model(g, Instance("s", "d"), {}, SolverConfig())
        with pytest.raises(WalkError):
            plan_cost(["s", "d"], model)
