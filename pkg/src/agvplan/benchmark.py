"""Two-solver benchmark harness: per-weather-class instance batches solved
by pco (distance only) and pcmco (distance + learned penalties), intervention
counting against the environment oracle, aggregates and statistical tests.

Every instance derives its own RNG stream from (seed, class, index, attempt)
so reports are identical regardless of thread count.  Wall-clock timings are
recorded per solve but kept out of the JSON report so repeated runs are
byte-identical; the CSV export carries them.
"""

from __future__ import annotations

import csv
import io
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from . import stats
from .envsim import (
    WEATHER_CLASSES,
    Weather,
    WeatherClass,
    feasibility_oracle,
    generate_missions,
)
from .neuralnet import MLPParams, edge_preferences
from .planner import Plan, SolverConfig, build_model, search
from .terrain import Instance, TerrainGraph

log = logging.getLogger(__name__)

CSV_HEADER = ["class", "instance", "solver", "d_end_m", "interventions", "optimal", "nodes", "wall_ms"]


@dataclass(frozen=True)
class BenchmarkConfig:
    per_class: int = 50
    seed: int = 0
    node_budget: int | None = 200_000
    n_max: int = 2
    threads: int = 1
    max_retries: int = 20
    classes: tuple[WeatherClass, ...] = WEATHER_CLASSES

    def __post_init__(self) -> None:
        if self.per_class < 2:
            raise ValueError("per_class must be >= 2 (statistical tests need df >= 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class SolverStats:
    d_end_mm: int
    p_end_milli: int
    interventions: int
    optimal: bool
    nodes_explored: int
    wall_ms: float

    @property
    def d_end_m(self) -> float:
        return self.d_end_mm / 1000.0


@dataclass(frozen=True)
class InstanceRecord:
    weather_class: str
    index: int
    instance: Instance
    weather: Weather
    pco: SolverStats
    pcmco: SolverStats
    pcmco_probe_p_milli: int
    resamples: int


@dataclass(frozen=True)
class Report:
    config: BenchmarkConfig
    records: tuple[InstanceRecord, ...]
    aggregates: dict
    tests: dict


def count_interventions(walk: Sequence[str], graph: TerrainGraph, w: Weather) -> int:
    """Traversed edges (repeats counted) the oracle labels infeasible."""
    n = 0
    for u, v in zip(walk, walk[1:]):
        edge = graph.edge_between(u, v)
        if edge is None:
            raise ValueError(f"walk step '{u}' -> '{v}' is not an edge")
        n += 1 - feasibility_oracle(edge, w)
    return n


def _stream_seed(seed: int, *parts: int) -> int:
    h = seed & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        h = (h * 1_000_003 + p + 1) & 0xFFFFFFFFFFFFFFFF
    return h


def _timed_solve(graph, inst, penalties, cfg: SolverConfig) -> tuple[Plan | None, float]:
    model = build_model(graph, inst, penalties, cfg)
    t0 = time.perf_counter()
    plan = search(model, cfg)
    return plan, (time.perf_counter() - t0) * 1000.0


def _solve_one(
    graph: TerrainGraph,
    params: MLPParams,
    cfg: BenchmarkConfig,
    class_idx: int,
    index: int,
) -> InstanceRecord:
    wclass = cfg.classes[class_idx]
    for attempt in range(cfg.max_retries):
        base = _stream_seed(cfg.seed, class_idx, index, attempt)
        inst = generate_missions(graph, 1, base)[0]
        weather = wclass.sample(random.Random(_stream_seed(base, 1)))

        pco_cfg = SolverConfig(cfg.n_max, cfg.node_budget, "pco")
        pco_plan, pco_ms = _timed_solve(graph, inst, {}, pco_cfg)
        if pco_plan is None:
            log.warning("resampling %s/%d: pco found no plan", wclass.name, index)
            continue

        penalties = edge_preferences(params, graph, weather)
        pcmco_cfg = SolverConfig(cfg.n_max, cfg.node_budget, "pcmco")
        pcmco_plan, pcmco_ms = _timed_solve(graph, inst, penalties, pcmco_cfg)
        if pcmco_plan is None:
            log.warning("resampling %s/%d: pcmco found no plan", wclass.name, index)
            continue

        return InstanceRecord(
            weather_class=wclass.name,
            index=index,
            instance=inst,
            weather=weather,
            pco=SolverStats(
                pco_plan.d_end_mm,
                pco_plan.p_end_milli,
                count_interventions(pco_plan.walk, graph, weather),
                pco_plan.optimal,
                pco_plan.nodes_explored,
                pco_ms,
            ),
            pcmco=SolverStats(
                pcmco_plan.d_end_mm,
                pcmco_plan.p_end_milli,
                count_interventions(pcmco_plan.walk, graph, weather),
                pcmco_plan.optimal,
                pcmco_plan.nodes_explored,
                pcmco_ms,
            ),
            pcmco_probe_p_milli=pcmco_plan.probe_p_milli or 0,
            resamples=attempt,
        )
    raise RuntimeError(
        f"no solvable instance for class '{wclass.name}' index {index} "
        f"after {cfg.max_retries} attempts"
    )


def _agg_dict(values: Sequence[float]) -> dict:
    mean, median, std = stats.aggregate(values)
    return {"mean": mean, "median": median, "std": std}


def run_benchmark(
    graph: TerrainGraph, params: MLPParams, cfg: BenchmarkConfig
) -> Report:
    jobs = [
        (ci, ii) for ci in range(len(cfg.classes)) for ii in range(cfg.per_class)
    ]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(
                pool.map(lambda job: _solve_one(graph, params, cfg, *job), jobs)
            )
    else:
        records = [_solve_one(graph, params, cfg, *job) for job in jobs]

    aggregates: dict = {}
    tests: dict = {}
    for wclass in cfg.classes:
        batch = [r for r in records if r.weather_class == wclass.name]
        pco_d = [r.pco.d_end_m for r in batch]
        pcmco_d = [r.pcmco.d_end_m for r in batch]
        pco_i = [r.pco.interventions for r in batch]
        pcmco_i = [r.pcmco.interventions for r in batch]
        pco_mean = stats.aggregate(pco_d)[0]
        overhead_pct = (
            (stats.aggregate(pcmco_d)[0] / pco_mean - 1.0) * 100.0 if pco_mean else 0.0
        )
        aggregates[wclass.name] = {
            "pco": {
                "distance_m": _agg_dict(pco_d),
                "interventions": _agg_dict([float(i) for i in pco_i]),
            },
            "pcmco": {
                "distance_m": _agg_dict(pcmco_d),
                "interventions": _agg_dict([float(i) for i in pcmco_i]),
            },
            "distance_overhead_pct": overhead_pct,
        }
        t_res = stats.paired_t_test(pcmco_d, pco_d)
        chi_res = stats.chi_square_test(pco_i, pcmco_i)
        tests[wclass.name] = {
            "t": t_res.t,
            "p_t": t_res.p,
            "t_degenerate": t_res.degenerate,
            "chi2": chi_res.chi2,
            "p_chi2": chi_res.p,
            "chi2_df": chi_res.df,
            "chi2_degenerate": chi_res.degenerate,
        }
        log.info(
            "%s: pco interventions %.2f, pcmco %.2f, distance overhead %.1f%%",
            wclass.name,
            stats.aggregate([float(i) for i in pco_i])[0],
            stats.aggregate([float(i) for i in pcmco_i])[0],
            overhead_pct,
        )
    return Report(cfg, tuple(records), aggregates, tests)


def _solver_doc(s: SolverStats) -> dict:
    return {
        "d_end_m": s.d_end_m,
        "p_end": s.p_end_milli / 1000.0,
        "interventions": s.interventions,
        "optimal": s.optimal,
        "nodes": s.nodes_explored,
    }


def report_to_json(report: Report) -> str:
    """Deterministic JSON serialization (wall times deliberately omitted)."""
    import json

    cfg = report.config
    doc = {
        "config": {
            "per_class": cfg.per_class,
            "seed": cfg.seed,
            "node_budget": cfg.node_budget,
            "n_max": cfg.n_max,
            "classes": [
                {"name": c.name, "lo": c.lo, "hi": c.hi} for c in cfg.classes
            ],
        },
        "records": [
            {
                "class": r.weather_class,
                "index": r.index,
                "instance": {
                    "start": r.instance.start,
                    "dest": r.instance.dest,
                    "mandatory": list(r.instance.mandatory),
                },
                "weather": [r.weather.x1, r.weather.x2, r.weather.x3],
                "pco": _solver_doc(r.pco),
                "pcmco": {
                    **_solver_doc(r.pcmco),
                    "probe_p": r.pcmco_probe_p_milli / 1000.0,
                },
                "resamples": r.resamples,
            }
            for r in report.records
        ],
        "aggregates": report.aggregates,
        "tests": report.tests,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def report_to_csv(report: Report) -> str:
    """One row per record per solver, wall-clock included."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in report.records:
        for solver, s in (("pco", r.pco), ("pcmco", r.pcmco)):
            writer.writerow(
                [
                    r.weather_class,
                    r.index,
                    solver,
                    repr(s.d_end_m),
                    s.interventions,
                    s.optimal,
                    s.nodes_explored,
                    f"{s.wall_ms:.3f}",
                ]
            )
    return buf.getvalue()


def format_aggregate_table(report: Report) -> str:
    """Human-readable mean/med/std table per weather class and solver."""
    lines = [
        f"{'Weather & Method':<22}{'Distance (m)':>36}{'Interventions':>30}",
        f"{'':<22}{'mean':>12}{'med':>12}{'std':>12}{'mean':>10}{'med':>10}{'std':>10}",
    ]
    for cname, per_solver in report.aggregates.items():
        lines.append(f"{cname} weather")
        for solver in ("pco", "pcmco"):
            d = per_solver[solver]["distance_m"]
            i = per_solver[solver]["interventions"]
            lines.append(
                f"  {solver:<20}"
                f"{d['mean']:>12.1f}{d['median']:>12.1f}{d['std']:>12.1f}"
                f"{i['mean']:>10.2f}{i['median']:>10.1f}{i['std']:>10.2f}"
            )
        lines.append(
            f"  distance overhead: {per_solver['distance_overhead_pct']:.1f}%"
        )
    return "\n".join(lines) + "\n"
