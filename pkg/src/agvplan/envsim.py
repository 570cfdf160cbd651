"""Synthetic environment: deterministic edge-feasibility oracle, random
missions, and labeled dataset construction.

The oracle stands in for an expensive 3D vehicle simulation.  It scores an
edge from the weather, the edge slope, and a hidden per-edge roughness term
derived from the edge id.  Roughness is deliberately left out of the sample
features so the learning problem keeps an irreducible error, as a real
simulator's unobserved terrain detail would.
"""

from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .terrain import Arc, Edge, Instance, TerrainGraph, greedy_chain

log = logging.getLogger(__name__)

WEATHER_MAX = 10

# Difficulty score weights: rain*slope, fog, wind*slope, roughness,
# roughness*weather coupling.  Label 0 (avoid) at or above the threshold.
_W_RAIN_SLOPE = 0.45
_W_FOG = 0.20
_W_WIND_SLOPE = 0.15
_W_ROUGH = 0.10
_W_ROUGH_WEATHER = 0.15
AVOID_THRESHOLD = 0.35

_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211

DATASET_HEADER = ["x1", "x2", "x3", "max_slope_deg", "dist_m", "label", "edge_id"]


@dataclass(frozen=True)
class Weather:
    """Rain, fog and wind intensities, each an integer in 0..10."""

    x1: int
    x2: int
    x3: int

    def __post_init__(self) -> None:
        for name, val in (("x1", self.x1), ("x2", self.x2), ("x3", self.x3)):
            if not isinstance(val, int) or not 0 <= val <= WEATHER_MAX:
                raise ValueError(f"weather {name}={val!r} outside 0..{WEATHER_MAX}")


@dataclass(frozen=True)
class Sample:
    """One labeled training example; edge_id is traceability metadata only."""

    features: tuple[float, float, float, float, float]
    label: int
    edge_id: str


@dataclass(frozen=True)
class WeatherClass:
    name: str
    lo: int
    hi: int

    def sample(self, rng: random.Random) -> Weather:
        return Weather(
            rng.randint(self.lo, self.hi),
            rng.randint(self.lo, self.hi),
            rng.randint(self.lo, self.hi),
        )


FINE = WeatherClass("fine", 0, 3)
MODERATE = WeatherClass("moderate", 4, 6)
DIFFICULT = WeatherClass("difficult", 7, 10)
WEATHER_CLASSES = (FINE, MODERATE, DIFFICULT)


def roughness(edge_id: str) -> float:
    """Hidden terrain roughness in [0, 1], a pure hash of the edge id."""
    h = _FNV_OFFSET
    for byte in edge_id.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) % (1 << 64)
    return (h % 1000) / 999.0


def difficulty_score(max_slope_deg: float, edge_id: str, w: Weather) -> float:
    s = min(max_slope_deg, 45.0) / 45.0
    rho = roughness(edge_id)
    r, f, g = w.x1 / 10.0, w.x2 / 10.0, w.x3 / 10.0
    return (
        _W_RAIN_SLOPE * r * s
        + _W_FOG * f
        + _W_WIND_SLOPE * g * s
        + _W_ROUGH * rho
        + _W_ROUGH_WEATHER * rho * (r + f + g) / 3.0
    )


def feasibility_oracle(edge: Edge | Arc, w: Weather) -> int:
    """1 if the edge is drivable autonomously under w, 0 if it should be
    avoided (would need human intervention)."""
    score = difficulty_score(edge.max_slope_deg, edge.edge_id if isinstance(edge, Arc) else edge.id, w)
    return 0 if score >= AVOID_THRESHOLD else 1


def sample_weather(rng: random.Random) -> Weather:
    """Uniform draw over the full 0..10 cube (dataset generation)."""
    return Weather(
        rng.randint(0, WEATHER_MAX),
        rng.randint(0, WEATHER_MAX),
        rng.randint(0, WEATHER_MAX),
    )


def generate_missions(graph: TerrainGraph, count: int, seed: int) -> list[Instance]:
    """Random missions: distinct start/dest, up to 10 mandatory nodes
    (capped at n_nodes - 2), sampled without replacement."""
    if len(graph.nodes) < 2:
        raise ValueError("mission generation needs a graph with >= 2 nodes")
    rng = random.Random(seed)
    ids = [n.id for n in graph.nodes]
    missions = []
    for _ in range(count):
        start = rng.choice(ids)
        dest = rng.choice([i for i in ids if i != start])
        cap = min(10, len(ids) - 2)
        n_mand = rng.randint(0, cap)
        pool = [i for i in ids if i not in (start, dest)]
        mandatory = tuple(rng.sample(pool, n_mand))
        missions.append(Instance(start, dest, mandatory))
    return missions


def _mission_seed(seed: int, index: int) -> int:
    # Integer mixing only: string/tuple seeding would go through salted hash().
    return (seed * 1_000_003 + index) & 0x7FFFFFFFFFFFFFFF


def mission_samples(
    graph: TerrainGraph, mission: Instance, w: Weather
) -> list[Sample] | None:
    """Samples along the greedy shortest-distance walk for one mission, or
    None when the mission cannot be routed."""
    dist_weights = [a.dist_mm for a in graph.arcs]
    walk = greedy_chain(
        graph, dist_weights, mission.start, mission.dest, mission.mandatory
    )
    if walk is None:
        return None
    samples = []
    for arc in walk:
        feats = (
            float(w.x1),
            float(w.x2),
            float(w.x3),
            arc.max_slope_deg,
            arc.dist_mm / 1000.0,
        )
        samples.append(Sample(feats, feasibility_oracle(arc, w), arc.edge_id))
    return samples


def build_dataset(
    graph: TerrainGraph,
    n_missions: int,
    seed: int,
    val_fraction: float,
) -> tuple[list[Sample], list[Sample]]:
    """Labeled samples from random missions under random weather, shuffled
    and split into (train, val).

    Weather is drawn per mission from an index-derived RNG stream, so the
    output does not depend on processing order.  Missions that cannot be
    routed are skipped and counted.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    if n_missions == 0:
        return [], []
    missions = generate_missions(graph, n_missions, seed)
    samples: list[Sample] = []
    skipped = 0
    for i, mission in enumerate(missions):
        w = sample_weather(random.Random(_mission_seed(seed, i)))
        mission_rows = mission_samples(graph, mission, w)
        if mission_rows is None:
            skipped += 1
            continue
        samples.extend(mission_rows)
    if skipped:
        log.info("skipped %d unroutable missions of %d", skipped, n_missions)
    rng = random.Random(_mission_seed(seed, n_missions))
    rng.shuffle(samples)
    n_val = int(round(len(samples) * val_fraction))
    n_val = min(max(n_val, 1), len(samples) - 1) if len(samples) > 1 else n_val
    return samples[n_val:], samples[:n_val]


def write_samples_csv(samples: Iterable[Sample], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for s in samples:
            x1, x2, x3, slope, dist = s.features
            writer.writerow([int(x1), int(x2), int(x3), repr(slope), repr(dist), s.label, s.edge_id])


def read_samples_csv(path: str) -> list[Sample]:
    """Parse a dataset CSV; raises ValueError naming the offending line."""
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise ValueError(f"line 1: expected header {','.join(DATASET_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != 7:
                    raise ValueError(f"expected 7 columns, got {len(row)}")
                feats = (
                    float(row[0]),
                    float(row[1]),
                    float(row[2]),
                    float(row[3]),
                    float(row[4]),
                )
                label = int(row[5])
                if label not in (0, 1):
                    raise ValueError(f"label must be 0 or 1, got {row[5]}")
                samples.append(Sample(feats, label, row[6]))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return samples
