"""Path planning with a learned edge-feasibility criterion.

Pipeline: generate a terrain graph, label edges with a synthetic
environment oracle under random weather, train an MLP to predict
feasibility, then plan start/dest/mandatory-waypoint routes with a
probe-seeded branch-and-bound that trades distance against predicted
human-intervention cost.
"""

from .terrain import (
    Arc,
    Edge,
    GraphError,
    Instance,
    Node,
    TerrainGraph,
    dijkstra,
    generate_graph,
    graph_to_json,
    load_graph,
    validate_instance,
)
from .envsim import (
    Sample,
    Weather,
    WeatherClass,
    WEATHER_CLASSES,
    build_dataset,
    feasibility_oracle,
    generate_missions,
    roughness,
)
from .neuralnet import (
    MLPParams,
    TrainConfig,
    TrainHistory,
    backward,
    bce,
    edge_preferences,
    evaluate,
    forward,
    train,
    train_logistic,
)
from .planner import (
    FlowModel,
    InvalidInstanceError,
    Plan,
    SolverConfig,
    build_model,
    extract_walk,
    plan_cost,
    probe,
    search,
)
from .stats import (
    aggregate,
    chi_square_sf,
    chi_square_test,
    paired_t_test,
    students_t_sf2,
)
from .benchmark import BenchmarkConfig, Report, count_interventions, run_benchmark

__version__ = "0.1.0"
