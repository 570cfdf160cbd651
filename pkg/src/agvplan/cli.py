"""Command-line front door: graph generation, dataset generation, training,
single-instance planning, and benchmarking.

Exit codes: 0 ok, 1 usage error, 2 infeasible instance, 3 I/O or schema
error.  Machine output goes to files (or stdout); diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import benchmark, envsim, neuralnet, planner, terrain

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message: str):
        raise _UsageError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IOError(f"cannot read '{path}': {exc.strerror}") from exc


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOError(f"cannot write '{path}': {exc.strerror}") from exc


def _load_graph_file(path: str) -> terrain.TerrainGraph:
    return terrain.load_graph(_read_text(path))


def _load_model_file(path: str) -> neuralnet.MLPParams:
    return neuralnet.params_from_json(_read_text(path))


def cmd_gen_graph(args) -> int:
    if args.nodes < 1:
        raise _UsageError("--nodes must be >= 1")
    if args.k < 1:
        raise _UsageError("--k must be >= 1")
    graph = terrain.generate_graph(args.nodes, args.k, args.seed)
    _write_text(args.out, terrain.graph_to_json(graph))
    _log(f"generated graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    if not 0.0 < args.val_split < 1.0:
        raise _UsageError("--val-split must be in (0, 1)")
    if args.missions < 0:
        raise _UsageError("--missions must be >= 0")
    graph = _load_graph_file(args.graph)
    train, val = envsim.build_dataset(graph, args.missions, args.seed, args.val_split)
    try:
        envsim.write_samples_csv(train, args.out_train)
        envsim.write_samples_csv(val, args.out_val)
    except OSError as exc:
        raise IOError(f"cannot write dataset: {exc.strerror}") from exc
    _log(f"dataset: {len(train)} train / {len(val)} val samples")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.lr <= 0:
        raise _UsageError("--lr must be > 0")
    if not 0.0 <= args.momentum < 1.0:
        raise _UsageError("--momentum must be in [0, 1)")
    if args.batch < 1 or args.epochs < 1 or args.patience < 0:
        raise _UsageError("bad --batch/--epochs/--patience")
    train_data = envsim.read_samples_csv(args.train)
    val_data = envsim.read_samples_csv(args.val)
    cfg = neuralnet.TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )
    fit = neuralnet.train_logistic if args.logistic else neuralnet.train
    params, history = fit(train_data, val_data, cfg)
    accuracy = neuralnet.evaluate(params, val_data)
    _write_text(args.out, neuralnet.params_to_json(params))
    _log(
        f"trained {params.kind}: {history.stopped_epoch} epochs, "
        f"best epoch {history.best_epoch + 1}, val accuracy {accuracy:.3f}"
    )
    return EXIT_OK


def _parse_weather(text: str) -> envsim.Weather:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError("--weather must be x1,x2,x3")
    try:
        return envsim.Weather(int(parts[0]), int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def cmd_plan(args) -> int:
    weather = _parse_weather(args.weather)
    if args.solver == "pcmco" and args.model is None:
        raise _UsageError("--model is required for the pcmco solver")
    graph = _load_graph_file(args.graph)
    mandatory = tuple(m for m in (args.mandatory or "").split(",") if m)
    inst = terrain.Instance(args.start, args.dest, mandatory)

    if args.solver == "pcmco":
        params = _load_model_file(args.model)
        penalties = neuralnet.edge_preferences(params, graph, weather)
    else:
        penalties = {}
    cfg = planner.SolverConfig(args.n, args.budget, args.solver)
    model = planner.build_model(graph, inst, penalties, cfg)
    _log(f"solving {args.solver} on {len(model.arcs)} arcs")
    plan = planner.search(model, cfg)
    if plan is None:
        _log("no feasible plan")
        return EXIT_INFEASIBLE
    interventions = benchmark.count_interventions(plan.walk, graph, weather)
    _write_text(args.out, planner.plan_to_json(plan, interventions))
    _log(
        f"plan: distance {plan.d_end_m:.1f} m, penalty {plan.p_end:.3f}, "
        f"{interventions} interventions, optimal={plan.optimal}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.per_class < 2:
        raise _UsageError("--per-class must be >= 2")
    if args.threads < 1:
        raise _UsageError("--threads must be >= 1")
    graph = _load_graph_file(args.graph)
    params = _load_model_file(args.model)
    cfg = benchmark.BenchmarkConfig(
        per_class=args.per_class,
        seed=args.seed,
        node_budget=args.budget,
        threads=args.threads,
    )
    _log(f"benchmarking {args.per_class} instances x {len(cfg.classes)} classes")
    report = benchmark.run_benchmark(graph, params, cfg)
    _write_text(args.out, benchmark.report_to_json(report))
    if args.csv:
        _write_text(args.csv, benchmark.report_to_csv(report))
    _log(benchmark.format_aggregate_table(report))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="agvplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", parents=[], help="generate a random terrain graph")
    p.add_argument("--nodes", type=int, required=True, help="node count (>= 1)")
    p.add_argument("--k", type=int, default=3, help="nearest neighbors per node (default 3)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", help="output graph JSON path (default stdout)")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("gen-data", help="build a labeled dataset from random missions")
    p.add_argument("--graph", required=True, help="graph JSON path")
    p.add_argument("--missions", type=int, default=500, help="mission count (default 500)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--val-split", type=float, default=0.2, help="validation fraction (default 0.2)")
    p.add_argument("--out-train", required=True, help="training CSV path")
    p.add_argument("--out-val", required=True, help="validation CSV path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the feasibility predictor")
    p.add_argument("--train", required=True, help="training CSV path")
    p.add_argument("--val", required=True, help="validation CSV path")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate (default 0.01)")
    p.add_argument("--momentum", type=float, default=0.9, help="SGD momentum (default 0.9)")
    p.add_argument("--batch", type=int, default=32, help="mini-batch size (default 32)")
    p.add_argument("--epochs", type=int, default=500, help="max epochs (default 500)")
    p.add_argument("--patience", type=int, default=20, help="early-stopping patience (default 20)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--logistic", action="store_true", help="train the logistic baseline instead")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plan", help="solve one start/dest/mandatory instance")
    p.add_argument("--graph", required=True, help="graph JSON path")
    p.add_argument("--model", help="model JSON path (required for pcmco)")
    p.add_argument("--weather", required=True, help="x1,x2,x3 integers in 0..10")
    p.add_argument("--start", required=True, help="start node id")
    p.add_argument("--dest", required=True, help="destination node id")
    p.add_argument("--mandatory", default="", help="comma-separated mandatory node ids")
    p.add_argument("--solver", choices=("pco", "pcmco"), default="pcmco", help="solver mode (default pcmco)")
    p.add_argument("--n", type=int, default=2, help="per-vertex throughput cap (default 2)")
    p.add_argument("--budget", type=int, default=None, help="search node budget (default unlimited)")
    p.add_argument("--out", help="output plan JSON path (default stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run the two-solver benchmark")
    p.add_argument("--graph", required=True, help="graph JSON path")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--per-class", type=int, default=50, help="instances per weather class (default 50)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--budget", type=int, default=200_000, help="search node budget per solve (default 200000)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="solver threads (default: available parallelism)")
    p.add_argument("--out", required=True, help="output report JSON path")
    p.add_argument("--csv", help="optional per-record CSV path (includes wall-clock)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except planner.InvalidInstanceError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (terrain.GraphError, IOError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
