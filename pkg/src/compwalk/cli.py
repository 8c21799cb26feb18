"""Command-line entry point: ``compwalk <subcommand> ...``.

Exit codes: 0 success, 1 scorecard failure under ``--strict``, 2 input
error, 3 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import pipeline
from .analysis import EvalConfig, evaluate
from .embed_core import load_model, save_model
from .graph_io import GraphParseError, PathwaySet, load_groups, parse_edge_list
from .plots import plot_report
from .synth import DisconnectedGraphError, PlantedSpec, generate_planted, write_planted
from .walks import generate_walks, load_corpus, save_corpus

log = logging.getLogger("compwalk")

EXIT_OK, EXIT_SCORECARD, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, GraphParseError,
                json.JSONDecodeError, DisconnectedGraphError, ValueError, KeyError)


class InputError(Exception):
    pass


def _load_json(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _stamp(args, extra=None):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "threads")}
    cfg.update(extra or {})
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return {"config_hash": hashlib.sha256(blob).hexdigest()[:16], "seed": getattr(args, "seed", None)}


def _load_graph(path):
    # canonical dumps are already thresholded
    return parse_edge_list(path, threshold=0)


def cmd_ingest(args):
    os.makedirs(args.out, exist_ok=True)
    graph, stats = pipeline.ingest(args.edges, args.threshold, args.out)
    pipeline._write_json(os.path.join(args.out, "stats.json"), {**_stamp(args), **stats})
    print(f"{graph.num_nodes} nodes, {graph.num_edges} edges at threshold {args.threshold}")
    return EXIT_OK


def cmd_walk(args):
    graph = _load_graph(args.graph)
    corpus = generate_walks(graph, args.walks_per_node, args.walk_length, args.seed, args.threads)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    save_corpus(corpus, graph, args.out)
    print(f"{len(corpus)} walks, checksum {corpus.checksum()}")
    return EXIT_OK


def cmd_train(args):
    graph = _load_graph(args.graph)
    corpus = load_corpus(args.corpus, graph)
    kinds = ["event2vec", "deepwalk"] if args.model == "both" else [args.model]
    os.makedirs(args.out, exist_ok=True)
    train_cfg = _load_json(args.config)
    for kind in kinds:
        tcfg = pipeline.TrainConfig.from_dict({**train_cfg, "seed": args.seed})
        model, report = pipeline.train_model(kind, corpus, tcfg, graph)
        save_model(model, os.path.join(args.out, f"{kind}.bin"))
        pipeline._write_json(os.path.join(args.out, f"{kind}.train.json"),
                             {**_stamp(args, train_cfg), **report.to_dict()})
        print(f"{kind}: final loss {report.total_loss[-1]:.6f}, checksum {report.checksum}")
    return EXIT_OK


def cmd_eval(args):
    graph = _load_graph(args.graph)
    model = load_model(args.model_file)
    if model.names() != graph.node_names:
        raise InputError("model and graph node sets differ")
    pathways = load_groups(args.groups, graph) if args.groups else PathwaySet({})
    for w in pathways.warnings:
        log.warning(w)
    econf = EvalConfig.from_dict({"seed": args.seed, **_load_json(args.config)})
    label = args.label or os.path.splitext(os.path.basename(args.model_file))[0]
    rep = evaluate(model, graph, pathways, econf, label=label).to_dict()
    rep.update({**_stamp(args), "model_checksum": model.checksum()})
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    pipeline._write_json(args.out, rep)
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_synth(args):
    spec = _load_json(args.config)
    if args.seed is not None:
        spec["seed"] = args.seed
    planted = generate_planted(PlantedSpec.from_dict(spec))
    edges, groups = write_planted(planted, args.out)
    info = planted.info
    print(f"{info['nodes_kept']} nodes, {info['edges_kept']} edges -> {edges}, {groups}")
    return EXIT_OK


def cmd_run(args):
    data = _load_json(args.config) if args.config else {"synth": {}}
    if args.seed is not None:
        data["seed"] = args.seed
    if args.model:
        data["models"] = ["event2vec", "deepwalk"] if args.model == "both" else [args.model]
    if args.out:
        data["out"] = args.out
    if args.threads:
        data["threads"] = args.threads
    if args.strict:
        data["strict"] = True
    if args.config:
        # paths in a config file are relative to the file
        base = os.path.dirname(os.path.abspath(args.config))
        for key in ("edges", "groups"):
            if data.get(key) and not os.path.isabs(data[key]):
                data[key] = os.path.join(base, data[key])
    cfg = pipeline.PipelineConfig.from_dict(data)
    try:
        manifest = pipeline.run(cfg, use_cache=not args.no_cache)
    except pipeline.StageError as exc:
        log.error(str(exc))
        if isinstance(exc.__cause__, INPUT_ERRORS):
            return EXIT_INPUT
        return EXIT_INTERNAL
    for row in manifest.get("comparison", []):
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    card = manifest.get("scorecard")
    if card:
        for c in card["checks"]:
            print(f"{c['check']}: {c['verdict']}")
        if cfg.strict and card["failed"]:
            return EXIT_SCORECARD
    return EXIT_OK


def cmd_plot(args):
    written, warnings = plot_report(args.report, args.out, prefix=args.prefix)
    for path in written:
        print(path)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="compwalk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse and threshold an edge list")
    s.add_argument("edges")
    s.add_argument("--threshold", type=int, default=700)
    s.add_argument("--out", default="graph")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("walk", help="generate the random-walk corpus")
    s.add_argument("graph", help="canonical edge list (from ingest)")
    s.add_argument("--walks-per-node", type=int, default=10)
    s.add_argument("--walk-length", type=int, default=15)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default="corpus/walks.txt")
    s.set_defaults(func=cmd_walk)

    s = sub.add_parser("train", help="train one or both models on a corpus")
    s.add_argument("graph")
    s.add_argument("corpus")
    s.add_argument("--model", choices=list(pipeline.MODEL_KINDS) + ["both"], default="both")
    s.add_argument("--config", help="JSON with TrainConfig fields")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default="models")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="run the evaluation battery on a saved model")
    s.add_argument("graph")
    s.add_argument("model_file")
    s.add_argument("--groups")
    s.add_argument("--config", help="JSON with EvalConfig fields")
    s.add_argument("--label")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="reports/report.json")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a planted-partition benchmark graph")
    s.add_argument("--config", help="JSON with PlantedSpec fields")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="synth")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="full pipeline: graph, walks, both models, reports")
    s.add_argument("--config", help="pipeline JSON; defaults to the planted benchmark")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--model", choices=list(pipeline.MODEL_KINDS) + ["both"])
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true", help="exit 1 if a scorecard check fails")
    s.add_argument("--no-cache", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("plot", help="render SVG figures from a report")
    s.add_argument("report")
    s.add_argument("--out", default="plots")
    s.add_argument("--prefix", default="")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
