"""End-to-end orchestration: ingest, walk, train both models, evaluate, compare."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field

from .analysis import EvalConfig, compare, evaluate
from .embed_core import EUCLIDEAN, POINCARE, load_model, save_model
from .graph_io import degree_histogram, dump_edge_list, load_groups, parse_edge_list
from .plots import plot_report
from .synth import PlantedSpec, generate_planted, planted_scorecard, write_planted
from .trainers import TrainConfig, train_deepwalk, train_event2vec
from .walks import generate_walks, load_corpus, save_corpus

log = logging.getLogger(__name__)

MODEL_KINDS = ("event2vec", "deepwalk", "event2vec-hyperbolic")
LAYOUT = ("graph", "corpus", "models", "reports", "plots")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class PipelineConfig:
    edges: str | None = None
    groups: str | None = None
    threshold: int = 700
    synth: dict | None = None
    walks_per_node: int = 10
    walk_length: int = 15
    train: dict = field(default_factory=dict)
    train_overrides: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    geodesics: list = field(default_factory=list)
    models: list = field(default_factory=lambda: ["event2vec", "deepwalk"])
    seed: int = 0
    threads: int = 1
    out: str = "run"
    strict: bool = False
    hit_threshold: float = 0.5
    plots: bool = True

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def validate(self):
        if self.synth is None and not self.edges:
            raise ValueError("config needs either 'edges' or 'synth'")
        for p in (self.edges, self.groups):
            if p and not os.path.exists(p):
                raise FileNotFoundError(p)
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ValueError(f"unknown model {m!r}; choose from {MODEL_KINDS}")
        return self

    def to_dict(self):
        return asdict(self)

    def hash(self):
        # output location, thread count and exit policy do not change results
        d = self.to_dict()
        for key in ("out", "threads", "strict"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def stage_seed(seed, stage):
    """Independent 63-bit seed for one pipeline stage, derived from the global seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def graph_stats(graph):
    return {"nodes": graph.num_nodes, "edges": graph.num_edges,
            "degree_histogram": {str(k): v for k, v in degree_histogram(graph).items()}}


def ingest(edges_path, threshold, out_dir):
    graph = parse_edge_list(edges_path, threshold)
    os.makedirs(out_dir, exist_ok=True)
    dump_edge_list(graph, os.path.join(out_dir, "edges.tsv"))
    stats = {"source": os.path.basename(edges_path), "threshold": threshold,
             **(graph.source_stats or {}), **graph_stats(graph)}
    _write_json(os.path.join(out_dir, "stats.json"), stats)
    return graph, stats


def _train_config(cfg, kind):
    base = {**cfg.train, **cfg.train_overrides.get(kind, {})}
    base.setdefault("seed", stage_seed(cfg.seed, "train"))
    return TrainConfig.from_dict(base)


def _cached(stamp_path, key):
    return os.path.exists(stamp_path) and _read_json(stamp_path).get("key") == key


def train_model(kind, corpus, tcfg, graph):
    if kind == "deepwalk":
        return train_deepwalk(corpus, tcfg, graph.num_nodes, graph.node_names)
    manifold = POINCARE if kind == "event2vec-hyperbolic" else EUCLIDEAN
    return train_event2vec(corpus, tcfg, graph.num_nodes, graph.node_names, manifold)


def run(cfg, use_cache=True):
    """Execute the full comparison; returns the manifest dict.

    One corpus is generated and handed to every trainer. Reports carry the
    config hash, global seed and corpus checksum and contain no timings, so
    reruns with the same config produce byte-identical report files.
    """
    cfg.validate()
    out = cfg.out
    for sub in LAYOUT:
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    chash = cfg.hash()
    stamp = {"config_hash": chash, "seed": cfg.seed}
    timings = {}
    manifest = {**stamp, "config": cfg.to_dict(), "artifacts": {}, "timings": timings}

    def stage(name):
        def wrap(fn):
            t0 = time.perf_counter()
            try:
                result = fn()
            except Exception as exc:  # surfaced with the stage name; partial artifacts stay on disk
                _write_json(os.path.join(out, "manifest.json"), {**manifest, "failed_stage": name})
                raise StageError(name, exc) from exc
            timings[name] = time.perf_counter() - t0
            return result
        return wrap

    # graph
    @stage("graph")
    def graph_stage():
        gdir = os.path.join(out, "graph")
        if cfg.synth is not None:
            spec = dict(cfg.synth)
            spec.setdefault("seed", stage_seed(cfg.seed, "synth"))
            planted = generate_planted(PlantedSpec.from_dict(spec))
            edges, groups = write_planted(planted, gdir)
            stats = {**graph_stats(planted.graph), "synth": planted.info,
                     "spec": PlantedSpec.from_dict(spec).to_dict()}
            _write_json(os.path.join(gdir, "stats.json"), {**stamp, **stats})
            return planted.graph, planted.pathways, stats
        graph, stats = ingest(cfg.edges, cfg.threshold, gdir)
        _write_json(os.path.join(gdir, "stats.json"), {**stamp, **stats})
        if cfg.groups:
            pathways = load_groups(cfg.groups, graph)
        else:
            from .graph_io import PathwaySet
            pathways = PathwaySet({})
        for w in pathways.warnings:
            log.warning(w)
        return graph, pathways, stats

    graph, pathways, stats = graph_stage
    manifest["artifacts"]["graph"] = "graph/edges.tsv"

    # corpus, generated once and shared by every model
    @stage("walk")
    def corpus_stage():
        path = os.path.join(out, "corpus", "walks.txt")
        wseed = stage_seed(cfg.seed, "walk")
        key = hashlib.sha256(json.dumps([stats["nodes"], stats["edges"], cfg.walks_per_node,
                                         cfg.walk_length, wseed, chash]).encode()).hexdigest()
        stamp_path = path + ".stamp"
        if use_cache and _cached(stamp_path, key):
            return load_corpus(path, graph)
        corpus = generate_walks(graph, cfg.walks_per_node, cfg.walk_length, wseed, cfg.threads)
        save_corpus(corpus, graph, path)
        _write_json(stamp_path, {"key": key})
        return corpus

    corpus = corpus_stage
    corpus_sum = corpus.checksum()
    manifest["corpus_checksum"] = corpus_sum
    manifest["artifacts"]["corpus"] = "corpus/walks.txt"

    ecfg = EvalConfig.from_dict({"seed": stage_seed(cfg.seed, "eval"), **cfg.eval})
    reports = {}
    for kind in cfg.models:
        tcfg = _train_config(cfg, kind)

        @stage(f"train:{kind}")
        def model_stage():
            mpath = os.path.join(out, "models", f"{kind}.bin")
            tpath = os.path.join(out, "models", f"{kind}.train.json")
            key = hashlib.sha256(json.dumps([kind, asdict(tcfg), corpus_sum]).encode()).hexdigest()
            if use_cache and os.path.exists(mpath) and _cached(tpath + ".stamp", key):
                return load_model(mpath), _read_json(tpath)
            model, report = train_model(kind, corpus, tcfg, graph)
            save_model(model, mpath)
            _write_json(tpath, {**stamp, **report.to_dict()})
            _write_json(tpath + ".stamp", {"key": key})
            return model, report.to_dict()

        model, treport = model_stage
        if treport["corpus_checksum"] != corpus_sum:
            raise StageError(f"train:{kind}", "model was trained on a different corpus")

        @stage(f"eval:{kind}")
        def eval_stage():
            rep = evaluate(model, graph, pathways, ecfg, label=kind,
                           geodesics=[tuple(g) for g in cfg.geodesics]).to_dict()
            rep.update({**stamp, "corpus_checksum": corpus_sum, "model_checksum": treport["checksum"],
                        "final_total_loss": treport["total_loss"][-1],
                        "final_reconstruction_loss": treport["reconstruction_loss"][-1]})
            _write_json(os.path.join(out, "reports", f"{kind}.json"), rep)
            return rep

        reports[kind] = eval_stage
        manifest["artifacts"][kind] = {"model": f"models/{kind}.bin",
                                       "report": f"reports/{kind}.json"}

    @stage("compare")
    def compare_stage():
        result = {}
        kinds = list(reports)
        if len(kinds) >= 2:
            a, b = reports[kinds[0]], reports[kinds[1]]
            table = compare(a, b)
            _write_json(os.path.join(out, "reports", "comparison.json"), {**stamp, "rows": table})
            with open(os.path.join(out, "reports", "comparison.csv"), "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=["metric", kinds[0], kinds[1]])
                writer.writeheader()
                writer.writerows(table)
            result["comparison"] = table
            if cfg.synth is not None:
                card = planted_scorecard(a, b, cfg.hit_threshold)
                _write_json(os.path.join(out, "reports", "scorecard.json"), {**stamp, **card})
                result["scorecard"] = card
        return result

    result = compare_stage
    manifest.update(result)

    if cfg.plots:
        @stage("plot")
        def plot_stage():
            files = []
            for kind, rep in reports.items():
                written, _ = plot_report(rep, os.path.join(out, "plots"), prefix=f"{kind}_")
                files.extend(os.path.relpath(p, out) for p in written)
            return files

        manifest["artifacts"]["plots"] = plot_stage
    _write_json(os.path.join(out, "manifest.json"), manifest)
    return manifest


def default_synth_config(out, seed=0, **overrides):
    """Planted-partition run config with the default training hyperparameters."""
    cfg = {"synth": {}, "seed": seed, "out": out}
    cfg.update(copy.deepcopy(overrides))
    return PipelineConfig.from_dict(cfg)
