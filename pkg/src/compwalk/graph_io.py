"""Interaction-graph ingestion: STRING-style edge lists and group definitions."""
from __future__ import annotations

import gzip
import json
import os
from dataclasses import dataclass, field

import numpy as np

DEFAULT_THRESHOLD = 700
MAX_SCORE = 1000


class GraphParseError(ValueError):
    """Raised for malformed edge-list input; carries the offending line number."""

    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass
class Graph:
    """Undirected graph in CSR form.

    Nodes are indexed in lexicographic order of their names. ``indptr``,
    ``indices`` and ``scores`` follow scipy's CSR layout; each undirected edge
    appears once in each endpoint's row.
    """

    node_names: list
    indptr: np.ndarray
    indices: np.ndarray
    scores: np.ndarray
    _index: dict = field(default=None, repr=False, compare=False)
    # counts before thresholding and isolate removal, when built from raw edges
    source_stats: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._index is None:
            self._index = {name: i for i, name in enumerate(self.node_names)}

    @property
    def num_nodes(self):
        return len(self.node_names)

    @property
    def num_edges(self):
        return int(len(self.indices) // 2)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    @property
    def adjacency(self):
        """Per-node list of ``(neighbor index, score)`` tuples."""
        return [self.neighbors(i) for i in range(self.num_nodes)]

    def neighbors(self, node):
        self._check(node)
        lo, hi = self.indptr[node], self.indptr[node + 1]
        return list(zip(self.indices[lo:hi].tolist(), self.scores[lo:hi].tolist()))

    def index_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown node {name!r}") from None

    def has_node(self, name):
        return name in self._index

    def has_edge(self, u, v):
        lo, hi = self.indptr[u], self.indptr[u + 1]
        row = self.indices[lo:hi]
        k = np.searchsorted(row, v)
        return bool(k < len(row) and row[k] == v)

    def edges(self):
        """Sorted ``(u, v, score)`` triples with ``u < v``."""
        out = []
        for u in range(self.num_nodes):
            for v, s in self.neighbors(u):
                if u < v:
                    out.append((u, v, s))
        return out

    def _check(self, node):
        if not 0 <= node < self.num_nodes:
            raise IndexError(f"node index {node} out of range [0, {self.num_nodes})")


def graph_from_edges(named_edges, threshold=DEFAULT_THRESHOLD):
    """Build a Graph from ``(name_a, name_b, score)`` triples.

    Duplicate and reversed pairs merge with the maximum score; self-loops and
    edges below ``threshold`` are dropped, as are nodes left without edges.
    """
    best = {}
    loops = 0
    for a, b, s in named_edges:
        if a == b:
            loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        if s > best.get(key, -1):
            best[key] = s
    kept = {k: s for k, s in best.items() if s >= threshold}
    source_stats = {"raw_nodes": len({n for pair in best for n in pair}), "raw_edges": len(best),
                    "self_loops_dropped": loops}
    names = sorted({n for pair in kept for n in pair})
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    if not kept:
        return Graph(names, np.zeros(n + 1, dtype=np.int64),
                     np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                     source_stats=source_stats)
    pairs = np.array([(index[a], index[b]) for a, b in kept], dtype=np.int64)
    sc = np.array(list(kept.values()), dtype=np.int64)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    sc = np.concatenate([sc, sc])
    order = np.lexsort((dst, src))
    src, dst, sc = src[order], dst[order], sc[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Graph(names, indptr, dst, sc, index, source_stats)


def parse_edge_list(path, threshold=DEFAULT_THRESHOLD):
    """Read a whitespace/tab separated ``node_a node_b score`` file.

    A non-numeric score on the first data line is treated as a header. Lines
    starting with ``#`` and blank lines are skipped. STRING "detailed" files
    must be cut to (protein1, protein2, combined_score) first. Paths ending
    in ``.gz`` are decompressed on the fly.
    """
    if not 0 <= threshold <= MAX_SCORE:
        raise ValueError(f"threshold {threshold} outside 0-{MAX_SCORE}")
    triples = []
    seen_data = False
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise GraphParseError(path, lineno, f"expected 3 columns, got {len(parts)}")
            try:
                score = int(parts[2])
            except ValueError:
                if not seen_data:
                    seen_data = True
                    continue  # header
                raise GraphParseError(path, lineno, f"non-integer score {parts[2]!r}") from None
            seen_data = True
            if not 0 <= score <= MAX_SCORE:
                raise GraphParseError(path, lineno, f"score {score} outside 0-{MAX_SCORE}")
            triples.append((parts[0], parts[1], score))
    return graph_from_edges(triples, threshold)


def dump_edge_list(graph, path):
    """Write the canonical sorted edge list (one ``a b score`` line per edge)."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in canonical_lines(graph):
            fh.write(line + "\n")


def canonical_lines(graph):
    names = graph.node_names
    return [f"{names[u]}\t{names[v]}\t{s}" for u, v, s in graph.edges()]


def degree(graph, node):
    graph._check(node)
    return int(graph.indptr[node + 1] - graph.indptr[node])


def top_k_by_degree(graph, k):
    """Indices of the ``k`` highest-degree nodes; ties go to the smaller name."""
    if k > graph.num_nodes:
        raise ValueError(f"k={k} exceeds node count {graph.num_nodes}")
    # node indices are already in name order, so a stable sort on -degree breaks ties by name
    order = np.argsort(-graph.degrees, kind="stable")
    return order[:k].tolist()


def degree_histogram(graph):
    counts = np.bincount(graph.degrees) if graph.num_nodes else np.zeros(0, dtype=int)
    return {int(d): int(c) for d, c in enumerate(counts) if c}


@dataclass
class PathwaySet:
    """Named node groups plus the auxiliary lists used by the evaluation battery.

    ``groups`` maps a pathway name to resolved node indices. Names that did not
    resolve are collected in ``warnings`` rather than dropped silently.
    """

    groups: dict
    hubs: list = field(default_factory=list)
    drug_targets: list = field(default_factory=list)
    cascades: dict = field(default_factory=dict)
    analogies: list = field(default_factory=list)
    transfers: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    undersized: list = field(default_factory=list)


def _resolve(graph, names, context, warnings):
    out = []
    for name in names:
        if graph.has_node(name):
            out.append(graph.index_of(name))
        else:
            warnings.append(f"{context}: unresolved node {name!r}")
    return out


def groups_from_dict(data, graph):
    """Resolve a group-definition mapping against ``graph``.

    Accepts either the full document layout (``pathways``, ``hubs``, ...) or a
    bare ``{name: [members]}`` mapping, which is read as pathways only.
    """
    if not isinstance(data, dict):
        raise ValueError("group definition must be a JSON object")
    known = {"pathways", "hubs", "drug_targets", "cascades", "analogies", "transfers"}
    if not known.intersection(data):
        data = {"pathways": data}
    warnings = []
    groups = {}
    undersized = []
    for name, members in data.get("pathways", {}).items():
        idx = _resolve(graph, members, f"pathway {name}", warnings)
        groups[name] = idx
        if len(idx) < 2:
            undersized.append(name)
            warnings.append(f"pathway {name}: only {len(idx)} resolved member(s)")
    hubs = _resolve(graph, data.get("hubs", []), "hubs", warnings)
    targets = _resolve(graph, data.get("drug_targets", []), "drug_targets", warnings)
    cascades = {name: _resolve(graph, seq, f"cascade {name}", warnings)
                for name, seq in data.get("cascades", {}).items()}
    analogies = []
    for quad in data.get("analogies", []):
        if len(quad) != 4:
            raise ValueError(f"analogy entry must have 4 names: {quad!r}")
        missing = [q for q in quad if not graph.has_node(q)]
        if missing:
            warnings.append(f"analogy {quad}: unresolved {missing}")
            continue
        analogies.append(tuple(quad))
    transfers = []
    for entry in data.get("transfers", []):
        kind = entry.get("type", "relation")
        pairs = [tuple(p) for p in entry.get("pairs", [])]
        template = tuple(entry["template"]) if "template" in entry else (pairs.pop(0) if pairs else None)
        if template is None or not all(graph.has_node(n) for n in template):
            warnings.append(f"transfer {kind}: unresolved or missing template {template}")
            continue
        # remaining pairs are (query, expected answer); bare queries have no expected answer
        queries = [(src, dst) for src, dst in pairs] + [(q, None) for q in entry.get("queries", [])]
        resolved = []
        for q, expected in queries:
            if not graph.has_node(q) or (expected is not None and not graph.has_node(expected)):
                warnings.append(f"transfer {kind}: unresolved query {(q, expected)}")
                continue
            resolved.append((q, expected))
        transfers.append({"type": kind, "template": template, "queries": resolved})
    return PathwaySet(groups, hubs, targets, cascades, analogies, transfers, warnings, undersized)


def load_groups(path, graph):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON: {exc}") from exc
    return groups_from_dict(data, graph)
