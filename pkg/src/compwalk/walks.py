"""Uniform random-walk corpus generation."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass
class WalkCorpus:
    walks: list
    walks_per_node: int
    walk_length: int
    seed: int

    def __len__(self):
        return len(self.walks)

    @property
    def num_tokens(self):
        return sum(len(w) for w in self.walks)

    def checksum(self):
        h = hashlib.sha256()
        h.update(json.dumps([self.walks_per_node, self.walk_length, self.seed]).encode())
        for w in self.walks:
            h.update(np.asarray(w, dtype=np.int64).tobytes())
            h.update(b"|")
        return h.hexdigest()


def _walk_uniforms(seed, node, walk_index, count):
    # Philox keyed on (seed, node, walk) gives each walk its own counter-based stream.
    key = np.array([seed & _MASK64, ((node << 32) | walk_index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).random(count)


def _generate_block(graph, starts, walk_ids, walk_length, seed):
    n = len(starts)
    out = np.empty((n, walk_length), dtype=np.int64)
    out[:, 0] = starts
    if walk_length == 1:
        return out
    u = np.stack([_walk_uniforms(seed, int(s), int(w), walk_length - 1)
                  for s, w in zip(starts, walk_ids)])
    indptr, indices = graph.indptr, graph.indices
    deg = np.diff(indptr)
    cur = out[:, 0]
    for step in range(1, walk_length):
        d = deg[cur]
        if np.any(d == 0):
            raise RuntimeError("dead-end node encountered; graph must have no isolated nodes")
        pick = np.minimum((u[:, step - 1] * d).astype(np.int64), d - 1)
        cur = indices[indptr[cur] + pick]
        out[:, step] = cur
    return out


def generate_walks(graph, walks_per_node=10, walk_length=15, seed=0, threads=1):
    """Generate ``walks_per_node`` uniform walks from every node.

    Walks are ordered by start node, then by walk index. Each walk draws from
    its own RNG stream, so the output does not depend on ``threads``.
    """
    if graph.num_nodes == 0:
        raise ValueError("graph is empty")
    if walks_per_node < 1 or walk_length < 1:
        raise ValueError("walks_per_node and walk_length must be >= 1")
    starts = np.repeat(np.arange(graph.num_nodes, dtype=np.int64), walks_per_node)
    walk_ids = np.tile(np.arange(walks_per_node, dtype=np.int64), graph.num_nodes)
    chunk = 4096
    bounds = [(i, min(i + chunk, len(starts))) for i in range(0, len(starts), chunk)]

    def run(b):
        lo, hi = b
        return _generate_block(graph, starts[lo:hi], walk_ids[lo:hi], walk_length, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, bounds))
    else:
        blocks = [run(b) for b in bounds]
    walks = [row.tolist() for block in blocks for row in block]
    return WalkCorpus(walks, walks_per_node, walk_length, seed)


def corpus_vocabulary(corpus, num_nodes=None):
    """``(node, count)`` pairs for every node that occurs in the corpus, sorted by node."""
    if not corpus.walks:
        raise ValueError("corpus is empty")
    counts = corpus_counts(corpus, num_nodes)
    return [(int(i), int(c)) for i, c in enumerate(counts) if c]


def corpus_counts(corpus, num_nodes=None):
    flat = np.concatenate([np.asarray(w, dtype=np.int64) for w in corpus.walks])
    return np.bincount(flat, minlength=num_nodes or 0)


def save_corpus(corpus, graph, path):
    names = graph.node_names
    with open(path, "w", encoding="utf-8") as fh:
        for w in corpus.walks:
            fh.write(" ".join(names[i] for i in w) + "\n")
    sidecar = {"walks_per_node": corpus.walks_per_node, "walk_length": corpus.walk_length,
               "seed": corpus.seed, "num_walks": len(corpus), "checksum": corpus.checksum()}
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_corpus(path, graph):
    with open(str(path) + ".json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    walks = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                walks.append([graph.index_of(n) for n in line.split()])
    return WalkCorpus(walks, meta["walks_per_node"], meta["walk_length"], meta["seed"])
