"""Planted-partition graphs with known communities, relations and cascades."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph_io import graph_from_edges, groups_from_dict

SYNTH_SCORE = 900


class DisconnectedGraphError(ValueError):
    pass


@dataclass
class PlantedSpec:
    num_communities: int = 10
    community_size: int = 20
    p_in: float = 0.3
    p_out: float = 0.01
    bridges: list = field(default_factory=lambda: [(0, 1), (1, 2), (2, 3)])
    chains: list = field(default_factory=lambda: [(0, 1, 2, 3)])
    cascades_per_chain: int = 5
    transfer_queries: int = 5
    drug_targets: int = 14
    seed: int = 7

    def validate(self):
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError("need 0 <= p_out < p_in <= 1")
        if self.community_size < 3:
            raise ValueError("community_size must be >= 3")
        if self.num_communities < 1:
            raise ValueError("num_communities must be >= 1")
        for i, j in self.bridges:
            if not (0 <= i < self.num_communities and 0 <= j < self.num_communities) or i == j:
                raise ValueError(f"bad bridge ({i}, {j})")
        bridged = {frozenset(b) for b in self.bridges}
        for chain in self.chains:
            for a, b in zip(chain, chain[1:]):
                if frozenset((a, b)) not in bridged:
                    raise ValueError(f"chain step {a}->{b} is not a bridge")
        return self

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown PlantedSpec keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("bridges", "chains"):
            if key in data:
                data[key] = [tuple(x) for x in data[key]]
        return cls(**data).validate()

    def to_dict(self):
        d = asdict(self)
        d["bridges"] = [list(b) for b in self.bridges]
        d["chains"] = [list(c) for c in self.chains]
        return d


def node_name(community, index):
    return f"c{community:02d}n{index:03d}"


@dataclass
class PlantedGraph:
    graph: object
    groups: dict  # group-definition document (same layout graph_io reads)
    pathways: object  # resolved PathwaySet
    info: dict


def planted_edges(spec):
    """Raw SBM edge list plus index-mate bridge edges, before component filtering."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k, s = spec.num_communities, spec.community_size
    n = k * s
    comm = np.repeat(np.arange(k), s)
    iu, ju = np.triu_indices(n, k=1)
    same = comm[iu] == comm[ju]
    prob = np.where(same, spec.p_in, spec.p_out)
    keep = rng.random(len(iu)) < prob
    pairs = {(int(a), int(b)) for a, b in zip(iu[keep], ju[keep])}
    intra = int(np.sum(keep & same))
    for ci, cj in spec.bridges:
        for idx in range(s):
            a, b = ci * s + idx, cj * s + idx
            pairs.add((min(a, b), max(a, b)))
    return pairs, intra


def generate_planted(spec):
    """Stochastic block model with planted relations and cascades.

    Bridge ``(i, j)`` links every member of community ``i`` to its
    index-mate in ``j``. That link is the planted relation: for members
    ``u_k`` and ``v_k`` the analogy ``v_k - u_k + u_m`` should retrieve
    ``v_m``. Cascades walk index-mates along each chain of bridged
    communities. Only the largest connected component is kept.
    """
    pairs, intra = planted_edges(spec)
    k, s = spec.num_communities, spec.community_size
    n = k * s
    if pairs:
        a = np.array(sorted(pairs))
        adj = coo_matrix((np.ones(len(a)), (a[:, 0], a[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
    else:
        labels = np.arange(n)
    sizes = np.bincount(labels)
    giant = int(np.argmax(sizes))
    kept = labels == giant
    dropped = int(n - kept.sum())
    info = {"nodes_generated": n, "nodes_kept": int(kept.sum()), "nodes_dropped": dropped,
            "components": int(len(sizes)), "intra_edges": intra,
            "edges_generated": len(pairs)}
    if dropped > n / 2:
        raise DisconnectedGraphError(
            f"largest component holds {int(kept.sum())} of {n} nodes; planted graph too sparse")
    names = [node_name(c, i) for c in range(k) for i in range(s)]
    edges = [(names[a], names[b], SYNTH_SCORE) for a, b in sorted(pairs) if kept[a] and kept[b]]
    graph = graph_from_edges(edges, threshold=0)
    info["edges_kept"] = graph.num_edges

    def alive(c, i):
        return kept[c * s + i]

    doc = {"pathways": {f"community_{c:02d}": [node_name(c, i) for i in range(s) if alive(c, i)]
                        for c in range(k)}}
    analogies, transfers = [], []
    for ci, cj in spec.bridges:
        for i in range(s):
            m = (i + 1) % s
            quad = [node_name(cj, i), node_name(ci, i), node_name(ci, m), node_name(cj, m)]
            if all(alive(c, x) for c, x in ((cj, i), (ci, i), (ci, m), (cj, m))):
                analogies.append(quad)
        mates = [i for i in range(s) if alive(ci, i) and alive(cj, i)]
        if len(mates) >= 2:
            t0 = mates[0]
            transfers.append({
                "type": f"bridge_{ci:02d}_{cj:02d}",
                "template": [node_name(ci, t0), node_name(cj, t0)],
                "pairs": [[node_name(ci, i), node_name(cj, i)]
                          for i in mates[1:1 + spec.transfer_queries]],
            })
    doc["analogies"] = analogies
    doc["transfers"] = transfers
    cascades = {}
    for chain in spec.chains:
        label = "-".join(str(c) for c in chain)
        for i in range(spec.cascades_per_chain):
            seq = [node_name(c, i) for c in chain if alive(c, i)]
            if len(seq) >= 3:
                cascades[f"chain_{label}_{i}"] = seq
    doc["cascades"] = cascades
    # stand-in for drug targets: well-connected nodes, like targets with many STRING partners
    deg = graph.degrees
    pool = np.flatnonzero(deg >= np.quantile(deg, 0.75))
    pick = np.random.default_rng([spec.seed, 1]).choice(
        pool, size=min(spec.drug_targets, len(pool)), replace=False)
    doc["drug_targets"] = [graph.node_names[i] for i in np.sort(pick)]
    doc["hubs"] = []
    pathways = groups_from_dict(doc, graph)
    return PlantedGraph(graph, doc, pathways, info)


def community_of(name):
    return int(name[1:3])


def write_planted(planted, out_dir):
    """Write ``edges.tsv`` and ``groups.json`` in the formats graph_io reads."""
    from .graph_io import dump_edge_list

    os.makedirs(out_dir, exist_ok=True)
    edges = os.path.join(out_dir, "edges.tsv")
    groups = os.path.join(out_dir, "groups.json")
    dump_edge_list(planted.graph, edges)
    with open(groups, "w", encoding="utf-8") as fh:
        json.dump(planted.groups, fh, indent=2, sort_keys=True)
    return edges, groups


# ---------------------------------------------------------------- scorecard

def _direction(a, b):
    if a is None or b is None:
        return None
    if a > b:
        return "pass"
    if a < b:
        return "fail"
    return "tie"


def planted_scorecard(report_e2v, report_dw, hit_threshold=0.5):
    """Desk-scale comparison checks between the compositional model and the baseline.

    Directional checks report ``pass``/``fail``/``tie``; a tie is not a
    failure. Raises if the two reports came from different corpora.
    """
    a = report_e2v.to_dict() if hasattr(report_e2v, "to_dict") else report_e2v
    b = report_dw.to_dict() if hasattr(report_dw, "to_dict") else report_dw
    ca, cb = a.get("corpus_checksum"), b.get("corpus_checksum")
    if ca is not None and cb is not None and ca != cb:
        raise ValueError("reports were computed on different corpora")
    ra = a.get("coherence", {}).get("ratio")
    rb = b.get("coherence", {}).get("ratio")
    checks = []
    sane = ra is not None and rb is not None and ra > 1 and rb > 1
    checks.append({"check": "coherence_ratio_above_one", "verdict": "pass" if sane else "fail",
                   "values": {a["model"]: ra, b["model"]: rb}})
    checks.append({"check": "coherence_ratio_advantage", "verdict": _direction(ra, rb),
                   "values": {a["model"]: ra, b["model"]: rb}})
    hit = a.get("analogies", {}).get("hit3_rate")
    hit_b = b.get("analogies", {}).get("hit3_rate")
    checks.append({"check": "planted_analogy_hit3", "threshold": hit_threshold,
                   "verdict": None if hit is None else ("pass" if hit >= hit_threshold else "fail"),
                   "values": {a["model"]: hit, b["model"]: hit_b}})

    def pc1(rep):
        d = rep.get("drift", {})
        return float(np.mean([v["pc1"] for v in d.values()])) if d else None

    pa, pb = pc1(a), pc1(b)
    checks.append({"check": "drift_pc1_advantage", "verdict": _direction(pa, pb),
                   "values": {a["model"]: pa, b["model"]: pb}})
    failed = [c["check"] for c in checks if c["verdict"] == "fail"]
    return {"checks": checks, "failed": failed, "baseline_sane": sane}
