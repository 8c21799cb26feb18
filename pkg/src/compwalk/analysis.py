"""Evaluation battery: coherence, analogies, hub geometry, clustering and drift.

Every function takes an EmbeddingModel and works on its event vectors, so
the same code evaluates Event2Vec and DeepWalk models.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    cosine,
    cosine_matrix,
    linear_interpolate,
    mean_pairwise_cosine,
    normalize_rows,
    pca,
    pearson,
    rank_sum_test,
    ward_cluster,
)

FOLD_CAP = 1e12


@dataclass
class EvalConfig:
    baseline_trials: int = 1000
    hub_trials: int = 1000
    seed: int = 0
    top_k: int = 5
    exclude_queries: bool = True
    geodesic_steps: int = 7
    hub_count: int = 8

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown EvalConfig keys: {sorted(unknown)}")
        return cls(**data)


def _names(model):
    return model.names()


def _index(model, name):
    return model.index_of(name)


def _members(pathways):
    groups = pathways.groups if hasattr(pathways, "groups") else pathways
    for name, idx in groups.items():
        if len(idx) < 2:
            raise ValueError(f"pathway {name!r} has fewer than 2 resolved members")
    return groups


# ---------------------------------------------------------------- coherence

def pathway_coherence(model, pathways):
    """Mean pairwise cosine per pathway; returns ``(per_pathway, mean)``."""
    groups = _members(pathways)
    per = {name: mean_pairwise_cosine(model.event_vectors[idx]) for name, idx in groups.items()}
    return per, float(np.mean(list(per.values())))


def random_coherence_baseline(model, sizes, trials=1000, seed=0):
    """Mean coherence of random node sets, ``trials`` draws for each size in ``sizes``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = model.num_nodes
    unit = normalize_rows(model.event_vectors)
    rng = np.random.default_rng(seed)
    values = []
    for size in sizes:
        if size > n:
            raise ValueError(f"set size {size} exceeds node count {n}")
        if size < 2:
            raise ValueError("set size must be >= 2")
        for _ in range(trials):
            idx = rng.choice(n, size=size, replace=False)
            s = unit[idx].sum(axis=0)
            # sum over unordered pairs of cosines = (|sum of unit vectors|^2 - size) / 2
            values.append((float(s @ s) - size) / (size * (size - 1)))
    return float(np.mean(values))


# ---------------------------------------------------------------- analogies

def nearest(model, query, k, exclude=()):
    """Top-``k`` ``(name, cosine)`` pairs for a query vector."""
    names = _names(model)
    qn = np.linalg.norm(query)
    if qn == 0:
        raise ValueError("query vector is zero")
    sims = np.clip(normalize_rows(model.event_vectors) @ (query / qn), -1.0, 1.0)
    if exclude:
        sims = sims.copy()
        sims[list(exclude)] = -np.inf
    # stable ordering: descending similarity, then ascending index
    order = np.lexsort((np.arange(len(sims)), -sims))[:k]
    return [(names[i], float(sims[i])) for i in order if np.isfinite(sims[i])]


def analogy(model, a, b, c, k=5, exclude_queries=True):
    """Top-``k`` completions of ``e_a - e_b + e_c`` by cosine."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ia, ib, ic = (_index(model, x) for x in (a, b, c))
    e = model.event_vectors
    query = e[ia] - e[ib] + e[ic]
    exclude = {ia, ib, ic} if exclude_queries else set()
    return nearest(model, query, k, exclude)


def analogy_suite(model, quads, k=5, exclude_queries=True):
    """Score ``(a, b, c, expected)`` quadruples; reports hit@1 and hit@3."""
    results = []
    for a, b, c, expected in quads:
        top = analogy(model, a, b, c, max(k, 3), exclude_queries)
        names = [n for n, _ in top]
        results.append({"query": [a, b, c], "expected": expected,
                        "top": [[n, s] for n, s in top[:k]],
                        "hit1": names[:1] == [expected], "hit3": expected in names[:3]})
    n = len(results)
    return {"results": results,
            "hit1_rate": sum(r["hit1"] for r in results) / n if n else None,
            "hit3_rate": sum(r["hit3"] for r in results) / n if n else None}


def transfer_battery(model, transfers, exclude_queries=True):
    """Apply each category's template relation to its queries.

    For template ``(s1, t1)`` and query ``s2`` the completion is
    ``analogy(t1, s1, s2)``. Returns per-test records, the mean top-1
    similarity, and how often the most common top-1 answer repeats per type.
    """
    tests = []
    repeats = {}
    for entry in transfers:
        s1, t1 = entry["template"]
        tops = []
        for query, expected in entry["queries"]:
            name, sim = analogy(model, t1, s1, query, 1, exclude_queries)[0]
            tops.append(name)
            tests.append({"type": entry["type"], "template": [s1, t1], "query": query,
                          "expected": expected, "top1": name, "similarity": sim,
                          "hit": None if expected is None else name == expected})
        if tops:
            answer, count = Counter(tops).most_common(1)[0]
            repeats[entry["type"]] = {"answer": answer, "count": count, "of": len(tops)}
    sims = [t["similarity"] for t in tests]
    return {"tests": tests, "mean_top1_similarity": float(np.mean(sims)) if sims else None,
            "repetition": repeats}


# ---------------------------------------------------------------- hub geometry

def norm_degree_analysis(model, graph):
    """Pearson r between node degree and event-vector norm."""
    if graph.num_nodes != model.num_nodes:
        raise ValueError("model and graph node sets differ")
    deg = graph.degrees.astype(float)
    norms = np.linalg.norm(model.event_vectors, axis=1)
    r = pearson(deg, norms)
    table = [[graph.node_names[i], int(deg[i]), float(norms[i])] for i in range(graph.num_nodes)]
    return r, table


def hub_centrality(model, hubs, trials=1000, seed=0):
    """Fold change of random-set vs hub distance to the embedding centroid.

    Returns a dict with ``fold``, ``p`` (rank-sum of hub distances against
    every other node), the raw means and a ``capped`` flag set when hubs sit
    exactly on the centroid.
    """
    hubs = [h if isinstance(h, (int, np.integer)) else _index(model, h) for h in hubs]
    if not hubs:
        raise ValueError("no hubs given")
    e = model.event_vectors
    dist = np.linalg.norm(e - e.mean(axis=0), axis=1)
    hub_mean = float(dist[hubs].mean())
    rng = np.random.default_rng(seed)
    n = len(e)
    rand_mean = float(np.mean([dist[rng.choice(n, size=len(hubs), replace=False)].mean()
                               for _ in range(trials)]))
    # hub distance at rounding level (relative to the typical distance) counts as zero
    capped = hub_mean <= 1e-12 * max(rand_mean, np.finfo(float).tiny)
    fold = FOLD_CAP if capped else min(rand_mean / hub_mean, FOLD_CAP)
    mask = np.ones(n, dtype=bool)
    mask[hubs] = False
    u, p = rank_sum_test(dist[hubs], dist[mask])
    return {"fold": fold, "capped": capped, "p": p, "U": u,
            "hub_mean_distance": hub_mean, "random_mean_distance": rand_mean}


def drug_target_separation(model, targets):
    targets = [t if isinstance(t, (int, np.integer)) else _index(model, t) for t in targets]
    norms = np.linalg.norm(model.event_vectors, axis=1)
    mask = np.ones(len(norms), dtype=bool)
    mask[targets] = False
    if not targets or not mask.any():
        raise ValueError("need nonempty target and non-target sets")
    u, p = rank_sum_test(norms[targets], norms[mask])
    return {"target_mean_norm": float(norms[targets].mean()),
            "other_mean_norm": float(norms[mask].mean()), "U": u, "p": p}


# ---------------------------------------------------------------- structure

def pathway_centroids(model, pathways):
    groups = _members(pathways)
    names = list(groups)
    return names, np.array([model.event_vectors[groups[n]].mean(axis=0) for n in names])


def centroid_heatmap(model, pathways):
    """Cosine matrix of pathway centroids, its Ward dendrogram, and the leaf-ordered matrix."""
    names, cents = pathway_centroids(model, pathways)
    if len(names) < 2:
        raise ValueError("need at least two pathways")
    sim = cosine_matrix(cents, names)
    dendro = ward_cluster(sim)
    return sim, dendro, sim.reordered(dendro.leaf_order)


def embedding_drift(model, cascade):
    """Cumulative sums along ``cascade`` and their PCA explained-variance ratios."""
    if len(cascade) < 3:
        raise ValueError("cascade needs at least 3 nodes")
    idx = [c if isinstance(c, (int, np.integer)) else _index(model, c) for c in cascade]
    points = np.cumsum(model.event_vectors[idx], axis=0)
    res = pca(points)
    ratios = res.explained_variance_ratio
    return {"points": points, "pc1": float(ratios[0]),
            "pc2": float(ratios[1]) if len(ratios) > 1 else 0.0,
            "projected": res.projected[:, :2]}


def geodesic_path(model, a, b, steps=7):
    """Nearest node (by cosine) to each point on the straight line from ``e_a`` to ``e_b``."""
    ia, ib = _index(model, a), _index(model, b)
    path = []
    for k, point in enumerate(linear_interpolate(model.event_vectors[ia], model.event_vectors[ib], steps)):
        name, sim = nearest(model, point, 1)[0]
        path.append((k, name, sim))
    return path, float(np.mean([p[2] for p in path]))


def pathway_decomposition(model, pathways):
    """Cosine between each centroid and the member sum divided by member count."""
    groups = pathways.groups if hasattr(pathways, "groups") else pathways
    out = {}
    for name, idx in groups.items():
        if not idx:
            continue
        vecs = model.event_vectors[idx]
        out[name] = cosine(vecs.mean(axis=0), vecs.sum(axis=0) / len(idx))
    return out


# ---------------------------------------------------------------- report

@dataclass
class EvalReport:
    model: str
    sections: dict = field(default_factory=dict)

    def to_dict(self):
        return {"model": self.model, **self.sections}


def _drift_sections(model, cascades, names):
    out = {}
    for cname, seq in cascades.items():
        if len(seq) < 3:
            continue
        d = embedding_drift(model, seq)
        out[cname] = {"nodes": [names[i] for i in seq], "pc1": d["pc1"], "pc2": d["pc2"],
                      "trajectory": d["projected"].tolist()}
    return out


def evaluate(model, graph, pathways, config=None, label="model", geodesics=()):
    """Run the full battery and return an EvalReport with a fixed section order."""
    config = config or EvalConfig()
    names = _names(model)
    sec = {}
    groups = {k: v for k, v in pathways.groups.items() if len(v) >= 2}
    if groups:
        per, mean = pathway_coherence(model, groups)
        sizes = [len(v) for v in groups.values()]
        base = random_coherence_baseline(model, sizes, config.baseline_trials, config.seed)
        sec["coherence"] = {"per_pathway": per, "mean": mean, "random_baseline": base,
                            "ratio": mean / base if base != 0 else None}
    if pathways.analogies:
        sec["analogies"] = analogy_suite(model, pathways.analogies, config.top_k,
                                         config.exclude_queries)
    if pathways.transfers:
        sec["transfer"] = transfer_battery(model, pathways.transfers, config.exclude_queries)
    try:
        r, table = norm_degree_analysis(model, graph)
        sec["norm_degree"] = {"pearson_r": r, "table": table}
    except ValueError as exc:
        sec["norm_degree"] = {"pearson_r": None, "error": str(exc)}
    hubs = pathways.hubs
    hub_source = "configured"
    if not hubs:
        from .graph_io import top_k_by_degree
        hubs = top_k_by_degree(graph, min(config.hub_count, graph.num_nodes))
        hub_source = "top_degree"
    sec["hubs"] = {"nodes": [names[h] for h in hubs], "source": hub_source,
                   **hub_centrality(model, hubs, config.hub_trials, config.seed)}
    if pathways.drug_targets:
        sec["drug_targets"] = {"nodes": [names[t] for t in pathways.drug_targets],
                               **drug_target_separation(model, pathways.drug_targets)}
    if len(groups) >= 2:
        sim, dendro, ordered = centroid_heatmap(model, groups)
        sec["heatmap"] = {"similarity": sim.to_dict(), "dendrogram": dendro.to_dict(),
                          "ordered": ordered.to_dict(), "distance": "1 - cosine"}
        sec["decomposition"] = pathway_decomposition(model, groups)
    if pathways.cascades:
        sec["drift"] = _drift_sections(model, pathways.cascades, names)
    if geodesics:
        paths = {}
        for a, b in geodesics:
            path, mean = geodesic_path(model, a, b, config.geodesic_steps)
            paths[f"{a}->{b}"] = {"path": [list(p) for p in path], "mean_similarity": mean}
        sec["geodesics"] = paths
    return EvalReport(label, sec)


def summary_row(report):
    """The Table-1 style headline numbers for one report (None where absent)."""
    s = report.sections if isinstance(report, EvalReport) else report
    coh = s.get("coherence", {})
    drift = s.get("drift", {})
    pc1 = [d["pc1"] for d in drift.values()]
    return {
        "coherence_mean": coh.get("mean"),
        "coherence_random_baseline": coh.get("random_baseline"),
        "coherence_ratio": coh.get("ratio"),
        "transfer_mean_similarity": s.get("transfer", {}).get("mean_top1_similarity"),
        "analogy_hit3_rate": s.get("analogies", {}).get("hit3_rate"),
        "drift_pc1_min": min(pc1) if pc1 else None,
        "drift_pc1_max": max(pc1) if pc1 else None,
        "drift_pc1_mean": float(np.mean(pc1)) if pc1 else None,
        "norm_degree_r": s.get("norm_degree", {}).get("pearson_r"),
        "hub_fold": s.get("hubs", {}).get("fold"),
        "hub_p": s.get("hubs", {}).get("p"),
        "drug_target_p": s.get("drug_targets", {}).get("p"),
    }


def compare(report_a, report_b):
    """Side-by-side summary of two reports: the machine-readable comparison table."""
    ra, rb = summary_row(report_a), summary_row(report_b)
    la = report_a.model if isinstance(report_a, EvalReport) else report_a.get("model", "a")
    lb = report_b.model if isinstance(report_b, EvalReport) else report_b.get("model", "b")
    return [{"metric": k, la: ra[k], lb: rb[k]} for k in ra]
