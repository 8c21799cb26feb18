import math

import numpy as np
import pytest
from conftest import make_graph, make_model
from oracles import eig3_closed_form  # noqa: F401  (shared oracle module)

from compwalk.analysis import (
    FOLD_CAP,
    EvalConfig,
    analogy,
    analogy_suite,
    centroid_heatmap,
    compare,
    drug_target_separation,
    embedding_drift,
    evaluate,
    geodesic_path,
    hub_centrality,
    norm_degree_analysis,
    pathway_coherence,
    pathway_decomposition,
    random_coherence_baseline,
    summary_row,
    transfer_battery,
)
from compwalk.graph_io import PathwaySet


def random_model(n=40, d=8, seed=0):
    return make_model(np.random.default_rng(seed).normal(size=(n, d)))


# ---------------------------------------------------------------- coherence

def test_coherence_shared_embedding():
    vecs = np.random.default_rng(1).normal(size=(6, 4))
    vecs[[1, 3, 4]] = vecs[1]
    per, mean = pathway_coherence(make_model(vecs), {"P": [1, 3, 4]})
    assert per["P"] == pytest.approx(1.0, abs=1e-15) and mean == per["P"]


def test_coherence_undersized():
    with pytest.raises(ValueError):
        pathway_coherence(random_model(), {"P": [3]})


def test_baseline_identical_embeddings():
    m = make_model(np.tile([0.3, -1.0, 2.0], (10, 1)))
    base = random_coherence_baseline(m, [2, 3, 5], trials=20, seed=0)
    assert base == pytest.approx(1.0, abs=1e-12)
    _, mean = pathway_coherence(m, {"P": [0, 1, 2]})
    assert mean / base == pytest.approx(1.0, abs=1e-12)


def test_baseline_orthogonal_one_hot():
    m = make_model(np.eye(12))
    assert random_coherence_baseline(m, [2], trials=100, seed=3) == pytest.approx(0.0, abs=1e-15)


def test_baseline_matches_direct_pairwise_mean():
    from itertools import combinations

    from compwalk.numerics import cosine

    m = random_model(15, 5, seed=2)
    base = random_coherence_baseline(m, [4], trials=30, seed=9)
    r = np.random.default_rng(9)
    direct = []
    for _ in range(30):
        idx = r.choice(15, size=4, replace=False)
        direct.append(np.mean([cosine(m.event_vectors[i], m.event_vectors[j])
                               for i, j in combinations(idx, 2)]))
    assert base == pytest.approx(np.mean(direct), abs=1e-12)


def test_baseline_errors():
    m = random_model(5)
    with pytest.raises(ValueError):
        random_coherence_baseline(m, [6], trials=1)
    with pytest.raises(ValueError):
        random_coherence_baseline(m, [2], trials=0)


# ---------------------------------------------------------------- analogies

@pytest.mark.parametrize("seed", range(5))
def test_analogy_trivial_case(seed):
    m = random_model(seed=seed)
    a, c = m.names()[3], m.names()[17]
    top = analogy(m, a, a, c, k=3, exclude_queries=False)
    assert top[0][0] == c and top[0][1] == pytest.approx(1.0, abs=1e-12)


def test_analogy_exclusion_default():
    m = random_model()
    names = m.names()
    top = analogy(m, names[0], names[1], names[2], k=10)
    assert not {names[0], names[1], names[2]} & {n for n, _ in top}


def test_analogy_unresolved():
    with pytest.raises(KeyError):
        analogy(random_model(), "nope", "n000", "n001")


def test_analogy_scale_invariance():
    m = random_model(seed=4)
    scaled = make_model(m.event_vectors * 7.5, m.names())
    names = m.names()
    a = [n for n, _ in analogy(m, names[1], names[2], names[3], k=8)]
    b = [n for n, _ in analogy(scaled, names[1], names[2], names[3], k=8)]
    assert a == b


def test_planted_offset_analogies_hit():
    # members of community B are community A members plus one fixed offset
    r = np.random.default_rng(5)
    base = r.normal(size=(10, 16))
    offset = r.normal(size=16) * 3
    vecs = np.vstack([base, base + offset, r.normal(size=(10, 16))])
    m = make_model(vecs)
    names = m.names()
    quads = [(names[10 + i], names[i], names[(i + 1) % 10], names[10 + (i + 1) % 10]) for i in range(10)]
    res = analogy_suite(m, quads)
    assert res["hit3_rate"] >= 0.8
    # brute-force scan agrees with the reported top-1
    for rec in res["results"]:
        a, b, c = (m.index_of(x) for x in rec["query"])
        q = vecs[a] - vecs[b] + vecs[c]
        sims = vecs @ q / (np.linalg.norm(vecs, axis=1) * np.linalg.norm(q))
        sims[[a, b, c]] = -np.inf
        assert names[int(np.argmax(sims))] == rec["top"][0][0]


def test_transfer_degenerate_query_equals_source():
    m = random_model()
    names = m.names()
    transfers = [{"type": "t", "template": (names[2], names[5]), "queries": [(names[2], None)]}]
    out = transfer_battery(m, transfers, exclude_queries=False)
    assert out["tests"][0]["top1"] == names[5]
    assert out["tests"][0]["similarity"] == pytest.approx(1.0, abs=1e-12)


def test_transfer_battery_counts_repeats():
    m = random_model(seed=8)
    names = m.names()
    transfers = [{"type": "x", "template": (names[0], names[1]),
                  "queries": [(names[i], None) for i in range(2, 7)]}]
    out = transfer_battery(m, transfers)
    assert len(out["tests"]) == 5
    rep = out["repetition"]["x"]
    assert rep["of"] == 5 and 1 <= rep["count"] <= 5
    assert out["mean_top1_similarity"] == pytest.approx(np.mean([t["similarity"] for t in out["tests"]]))


# ---------------------------------------------------------------- hub geometry

def star_plus_path():
    edges = [("hub", f"l{i}") for i in range(6)] + [("l0", "x1"), ("x1", "x2"), ("x2", "x3")]
    return make_graph(edges)


def test_norm_inverse_degree_negative_r():
    g = star_plus_path()
    r = np.random.default_rng(0)
    dirs = r.normal(size=(g.num_nodes, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    m = make_model(dirs / g.degrees[:, None], g.node_names)
    rr, table = norm_degree_analysis(m, g)
    assert rr < 0
    assert len(table) == g.num_nodes


def test_norm_degree_degenerate():
    g = star_plus_path()
    m = make_model(np.eye(g.num_nodes)[:, :g.num_nodes], g.node_names)
    with pytest.raises(ValueError):
        norm_degree_analysis(m, g)


def test_hubs_at_centroid_capped():
    half = np.random.default_rng(1).normal(size=(9, 3))
    # +/- pairs put the centroid exactly at the origin, where the two hubs sit
    vecs = np.vstack([np.zeros((2, 3)), half, -half])
    out = hub_centrality(make_model(vecs), [0, 1], trials=50, seed=0)
    assert out["capped"] and out["fold"] == FOLD_CAP


def test_hub_fold_null_distribution():
    folds = []
    for seed in range(20):
        r = np.random.default_rng(seed)
        m = make_model(r.normal(size=(300, 8)))
        hubs = r.choice(300, size=8, replace=False).tolist()
        folds.append(hub_centrality(m, hubs, trials=200, seed=seed)["fold"])
    assert abs(np.mean(folds) - 1.0) <= 0.2
    assert all(0.6 < f < 1.6 for f in folds)


def test_hub_unresolved():
    with pytest.raises(KeyError):
        hub_centrality(random_model(), ["ghost"], trials=5)


def test_drug_targets_random_subset_null():
    small = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        m = make_model(r.normal(size=(80, 6)))
        targets = r.choice(80, size=10, replace=False).tolist()
        small += drug_target_separation(m, targets)["p"] <= 0.01
    assert small <= 5


def test_drug_targets_doubled_norms():
    r = np.random.default_rng(3)
    vecs = r.normal(size=(200, 8))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    vecs *= r.uniform(0.9, 1.1, size=(200, 1))
    targets = list(range(20))
    vecs[targets] *= 2
    out = drug_target_separation(make_model(vecs), targets)
    assert out["p"] < 1e-4 and out["target_mean_norm"] > out["other_mean_norm"]


def test_drug_targets_need_both_sets():
    with pytest.raises(ValueError):
        drug_target_separation(random_model(4), [0, 1, 2, 3])


# ---------------------------------------------------------------- structure

def test_heatmap_two_pathways_shared_vectors():
    u, v = np.array([1.0, 2.0, 0.5]), np.array([-0.5, 1.0, 3.0])
    m = make_model(np.vstack([u, u, u, v, v]))
    sim, dendro, ordered = centroid_heatmap(m, {"P": [0, 1, 2], "Q": [3, 4]})
    c = float(u @ v / np.linalg.norm(u) / np.linalg.norm(v))
    assert np.allclose(sim.values, [[1, c], [c, 1]], atol=1e-12)
    assert len(dendro.merges) == 1


def test_heatmap_duplicate_pathway_merged_first():
    m = random_model(30, 6, seed=2)
    groups = {"A": [0, 1, 2], "B": [5, 6, 7], "A2": [0, 1, 2], "C": [10, 11, 12]}
    sim, dendro, ordered = centroid_heatmap(m, groups)
    assert sim.values[0, 2] == pytest.approx(1.0, abs=1e-12)
    assert set(dendro.merges[0][:2]) == {0, 2}
    pos = [ordered.labels.index(x) for x in ("A", "A2")]
    assert abs(pos[0] - pos[1]) == 1


def test_heatmap_undersized():
    with pytest.raises(ValueError):
        centroid_heatmap(random_model(), {"A": [0, 1]})


def test_drift_identical_vectors():
    m = make_model(np.tile([0.4, -0.2, 1.0], (5, 1)))
    d = embedding_drift(m, [0, 1, 2, 3, 4])
    assert d["pc1"] == pytest.approx(1.0, abs=1e-10)


def test_drift_staircase_closed_form():
    m = make_model(np.array([[1.0, 0.0], [0.0, 1.0]]))
    cascade = [0, 1] * 4
    d = embedding_drift(m, cascade)
    pts = np.cumsum(m.event_vectors[cascade], axis=0)
    cov = np.cov(pts, rowvar=False)
    # 2x2 symmetric eigenvalues in closed form
    tr, det = np.trace(cov), np.linalg.det(cov)
    lam1 = tr / 2 + math.sqrt(tr * tr / 4 - det)
    assert d["pc1"] == pytest.approx(lam1 / tr, abs=1e-12)
    assert d["pc1"] + d["pc2"] == pytest.approx(1.0, abs=1e-12)


def test_drift_errors():
    m = random_model()
    with pytest.raises(ValueError):
        embedding_drift(m, [0, 1])
    with pytest.raises(KeyError):
        embedding_drift(m, ["n000", "n001", "zzz"])


def test_geodesic_same_endpoints():
    m = random_model()
    path, mean = geodesic_path(m, "n004", "n004", 5)
    assert [p[1] for p in path] == ["n004"] * 5 and mean == pytest.approx(1.0, abs=1e-12)


def test_geodesic_two_steps_returns_endpoints():
    m = random_model()
    path, _ = geodesic_path(m, "n001", "n009", 2)
    assert [p[1] for p in path] == ["n001", "n009"]
    assert [p[0] for p in path] == [0, 1]


def test_decomposition_identity():
    m = random_model(seed=6)
    out = pathway_decomposition(m, {"P": [0, 1, 2, 3], "Q": [5, 9], "solo": [7]})
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in out.values())
    assert set(out) == {"P", "Q", "solo"}


# ---------------------------------------------------------------- full report

def planted_setup():
    from compwalk.synth import PlantedSpec, generate_planted

    pg = generate_planted(PlantedSpec(num_communities=4, community_size=8, p_in=0.6,
                                      bridges=[(0, 1), (1, 2)], chains=[(0, 1, 2)], seed=1))
    return pg


def test_evaluate_sections_and_invariants():
    pg = planted_setup()
    m = make_model(np.random.default_rng(0).normal(size=(pg.graph.num_nodes, 8)), pg.graph.node_names)
    cfg = EvalConfig(baseline_trials=50, hub_trials=50)
    rep = evaluate(m, pg.graph, pg.pathways, cfg, label="rand",
                   geodesics=[(pg.graph.node_names[0], pg.graph.node_names[5])]).to_dict()
    assert list(rep) == ["model", "coherence", "analogies", "transfer", "norm_degree", "hubs",
                         "drug_targets", "heatmap", "decomposition", "drift", "geodesics"]
    coh = rep["coherence"]
    assert coh["ratio"] * coh["random_baseline"] == pytest.approx(coh["mean"], abs=1e-10)
    assert rep["hubs"]["source"] == "top_degree" and len(rep["hubs"]["nodes"]) == 8
    vals = np.array(rep["heatmap"]["similarity"]["values"])
    assert np.all(np.abs(vals) <= 1.0)
    again = evaluate(m, pg.graph, pg.pathways, cfg, label="rand",
                     geodesics=[(pg.graph.node_names[0], pg.graph.node_names[5])]).to_dict()
    assert again == rep


def test_planted_community_coherence_beats_cross():
    pg = planted_setup()
    r = np.random.default_rng(2)
    centres = r.normal(size=(4, 8)) * 3
    comm = [int(n[1:3]) for n in pg.graph.node_names]
    m = make_model(centres[comm] + r.normal(size=(pg.graph.num_nodes, 8)), pg.graph.node_names)
    per, _ = pathway_coherence(m, pg.pathways.groups)
    unit = m.event_vectors / np.linalg.norm(m.event_vectors, axis=1, keepdims=True)
    for name, idx in pg.pathways.groups.items():
        others = [i for i in range(m.num_nodes) if i not in set(idx)]
        cross = float(np.mean(unit[idx] @ unit[others].T))
        assert per[name] > cross


def test_summary_and_compare():
    pg = planted_setup()
    m = make_model(np.random.default_rng(0).normal(size=(pg.graph.num_nodes, 8)), pg.graph.node_names)
    cfg = EvalConfig(baseline_trials=10, hub_trials=10)
    a = evaluate(m, pg.graph, pg.pathways, cfg, label="a")
    b = evaluate(m, pg.graph, pg.pathways, cfg, label="b")
    table = compare(a, b)
    assert all(row["a"] == row["b"] for row in table)
    assert summary_row(a)["coherence_ratio"] == a.sections["coherence"]["ratio"]


def test_evaluate_empty_pathways():
    g = star_plus_path()
    m = make_model(np.random.default_rng(0).normal(size=(g.num_nodes, 3)), g.node_names)
    rep = evaluate(m, g, PathwaySet({}), EvalConfig(hub_trials=5)).to_dict()
    assert "coherence" not in rep and "hubs" in rep
