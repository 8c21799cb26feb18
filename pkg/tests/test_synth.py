import math

import numpy as np
import pytest
from conftest import make_model

from compwalk.analysis import EvalConfig, evaluate
from compwalk.graph_io import canonical_lines, load_groups, parse_edge_list
from compwalk.synth import (
    DisconnectedGraphError,
    PlantedSpec,
    community_of,
    generate_planted,
    planted_edges,
    planted_scorecard,
    write_planted,
)


def test_disjoint_cliques_flagged():
    with pytest.raises(DisconnectedGraphError):
        generate_planted(PlantedSpec(p_in=1.0, p_out=0.0, bridges=[], chains=[]))


def test_default_intra_edge_count():
    pg = generate_planted(PlantedSpec(seed=7))
    n_pairs = 10 * math.comb(20, 2)
    mean, sd = n_pairs * 0.3, math.sqrt(n_pairs * 0.3 * 0.7)
    assert mean == pytest.approx(570)
    assert abs(pg.info["intra_edges"] - mean) <= 3 * sd


def test_analogy_quads_per_bridge():
    pg = generate_planted(PlantedSpec(bridges=[(0, 1), (2, 3)], chains=[], seed=7))
    assert pg.info["nodes_dropped"] == 0
    assert len(pg.groups["analogies"]) == 2 * 20
    for quad in pg.groups["analogies"]:
        d, b, c, expected = quad
        assert community_of(d) == community_of(expected) and community_of(b) == community_of(c)


def test_planted_relations_are_edges():
    pg = generate_planted(PlantedSpec(seed=3))
    g = pg.graph
    for d, b, _, _ in pg.groups["analogies"]:
        assert g.has_edge(g.index_of(d), g.index_of(b))


def test_determinism():
    a = generate_planted(PlantedSpec(seed=11))
    b = generate_planted(PlantedSpec(seed=11))
    assert canonical_lines(a.graph) == canonical_lines(b.graph)
    assert a.groups == b.groups
    assert canonical_lines(generate_planted(PlantedSpec(seed=12)).graph) != canonical_lines(a.graph)


def test_edge_count_concentration():
    spec0 = PlantedSpec()
    k, s = spec0.num_communities, spec0.community_size
    intra_pairs = k * math.comb(s, 2)
    inter_pairs = math.comb(k * s, 2) - intra_pairs
    for seed in range(50):
        spec = PlantedSpec(seed=seed, bridges=[], chains=[])
        pairs, intra = planted_edges(spec)
        inter = len(pairs) - intra
        assert abs(intra - intra_pairs * 0.3) <= 4 * math.sqrt(intra_pairs * 0.3 * 0.7)
        assert abs(inter - inter_pairs * 0.01) <= 4 * math.sqrt(inter_pairs * 0.01 * 0.99)


@pytest.mark.parametrize("bad", [{"p_in": 0.1, "p_out": 0.2}, {"community_size": 2},
                                 {"bridges": [(0, 0)], "chains": []},
                                 {"chains": [(0, 5)]}, {"num_communities": 0, "bridges": [], "chains": []}])
def test_spec_invariants(bad):
    with pytest.raises(ValueError):
        PlantedSpec(**bad).validate()


def test_spec_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        PlantedSpec.from_dict({"communities": 3})


def test_roundtrip_through_graph_io(tmp_path):
    pg = generate_planted(PlantedSpec(seed=5))
    edges, groups = write_planted(pg, tmp_path)
    g = parse_edge_list(edges, 0)
    assert canonical_lines(g) == canonical_lines(pg.graph)
    ps = load_groups(groups, g)
    assert ps.groups == pg.pathways.groups and not ps.warnings
    assert ps.transfers == pg.pathways.transfers
    assert len(ps.drug_targets) == 14


def _report(model, pg, label, checksum="same"):
    rep = evaluate(model, pg.graph, pg.pathways, EvalConfig(baseline_trials=30, hub_trials=10),
                   label=label).to_dict()
    rep["corpus_checksum"] = checksum
    return rep


def test_scorecard_identical_reports_tie():
    pg = generate_planted(PlantedSpec(seed=2))
    m = make_model(np.random.default_rng(0).normal(size=(pg.graph.num_nodes, 8)), pg.graph.node_names)
    a = _report(m, pg, "a")
    b = _report(m, pg, "b")
    card = planted_scorecard(a, b)
    verdicts = {c["check"]: c["verdict"] for c in card["checks"]}
    assert verdicts["coherence_ratio_advantage"] == "tie"
    assert verdicts["drift_pc1_advantage"] == "tie"
    assert "coherence_ratio_advantage" not in card["failed"]


def test_scorecard_untrained_models_fail_sanity():
    pg = generate_planted(PlantedSpec(seed=2))
    names = pg.graph.node_names
    a = _report(make_model(np.random.default_rng(1).normal(size=(len(names), 16)), names), pg, "a")
    b = _report(make_model(np.random.default_rng(2).normal(size=(len(names), 16)), names), pg, "b")
    card = planted_scorecard(a, b)
    assert not card["baseline_sane"]
    assert "coherence_ratio_above_one" in card["failed"]


def test_scorecard_swap_flips_verdicts():
    pg = generate_planted(PlantedSpec(seed=2))
    names = pg.graph.node_names
    comm = np.array([community_of(n) for n in names])
    r = np.random.default_rng(4)
    structured = make_model(r.normal(size=(10, 16))[comm] * 2 + r.normal(size=(len(names), 16)), names)
    noise = make_model(r.normal(size=(len(names), 16)), names)
    a, b = _report(structured, pg, "s"), _report(noise, pg, "n")
    flip = {"pass": "fail", "fail": "pass", "tie": "tie", None: None}
    ab = {c["check"]: c["verdict"] for c in planted_scorecard(a, b)["checks"]}
    ba = {c["check"]: c["verdict"] for c in planted_scorecard(b, a)["checks"]}
    for check in ("coherence_ratio_advantage", "drift_pc1_advantage"):
        assert ba[check] == flip[ab[check]]
    assert ab["coherence_ratio_advantage"] == "pass"


def test_scorecard_rejects_mismatched_corpora():
    pg = generate_planted(PlantedSpec(seed=2))
    m = make_model(np.random.default_rng(0).normal(size=(pg.graph.num_nodes, 4)), pg.graph.node_names)
    with pytest.raises(ValueError):
        planted_scorecard(_report(m, pg, "a", "x"), _report(m, pg, "b", "y"))
