import numpy as np
import pytest

from compwalk.embed_core import EmbeddingModel
from compwalk.graph_io import graph_from_edges


def make_graph(edges, threshold=0):
    """Graph from ``(a, b)`` or ``(a, b, score)`` tuples; missing scores default to 900."""
    return graph_from_edges([(e[0], e[1], e[2] if len(e) > 2 else 900) for e in edges], threshold)


def make_model(vectors, names=None, context=None):
    vectors = np.asarray(vectors, dtype=float)
    names = names or [f"n{i:03d}" for i in range(len(vectors))]
    ctx = np.zeros_like(vectors) if context is None else np.asarray(context, dtype=float)
    return EmbeddingModel(vectors, ctx, "euclidean", 1.0, None, list(names))


@pytest.fixture
def tiny_edges(tmp_path):
    p = tmp_path / "tiny.tsv"
    p.write_text("A\tB\t900\nB\tC\t500\nA\tC\t750\n")
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): numbered acceptance criterion")
    config.stash[CRITERIA] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    # one line per criterion: the call phase, or setup when the test was skipped there
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = dict(item.user_properties).get("detail", "")
        if rep.skipped and not detail:
            detail = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else ""
        item.config.stash[CRITERIA].append((str(mark.args[0]), status, detail))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, [])
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    key = lambda r: (int("".join(ch for ch in r[0] if ch.isdigit())), r[0])  # noqa: E731
    for label, status, detail in sorted(lines, key=key):
        terminalreporter.write_line(f"criterion {label:>3}: {status}  {detail}")
