import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from labelrankt import LabelState, Snapshot  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def state_from_rows(rows: dict, n_labels: int | None = None) -> LabelState:
    """LabelState from ``{node: {label: prob}}``."""
    nodes = np.array(sorted(rows), dtype=np.int64)
    width = n_labels or max(max(nodes), max(l for r in rows.values() for l in r)) + 1
    indptr, idx, data = [0], [], []
    for v in nodes.tolist():
        for lab, p in sorted(rows[v].items()):
            idx.append(lab)
            data.append(p)
        indptr.append(len(idx))
    mat = sp.csr_matrix((np.array(data, float), np.array(idx, np.int64), np.array(indptr)), shape=(len(nodes), width))
    return LabelState(nodes, mat)


@st.composite
def random_graphs(draw, max_nodes=12, min_nodes=1, weighted=True, directed=True, min_edges=0):
    """Snapshot with node ids drawn sparsely from a small range."""
    n = draw(st.integers(min_nodes, max_nodes))
    ids = sorted(draw(st.sets(st.integers(0, 3 * max_nodes), min_size=n, max_size=n)))
    pairs = [(a, b) for a in ids for b in ids if a != b and (directed or a < b)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=min(min_edges, len(pairs)))) if pairs else []
    if weighted:
        ws = draw(st.lists(st.floats(0.1, 10.0, allow_nan=False), min_size=len(chosen), max_size=len(chosen)))
    else:
        ws = [1.0] * len(chosen)
    edges = []
    for (a, b), w in zip(chosen, ws):
        edges.append((a, b, w))
        if not directed:
            edges.append((b, a, w))
    return Snapshot.from_edges(edges, nodes=ids)


def random_snapshot(rng: np.random.Generator, n: int, p: float, weighted=True, time_index=0) -> Snapshot:
    ids = np.sort(rng.choice(4 * n, size=n, replace=False))
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    s, d = np.nonzero(mask)
    w = rng.uniform(0.5, 2.0, len(s)) if weighted else np.ones(len(s))
    return Snapshot(ids, ids[s], ids[d], w, time_index)


@pytest.fixture
def two_triangles():
    edges = []
    for a, b in [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]:
        edges += [(a, b, 1.0), (b, a, 1.0)]
    return Snapshot.from_edges(edges)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
