"""Incremental detection over a stream of snapshots.

Rows of nodes whose neighbourhood did not change are carried over from
the previous snapshot. Changed and newly born nodes are re-initialised
and are the only ones allowed to accept updates; everybody else just
feeds their rows into the propagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SequencingError
from .graph import Snapshot, SnapshotDelta, add_self_loops, diff_snapshots
from .labelprop import (
    CommunityAssignment,
    LabelState,
    Params,
    RunStats,
    _csr,
    extract_communities,
    init_rows,
    iterate,
    replace_rows,
    run_labelrank,
)

__all__ = [
    "StreamState",
    "StepResult",
    "initial_state",
    "step_snapshot",
    "run_stream",
    "apply_edge_update",
    "purge_labels",
]


@dataclass
class StreamState:
    """Everything carried from one time step to the next."""

    time_index: int
    state: LabelState
    snapshot: Snapshot  # with self-loops
    raw: Snapshot  # as given, used for the next diff
    assignment: CommunityAssignment
    stats: RunStats
    delta: SnapshotDelta | None = None


@dataclass
class StepResult:
    time_index: int
    assignment: CommunityAssignment
    stats: RunStats
    mean_labels: float
    active_nodes: int

    @property
    def iterations(self) -> int:
        return self.stats.iterations

    @property
    def updated_nodes(self) -> int:
        return self.stats.updated_nodes

    def __iter__(self):
        return iter((self.assignment, self.stats.iterations, self.stats.updated_nodes))


def initial_state(snapshot: Snapshot, params: Params) -> StreamState:
    result = run_labelrank(snapshot, params)
    looped = add_self_loops(snapshot, params.self_loop)
    return StreamState(snapshot.time_index, result.state, looped, snapshot, result.assignment, result.stats)


def purge_labels(P: sp.csr_matrix, labels: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Remove ``labels`` from every row and renormalise the rows that lost mass.

    Returns the new matrix and a mask of rows left empty (they keep no
    entries and must be refilled by the caller).
    """
    n = P.shape[0]
    drop = np.isin(P.indices, labels)
    if not drop.any():
        return P, np.zeros(n, dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(P.indptr))
    touched = np.bincount(rows[drop], minlength=n) > 0
    keep = ~drop
    data, kept_rows = P.data[keep], rows[keep]
    counts = np.bincount(kept_rows, minlength=n)
    sums = np.bincount(kept_rows, weights=data, minlength=n)
    renorm = touched[kept_rows]
    data[renorm] = data[renorm] / sums[kept_rows[renorm]]
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return _csr(data, P.indices[keep], indptr, P.shape), counts == 0


def step_snapshot(
    prev: StreamState,
    cur: Snapshot,
    params: Params,
    delta: SnapshotDelta | None = None,
) -> StreamState:
    """Advance the stream by one snapshot.

    ``delta`` defaults to :func:`diff_snapshots` of the previous and current
    raw snapshots; passing one explicitly (e.g. with every node marked
    changed) overrides the diff.
    """
    if cur.time_index != prev.time_index + 1:
        raise SequencingError(
            f"expected snapshot t={prev.time_index + 1}, got t={cur.time_index}"
        )
    if delta is None:
        delta = diff_snapshots(prev.raw, cur)
    looped = add_self_loops(cur, params.self_loop)
    n = looped.n
    if n == 0:
        raise DomainError(f"snapshot t={cur.time_index} is empty")
    n_labels = int(looped.nodes.max()) + 1

    reinit = np.zeros(n, dtype=bool)
    fresh = np.array(sorted((delta.changed | delta.born) & looped.node_set), dtype=np.int64)
    if len(fresh):
        reinit[looped.index_of(fresh)] = True
    # nodes unknown to the previous state must be initialised whatever the delta says
    prev_nodes = prev.state.nodes
    reinit |= ~np.isin(looped.nodes, prev_nodes)

    carry = np.flatnonzero(~reinit)
    P = init_rows(looped, n_labels=n_labels)
    if len(carry):
        prev_pos = np.searchsorted(prev_nodes, looped.nodes[carry])
        copied = prev.state.matrix[prev_pos]
        gone = np.setdiff1d(prev_nodes, looped.nodes)
        copied, emptied = purge_labels(copied, gone)
        if emptied.any():
            reinit[carry[emptied]] = True
            keep = ~emptied
            carry, copied = carry[keep], copied[np.flatnonzero(keep)]
        copied = _csr(copied.data, copied.indices, copied.indptr, (len(carry), n_labels))
        P = replace_rows(P, carry, copied)
    state = LabelState(looped.nodes, P)

    active = reinit
    if params.expand_active and active.any():
        S = looped.neighbor_matrix
        active = active | (S[np.flatnonzero(active)].sum(axis=0).A1 > 0)
    state, stats = iterate(looped, state, np.flatnonzero(active), params)
    return StreamState(cur.time_index, state, looped, cur, extract_communities(state), stats, delta)


def _result(ss: StreamState, active_nodes: int) -> StepResult:
    return StepResult(ss.time_index, ss.assignment, ss.stats, ss.state.mean_labels_per_row(), active_nodes)


def run_stream(snapshots: Sequence[Snapshot], params: Params) -> list[StepResult]:
    """Full run on the first snapshot, incremental steps afterwards."""
    if not snapshots:
        raise DomainError("the snapshot stream is empty")
    for t, snap in enumerate(snapshots):
        if snap.time_index != t:
            raise SequencingError(f"snapshot {t} carries time index {snap.time_index}")
    ss = initial_state(snapshots[0], params)
    results = [_result(ss, ss.snapshot.n)]
    for snap in snapshots[1:]:
        ss = step_snapshot(ss, snap, params)
        results.append(_result(ss, len(ss.delta.active)))
    return results


def apply_edge_update(
    prev: StreamState,
    src: int,
    dst: int,
    weight: float | None,
    params: Params,
) -> StreamState:
    """Handle a single arriving edge as a one-edge snapshot step.

    ``weight=None`` deletes the edge ``src -> dst``; any other value adds it
    or sets its weight. Unknown endpoints are born; nodes are never removed.
    """
    edges = prev.raw.edge_dict()
    if weight is None:
        if (src, dst) not in edges:
            raise DomainError(f"edge {src} -> {dst} does not exist")
        del edges[(src, dst)]
    else:
        edges[(src, dst)] = float(weight)
    nodes = np.union1d(prev.raw.nodes, [src, dst])
    cur = Snapshot.from_edges([(s, d, w) for (s, d), w in sorted(edges.items())], nodes, prev.time_index + 1)
    return step_snapshot(prev, cur, params)
