"""Label distributions and the LabelRank operators.

Every node holds a sparse probability row over labels, where a label is a
node id. The whole state is one CSR matrix ``P`` of shape ``(n, L)``: row
``i`` belongs to ``state.nodes[i]`` and column ``c`` is label ``c``. One
iteration is

    propagate -> inflate -> cutoff -> conditional update

Two flavours of each operator are provided. The row-level functions
(:func:`inflate`, :func:`cutoff`, :func:`max_label_set`, ...) act on a
single :class:`LabelDistribution` and are meant for inspection and tests.
The ``*_rows`` kernels act on a whole CSR matrix and are what the drivers
run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParameterError
from .graph import SelfLoopMode, Snapshot, add_self_loops

__all__ = [
    "MAX_SET_TOL",
    "LabelDistribution",
    "LabelState",
    "Params",
    "CommunityAssignment",
    "RunStats",
    "LabelRankResult",
    "init_distribution",
    "propagate",
    "inflate",
    "cutoff",
    "max_label_set",
    "conditional_update",
    "extract_communities",
    "run_labelrank",
    "iterate",
    "propagate_rows",
    "inflate_rows",
    "cutoff_rows",
    "max_set_rows",
    "subset_counts",
    "neighbor_pairs",
    "replace_rows",
]

MAX_SET_TOL = 1e-12
_SUM_TOL = 1e-9


class LabelDistribution:
    """Sparse probability row: sorted labels with positive probabilities."""

    __slots__ = ("labels", "probs")

    def __init__(self, labels, probs, *, validate: bool = True):
        labels = np.asarray(labels, dtype=np.int64)
        probs = np.asarray(probs, dtype=np.float64)
        if validate:
            if labels.shape != probs.shape or labels.ndim != 1:
                raise DomainError("labels and probs must be 1-d and of equal length")
            if len(labels) == 0:
                raise DomainError("a label distribution needs at least one entry")
            order = np.argsort(labels, kind="stable")
            labels, probs = labels[order], probs[order]
            if np.any(labels[1:] == labels[:-1]):
                raise DomainError("duplicate label in distribution")
            if np.any(probs <= 0) or np.any(probs > 1 + _SUM_TOL):
                raise DomainError("probabilities must lie in (0, 1]")
            if abs(probs.sum() - 1.0) > _SUM_TOL:
                raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.labels = labels
        self.probs = probs

    @classmethod
    def from_dict(cls, mapping: Mapping[int, float]) -> "LabelDistribution":
        items = sorted(mapping.items())
        return cls([k for k, _ in items], [v for _, v in items])

    def to_dict(self) -> dict[int, float]:
        return dict(zip(self.labels.tolist(), self.probs.tolist()))

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, label: int) -> float:
        k = np.searchsorted(self.labels, label)
        if k < len(self.labels) and self.labels[k] == label:
            return float(self.probs[k])
        return 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelDistribution):
            return NotImplemented
        return np.array_equal(self.labels, other.labels) and np.array_equal(self.probs, other.probs)

    __hash__ = None  # type: ignore[assignment]

    def allclose(self, other: "LabelDistribution", atol: float = 1e-12) -> bool:
        return np.array_equal(self.labels, other.labels) and np.allclose(
            self.probs, other.probs, rtol=0, atol=atol
        )

    def __repr__(self) -> str:
        body = ", ".join(f"{lab}: {p:.6g}" for lab, p in zip(self.labels.tolist(), self.probs.tolist()))
        return f"LabelDistribution({{{body}}})"


# -- row-level operators -------------------------------------------------------

def inflate(row: LabelDistribution, exponent: float) -> LabelDistribution:
    """Raise every probability to ``exponent`` and renormalise."""
    if exponent < 1:
        raise ParameterError(f"inflation exponent must be >= 1, got {exponent}")
    if exponent == 1:
        return LabelDistribution(row.labels.copy(), row.probs.copy(), validate=False)
    powered = row.probs ** exponent
    return LabelDistribution(row.labels.copy(), powered / powered.sum(), validate=False)


def cutoff(row: LabelDistribution, threshold: float) -> LabelDistribution:
    """Drop entries below ``threshold`` and renormalise.

    When nothing survives, the largest entry (smallest label on ties) is
    kept with probability 1.
    """
    keep = row.probs >= threshold
    if keep.all():
        return LabelDistribution(row.labels.copy(), row.probs.copy(), validate=False)
    if not keep.any():
        best = int(np.argmax(row.probs))
        return LabelDistribution(row.labels[best:best + 1].copy(), np.ones(1), validate=False)
    probs = row.probs[keep]
    return LabelDistribution(row.labels[keep], probs / probs.sum(), validate=False)


def max_label_set(row: LabelDistribution, tol: float = MAX_SET_TOL) -> frozenset:
    top = row.probs.max()
    return frozenset(row.labels[row.probs >= top - tol].tolist())


# -- CSR kernels ---------------------------------------------------------------

def _row_ids(mat: sp.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(mat.shape[0]), np.diff(mat.indptr))


def _row_sums(mat: sp.csr_matrix) -> np.ndarray:
    return np.bincount(_row_ids(mat), weights=mat.data, minlength=mat.shape[0])


def _row_max(mat: sp.csr_matrix) -> np.ndarray:
    # rows are never empty
    return np.maximum.reduceat(mat.data, mat.indptr[:-1]) if mat.nnz else np.zeros(mat.shape[0])


def _csr(data, indices, indptr, shape) -> sp.csr_matrix:
    mat = sp.csr_matrix((data, indices, indptr), shape=shape)
    mat.has_sorted_indices = True
    return mat


def propagate_rows(w_rows: sp.csr_matrix, P: sp.csr_matrix, w_sums: np.ndarray | None = None) -> sp.csr_matrix:
    """Weighted average of in-neighbour rows.

    ``w_rows`` holds the in-weight rows (self-loops included) of the nodes to
    update, with columns indexing rows of ``P``.
    """
    if w_sums is None:
        w_sums = _row_sums(w_rows)
    out = (w_rows @ P).tocsr()
    out.sort_indices()
    out.data /= np.repeat(w_sums, np.diff(out.indptr))
    return out


def inflate_rows(P: sp.csr_matrix, exponent: float) -> sp.csr_matrix:
    if exponent < 1:
        raise ParameterError(f"inflation exponent must be >= 1, got {exponent}")
    out = P.copy()
    if exponent != 1:
        out.data = out.data ** exponent
        out.data /= np.repeat(_row_sums(out), np.diff(out.indptr))
    return out


def cutoff_rows(P: sp.csr_matrix, threshold: float) -> sp.csr_matrix:
    n = P.shape[0]
    rows = _row_ids(P)
    keep = P.data >= threshold
    if keep.all():
        return P.copy()
    survivors = np.bincount(rows[keep], minlength=n)
    starved = survivors == 0
    if starved.any():
        is_max = (P.data == _row_max(P)[rows]) & starved[rows]
        cand = np.flatnonzero(is_max)
        # first max position per starved row is the smallest label
        _, first = np.unique(rows[cand], return_index=True)
        keep[cand[first]] = True
    trimmed = np.bincount(rows[~keep], minlength=n) > 0
    data = P.data[keep]
    new_rows = rows[keep]
    sums = np.bincount(new_rows, weights=data, minlength=n)
    renorm = trimmed[new_rows]
    data[renorm] = data[renorm] / sums[new_rows[renorm]]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(new_rows, minlength=n))])
    return _csr(data, P.indices[keep], indptr, P.shape)


def max_set_rows(P: sp.csr_matrix, tol: float = MAX_SET_TOL) -> sp.csr_matrix:
    """Boolean-valued CSR marking each row's maximal labels."""
    rows = _row_ids(P)
    keep = P.data >= _row_max(P)[rows] - tol
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows[keep], minlength=P.shape[0]))])
    return _csr(np.ones(int(keep.sum())), P.indices[keep], indptr, P.shape)


def replace_rows(P: sp.csr_matrix, rows: np.ndarray, new: sp.csr_matrix) -> sp.csr_matrix:
    """Copy of ``P`` with ``P[rows[t]] = new[t]``; values are copied bit-exactly."""
    if len(rows) == 0:
        return P
    n_cols = max(P.shape[1], new.shape[1])
    lengths = np.diff(P.indptr).copy()
    starts = P.indptr[:-1].copy()
    lengths[rows] = np.diff(new.indptr)
    starts[rows] = new.indptr[:-1] + P.nnz
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    gather = np.repeat(starts - indptr[:-1], lengths) + np.arange(indptr[-1])
    data = np.concatenate([P.data, new.data])[gather]
    indices = np.concatenate([P.indices, new.indices])[gather]
    return _csr(data, indices, indptr, (P.shape[0], n_cols))


def neighbor_pairs(S: sp.csr_matrix, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(owner, i, j)`` arrays listing every neighbour ``j`` of each ``rows[owner]``."""
    rows = np.asarray(rows, dtype=np.int64)
    sub = S[rows]
    deg = np.diff(sub.indptr)
    owner = np.repeat(np.arange(len(rows)), deg)
    return owner, rows[owner], sub.indices.astype(np.int64)


def subset_counts(
    M: sp.csr_matrix,
    S: sp.csr_matrix,
    rows: np.ndarray,
    pairs: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    chunk: int = 1 << 21,
) -> np.ndarray:
    """For each node index in ``rows``: how many neighbours ``j`` have C_i* within C_j*.

    ``M`` is the max-set matrix and ``S`` the binary neighbour matrix.
    ``pairs`` may carry a precomputed :func:`neighbor_pairs` result.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64)
    owner, pi, pj = neighbor_pairs(S, rows) if pairs is None else pairs
    L = np.int64(M.shape[1])
    sizes = np.diff(M.indptr)
    first = M.indices[M.indptr[:-1]].astype(np.int64)
    keys = _row_ids(M).astype(np.int64) * L + M.indices

    def member(node, label):
        k = node * L + label
        pos = np.searchsorted(keys, k)
        pos[pos == len(keys)] = 0
        return keys[pos] == k

    # cheap filters first: |C_i| <= |C_j| and min(C_i) in C_j
    hit = sizes[pi] <= sizes[pj]
    hit[hit] = member(pj[hit], first[pi[hit]])
    multi = np.flatnonzero(hit & (sizes[pi] > 1))
    if len(multi):
        need = sizes[pi[multi]]
        bounds = np.concatenate([[0], np.cumsum(need)])
        lo = 0
        while lo < len(multi):
            hi = int(np.searchsorted(bounds, bounds[lo] + chunk, side="right")) - 1
            hi = max(hi, lo + 1)
            sel = multi[lo:hi]
            cnt = need[lo:hi]
            local = np.repeat(np.arange(len(sel)), cnt)
            offset = np.arange(int(cnt.sum())) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            labels = M.indices[M.indptr[pi[sel]][local] + offset]
            found = member(pj[sel][local], labels)
            misses = np.bincount(local[~found], minlength=len(sel))
            hit[sel[misses > 0]] = False
            lo = hi
    return np.bincount(owner[hit], minlength=len(rows))


# -- state and results ---------------------------------------------------------

class LabelState:
    """Label rows plus their maximal-label sets for every node of a snapshot."""

    def __init__(self, nodes: np.ndarray, matrix: sp.csr_matrix, max_sets: sp.csr_matrix | None = None):
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.matrix = matrix
        self.max_matrix = max_set_rows(matrix) if max_sets is None else max_sets

    @property
    def n(self) -> int:
        return len(self.nodes)

    def _pos(self, node: int) -> int:
        k = int(np.searchsorted(self.nodes, node))
        if k >= self.n or self.nodes[k] != node:
            raise DomainError(f"node {node} has no label row")
        return k

    def row(self, node: int) -> LabelDistribution:
        k = self._pos(node)
        lo, hi = self.matrix.indptr[k], self.matrix.indptr[k + 1]
        return LabelDistribution(
            self.matrix.indices[lo:hi].astype(np.int64), self.matrix.data[lo:hi].copy(), validate=False
        )

    def max_set(self, node: int) -> frozenset:
        k = self._pos(node)
        return frozenset(self.max_matrix.indices[self.max_matrix.indptr[k]:self.max_matrix.indptr[k + 1]].tolist())

    @cached_property
    def rows(self) -> dict[int, LabelDistribution]:
        return {node: self.row(node) for node in self.nodes.tolist()}

    @cached_property
    def max_sets(self) -> dict[int, frozenset]:
        return {node: self.max_set(node) for node in self.nodes.tolist()}

    @property
    def community_labels(self) -> np.ndarray:
        """Smallest maximal label of every row."""
        return self.max_matrix.indices[self.max_matrix.indptr[:-1]].astype(np.int64)

    def mean_labels_per_row(self) -> float:
        return self.matrix.nnz / self.n if self.n else 0.0


class CommunityAssignment:
    """Node -> community label, plus the inverse grouping."""

    def __init__(self, membership: Mapping[int, int]):
        self.membership: dict[int, int] = {int(k): int(v) for k, v in sorted(membership.items())}

    @classmethod
    def from_arrays(cls, nodes: Iterable[int], labels: Iterable[int]) -> "CommunityAssignment":
        return cls(dict(zip(np.asarray(nodes).tolist(), np.asarray(labels).tolist())))

    @classmethod
    def from_communities(cls, communities: Mapping[int, Iterable[int]]) -> "CommunityAssignment":
        membership = {}
        for label, members in communities.items():
            for node in members:
                if node in membership:
                    raise DomainError(f"node {node} is in more than one community")
                membership[node] = label
        return cls(membership)

    @cached_property
    def communities(self) -> dict[int, frozenset]:
        groups: dict[int, list[int]] = {}
        for node, label in self.membership.items():
            groups.setdefault(label, []).append(node)
        return {label: frozenset(groups[label]) for label in sorted(groups)}

    @property
    def nodes(self) -> np.ndarray:
        return np.fromiter(self.membership.keys(), dtype=np.int64, count=len(self.membership))

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter(self.membership.values(), dtype=np.int64, count=len(self.membership))

    @property
    def count(self) -> int:
        return len(self.communities)

    def __len__(self) -> int:
        return len(self.membership)

    def __getitem__(self, node: int) -> int:
        return self.membership[node]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CommunityAssignment):
            return NotImplemented
        return self.membership == other.membership

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"CommunityAssignment(nodes={len(self)}, communities={self.count})"

    def to_text(self) -> str:
        """``node community`` lines, communities by label, nodes sorted within."""
        return "".join(
            f"{node} {label}\n"
            for label, members in self.communities.items()
            for node in sorted(members)
        )


@dataclass(frozen=True)
class Params:
    """Algorithm configuration.

    ``inflation`` has no default on purpose; pick it per dataset.
    """

    inflation: float
    q: float = 0.5
    cutoff: float = 0.1
    self_loop: SelfLoopMode = SelfLoopMode.UNIT
    max_iters: int = 50
    stall_iters: int = 5
    expand_active: bool = False

    def __post_init__(self):
        object.__setattr__(self, "self_loop", SelfLoopMode.parse(self.self_loop))
        if not self.inflation >= 1:
            raise ParameterError(f"inflation must be >= 1, got {self.inflation}")
        if not 0 <= self.cutoff < 1:
            raise ParameterError(f"cutoff must be in [0, 1), got {self.cutoff}")
        if not 0 <= self.q <= 1:
            raise ParameterError(f"q must be in [0, 1], got {self.q}")
        if self.max_iters < 1 or self.stall_iters < 1:
            raise ParameterError("max_iters and stall_iters must be positive")


@dataclass
class RunStats:
    iterations: int = 0
    updated_nodes: int = 0
    row_ops: int = 0
    stop_reason: str = "no_active"
    updates_per_iter: list[int] = field(default_factory=list)


@dataclass
class LabelRankResult:
    state: LabelState
    assignment: CommunityAssignment
    stats: RunStats

    @property
    def iterations(self) -> int:
        return self.stats.iterations

    def __iter__(self):
        # allows ``state, assignment, iterations = run_labelrank(...)``
        return iter((self.state, self.assignment, self.stats.iterations))


# -- operators on states -------------------------------------------------------

def _label_space(nodes: np.ndarray) -> int:
    return int(nodes.max()) + 1 if len(nodes) else 0


def init_rows(looped: Snapshot, rows: np.ndarray | None = None, n_labels: int | None = None) -> sp.csr_matrix:
    """Initial rows: each in-neighbour's label with probability w_ij / sum_k w_ik."""
    W = looped.in_matrix
    if rows is not None:
        W = W[rows]
    sums = _row_sums(W)
    if np.any(sums <= 0):
        bad = np.flatnonzero(sums <= 0)[0]
        node = looped.nodes[bad if rows is None else rows[bad]]
        raise DomainError(f"node {node} has no incoming weight; add self-loops first")
    n_labels = _label_space(looped.nodes) if n_labels is None else n_labels
    data = W.data / np.repeat(sums, np.diff(W.indptr))
    return _csr(data, looped.nodes[W.indices], W.indptr.copy(), (W.shape[0], n_labels))


def init_distribution(looped: Snapshot) -> LabelState:
    return LabelState(looped.nodes, init_rows(looped))


def _check_state(snapshot: Snapshot, state: LabelState) -> None:
    if not np.array_equal(snapshot.nodes, state.nodes):
        raise DomainError("label state does not match the snapshot's node set")


def _rows_to_csr(rows: Mapping[int, LabelDistribution], order: Iterable[int], n_labels: int) -> sp.csr_matrix:
    parts = [rows[node] for node in order]
    indptr = np.concatenate([[0], np.cumsum([len(r) for r in parts])])
    labels = np.concatenate([r.labels for r in parts]) if parts else np.zeros(0, np.int64)
    probs = np.concatenate([r.probs for r in parts]) if parts else np.zeros(0)
    width = max(n_labels, int(labels.max()) + 1 if len(labels) else 0)
    return _csr(probs, labels, indptr, (len(parts), width))


def _csr_to_rows(mat: sp.csr_matrix, nodes: Iterable[int]) -> dict[int, LabelDistribution]:
    out = {}
    for k, node in enumerate(nodes):
        lo, hi = mat.indptr[k], mat.indptr[k + 1]
        out[node] = LabelDistribution(mat.indices[lo:hi].astype(np.int64), mat.data[lo:hi].copy(), validate=False)
    return out


def propagate(looped: Snapshot, state: LabelState, active: Iterable[int]) -> dict[int, LabelDistribution]:
    """New row of every active node, all computed from the old state."""
    _check_state(looped, state)
    active = sorted(set(active))
    idx = looped.index_of(active)
    out = propagate_rows(looped.in_matrix[idx], state.matrix)
    return _csr_to_rows(out, active)


def conditional_update(
    state: LabelState,
    candidate_rows: Mapping[int, LabelDistribution],
    looped: Snapshot,
    q: float,
    active: Iterable[int],
) -> tuple[LabelState, int]:
    """Accept candidate rows of active nodes that differ enough from their neighbourhood.

    Node ``i`` accepts iff ``#{j in Nb(i): C_i* subset of C_j*} <= q * k_i``
    where max-sets come from the old state and ``k_i`` counts distinct
    neighbours, self excluded.
    """
    _check_state(looped, state)
    active = sorted(set(active))
    idx = looped.index_of(active)
    counts = subset_counts(state.max_matrix, looped.neighbor_matrix, idx)
    accept = counts <= q * looped.degree[idx]
    accepted = [node for node, ok in zip(active, accept.tolist()) if ok]
    cand = _rows_to_csr(candidate_rows, accepted, state.matrix.shape[1])
    acc_idx = idx[accept]
    P = replace_rows(state.matrix, acc_idx, cand)
    M = replace_rows(state.max_matrix, acc_idx, max_set_rows(cand))
    return LabelState(state.nodes, P, M), int(accept.sum())


def extract_communities(state: LabelState) -> CommunityAssignment:
    """Each node joins the community named by the smallest label of its max-set."""
    return CommunityAssignment.from_arrays(state.nodes, state.community_labels)


# -- the iteration loop --------------------------------------------------------

def iterate(looped: Snapshot, state: LabelState, active_idx: np.ndarray, params: Params) -> tuple[LabelState, RunStats]:
    """Run propagate/inflate/cutoff/conditional-update until the stop rule fires.

    Only rows at positions ``active_idx`` may change; every other row still
    feeds the propagation. Stops when the number of distinct community
    labels among the active nodes has been unchanged for
    ``params.stall_iters`` iterations, when no node accepts an update, or
    after ``params.max_iters`` iterations.
    """
    stats = RunStats()
    active_idx = np.asarray(active_idx, dtype=np.int64)
    if len(active_idx) == 0:
        return state, stats

    W = looped.in_matrix[active_idx]
    w_sums = _row_sums(W)
    limits = params.q * looped.degree[active_idx]
    S = looped.neighbor_matrix
    pairs = neighbor_pairs(S, active_idx)
    P, M = state.matrix, state.max_matrix
    ever = np.zeros(len(active_idx), dtype=bool)
    last_count = len(np.unique(M.indices[M.indptr[active_idx]]))
    stable = 0
    stats.stop_reason = "max_iters"

    for it in range(1, params.max_iters + 1):
        cand = propagate_rows(W, P, w_sums)
        cand = inflate_rows(cand, params.inflation)
        cand = cutoff_rows(cand, params.cutoff)
        accept = subset_counts(M, S, active_idx, pairs) <= limits
        n_acc = int(accept.sum())
        stats.iterations = it
        stats.row_ops += W.nnz
        stats.updates_per_iter.append(n_acc)
        if n_acc == 0:
            stats.stop_reason = "no_updates"
            break
        ever |= accept
        if n_acc < len(accept):
            cand = cand[np.flatnonzero(accept)]
        P = replace_rows(P, active_idx[accept], cand)
        M = replace_rows(M, active_idx[accept], max_set_rows(cand))

        count = len(np.unique(M.indices[M.indptr[active_idx]]))
        stable = stable + 1 if count == last_count else 0
        last_count = count
        if stable >= params.stall_iters:
            stats.stop_reason = "stalled"
            break

    stats.updated_nodes = int(ever.sum())
    return LabelState(state.nodes, P, M), stats


def run_labelrank(snapshot: Snapshot, params: Params) -> LabelRankResult:
    """Static detection on one snapshot (no self-loops in the input)."""
    if snapshot.n == 0:
        raise DomainError("cannot run on an empty snapshot")
    looped = add_self_loops(snapshot, params.self_loop)
    state = init_distribution(looped)
    state, stats = iterate(looped, state, np.arange(looped.n), params)
    return LabelRankResult(state, extract_communities(state), stats)
