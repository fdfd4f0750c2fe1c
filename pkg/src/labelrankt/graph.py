"""Weighted directed graph snapshots, edge-list I/O, self-loops and deltas.

A :class:`Snapshot` is immutable. Edges are stored as three parallel arrays
sorted by ``(src, dst)``; node-indexed sparse matrices are derived lazily
and cached.
"""

from __future__ import annotations

import enum
import io
import os
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParameterError, ParseError, SequencingError

__all__ = [
    "SelfLoopMode",
    "Snapshot",
    "SnapshotDelta",
    "load_snapshot",
    "read_snapshot",
    "read_stream",
    "write_snapshot",
    "write_stream",
    "format_snapshot",
    "symmetrize",
    "binarize",
    "add_self_loops",
    "strip_self_loops",
    "diff_snapshots",
]


class SelfLoopMode(enum.Enum):
    UNIT = "unit"
    MAX_INCIDENT = "max"
    SUM_INCIDENT = "sum"

    @classmethod
    def parse(cls, value: "SelfLoopMode | str") -> "SelfLoopMode":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        for mode in cls:
            if key in (mode.value, mode.name.lower()):
                return mode
        raise ParameterError(f"unknown self-loop mode {value!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Snapshot:
    """One timestamped weighted directed graph.

    Parameters
    ----------
    nodes : array-like of int
        Node ids. Endpoints of the edges are added automatically.
    src, dst : array-like of int
        Edge endpoints; edge ``k`` goes from ``src[k]`` to ``dst[k]``.
    weight : array-like of float
        Strictly positive edge weights.
    time_index : int
        Position of the snapshot in its stream.
    """

    def __init__(self, nodes, src, dst, weight, time_index: int = 0):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        weight = np.asarray(weight, dtype=np.float64).ravel()
        if not (len(src) == len(dst) == len(weight)):
            raise DomainError("src, dst and weight must have equal length")
        if time_index < 0:
            raise DomainError(f"time_index must be non-negative, got {time_index}")
        if len(weight) and not np.all(np.isfinite(weight) & (weight > 0)):
            bad = weight[~(np.isfinite(weight) & (weight > 0))][0]
            raise DomainError(f"edge weights must be finite and positive, got {bad}")
        nodes = np.asarray(nodes, dtype=np.int64).ravel()
        all_nodes = np.unique(np.concatenate([nodes, src, dst]))
        if len(all_nodes) and all_nodes[0] < 0:
            raise DomainError("node ids must be non-negative")

        order = np.lexsort((dst, src))
        src, dst, weight = src[order], dst[order], weight[order]
        if len(src) > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DomainError(f"duplicate edge {src[k]} -> {dst[k]}")

        self.time_index = int(time_index)
        self.nodes = _readonly(all_nodes)
        self.src = _readonly(src)
        self.dst = _readonly(dst)
        self.weight = _readonly(weight)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Sequence],
        nodes: Iterable[int] = (),
        time_index: int = 0,
    ) -> "Snapshot":
        """Build from ``(src, dst)`` or ``(src, dst, weight)`` tuples."""
        src, dst, w = [], [], []
        for e in edges:
            src.append(e[0])
            dst.append(e[1])
            w.append(e[2] if len(e) > 2 else 1.0)
        return cls(list(nodes), src, dst, w, time_index)

    @classmethod
    def empty(cls, time_index: int = 0) -> "Snapshot":
        return cls([], [], [], [], time_index)

    # -- basic views -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        """Number of directed edges (arcs)."""
        return len(self.src)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Snapshot(t={self.time_index}, n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (
            self.time_index == other.time_index
            and np.array_equal(self.nodes, other.nodes)
            and self.same_edges(other)
        )

    __hash__ = None  # type: ignore[assignment]

    def same_edges(self, other: "Snapshot") -> bool:
        return (
            np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    @cached_property
    def node_set(self) -> frozenset:
        return frozenset(self.nodes.tolist())

    def __contains__(self, node) -> bool:
        return node in self.node_set

    def edges(self) -> Iterator[tuple[int, int, float]]:
        yield from zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())

    def edge_dict(self) -> dict[tuple[int, int], float]:
        return {(s, d): w for s, d, w in self.edges()}

    def weight_of(self, src: int, dst: int) -> float:
        """Weight of ``src -> dst`` or 0.0 when the edge is absent."""
        lo = np.searchsorted(self.src, src, side="left")
        hi = np.searchsorted(self.src, src, side="right")
        k = lo + np.searchsorted(self.dst[lo:hi], dst)
        if k < hi and self.dst[k] == dst:
            return float(self.weight[k])
        return 0.0

    def in_edges(self, node: int) -> list[tuple[int, float]]:
        """``(source, weight)`` pairs of edges entering ``node``."""
        mask = self.dst == node
        return list(zip(self.src[mask].tolist(), self.weight[mask].tolist()))

    def out_edges(self, node: int) -> list[tuple[int, float]]:
        """``(target, weight)`` pairs of edges leaving ``node``."""
        lo = np.searchsorted(self.src, node, side="left")
        hi = np.searchsorted(self.src, node, side="right")
        return list(zip(self.dst[lo:hi].tolist(), self.weight[lo:hi].tolist()))

    @property
    def has_self_loops(self) -> bool:
        return bool(np.any(self.src == self.dst))

    @property
    def is_symmetric(self) -> bool:
        rev = Snapshot(self.nodes, self.dst, self.src, self.weight, self.time_index)
        return self.same_edges(rev)

    def with_time(self, time_index: int) -> "Snapshot":
        return Snapshot(self.nodes, self.src, self.dst, self.weight, time_index)

    def index_of(self, ids) -> np.ndarray:
        """Positions of node ids in :attr:`nodes`; raises on unknown ids."""
        ids = np.asarray(ids, dtype=np.int64)
        pos = np.searchsorted(self.nodes, ids)
        ok = (pos < self.n) & (self.nodes[np.minimum(pos, self.n - 1)] == ids) if self.n else np.zeros(ids.shape, bool)
        if not np.all(ok):
            missing = ids[~ok].ravel()[0]
            raise DomainError(f"node {missing} is not in snapshot t={self.time_index}")
        return pos

    # -- derived matrices ---------------------------------------------------

    @cached_property
    def in_matrix(self) -> sp.csr_matrix:
        """``n x n`` CSR matrix with entry ``[i, j] = w`` for edge ``j -> i``."""
        rows = np.searchsorted(self.nodes, self.dst)
        cols = np.searchsorted(self.nodes, self.src)
        mat = sp.csr_matrix((self.weight, (rows, cols)), shape=(self.n, self.n))
        mat.sort_indices()
        return mat

    @cached_property
    def neighbor_matrix(self) -> sp.csr_matrix:
        """Binary symmetric ``n x n`` CSR of in- or out-neighbours, no diagonal."""
        rows = np.searchsorted(self.nodes, self.dst)
        cols = np.searchsorted(self.nodes, self.src)
        keep = rows != cols
        r = np.concatenate([rows[keep], cols[keep]])
        c = np.concatenate([cols[keep], rows[keep]])
        mat = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.n, self.n))
        mat.sum_duplicates()
        mat.data[:] = 1.0
        mat.sort_indices()
        return mat

    @cached_property
    def degree(self) -> np.ndarray:
        """Number of distinct neighbours of each node, self excluded."""
        return _readonly(np.diff(self.neighbor_matrix.indptr).astype(np.int64))

    def neighbors(self, node: int) -> set[int]:
        i = int(self.index_of([node])[0])
        nm = self.neighbor_matrix
        return set(self.nodes[nm.indices[nm.indptr[i]:nm.indptr[i + 1]]].tolist())


@dataclass(frozen=True)
class SnapshotDelta:
    changed: frozenset
    born: frozenset
    dead: frozenset

    @property
    def active(self) -> frozenset:
        return self.changed | self.born

    def is_empty(self) -> bool:
        return not (self.changed or self.born or self.dead)


# -- edge-list I/O -------------------------------------------------------------

def _parse_lines(lines: Iterable[str], time_index: int, first_line: int = 1) -> Snapshot:
    src, dst, w = [], [], []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(lines, start=first_line):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {line!r}", lineno)
        try:
            s, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"node ids must be integers: {line!r}", lineno) from None
        if s < 0 or d < 0:
            raise ParseError(f"node ids must be non-negative: {line!r}", lineno)
        weight = 1.0
        if len(parts) == 3:
            try:
                weight = float(parts[2])
            except ValueError:
                raise ParseError(f"bad weight {parts[2]!r}", lineno) from None
            if not (np.isfinite(weight) and weight > 0):
                raise DomainError(f"line {lineno}: weight must be positive, got {parts[2]}")
        if (s, d) in seen:
            raise DomainError(
                f"line {lineno}: duplicate edge {s} -> {d} (first seen on line {seen[(s, d)]})"
            )
        seen[(s, d)] = lineno
        src.append(s)
        dst.append(d)
        w.append(weight)
    return Snapshot([], src, dst, w, time_index)


def load_snapshot(source: str, time_index: int = 0) -> Snapshot:
    """Parse edge-list text: one ``src dst [weight]`` per line, ``#`` comments."""
    return _parse_lines(io.StringIO(source), time_index)


def read_snapshot(path: str | os.PathLike, time_index: int = 0) -> Snapshot:
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh, time_index)


_SEPARATOR = re.compile(r"^T\s+(\d+)\s*$")


def read_stream(path: str | os.PathLike) -> list[Snapshot]:
    """Read a snapshot stream.

    ``path`` is either a directory of ``*.edges`` files (sorted
    lexicographically; the i-th file becomes time index i) or one file in
    which ``T <index>`` lines separate consecutive snapshots.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".edges")
        if not files:
            raise DomainError(f"no .edges files in {path}")
        return [read_snapshot(f, t) for t, f in enumerate(files)]

    snapshots: list[Snapshot] = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    block: list[str] = []
    block_start = 1
    current: int | None = None
    for lineno, line in enumerate(lines, start=1):
        match = _SEPARATOR.match(line.strip())
        if match:
            if current is not None:
                snapshots.append(_parse_lines(block, current, block_start))
            current = int(match.group(1))
            expected = len(snapshots)
            if current != expected:
                raise SequencingError(
                    f"{path}:{lineno}: expected 'T {expected}', got 'T {current}'"
                )
            block, block_start = [], lineno + 1
        else:
            if current is None and line.strip() and not line.strip().startswith("#"):
                # a file without separators is a single snapshot
                return [_parse_lines(lines, 0)]
            block.append(line)
    if current is None:
        return [_parse_lines(lines, 0)]
    snapshots.append(_parse_lines(block, current, block_start))
    return snapshots


def _format_weight(w: float) -> str:
    return repr(float(w))


def format_snapshot(snapshot: Snapshot) -> str:
    """Edge-list text for ``snapshot``; isolated nodes are not representable."""
    return "".join(f"{s} {d} {_format_weight(w)}\n" for s, d, w in snapshot.edges())


def write_snapshot(snapshot: Snapshot, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_snapshot(snapshot))


def write_stream(snapshots: Sequence[Snapshot], directory: str | os.PathLike) -> list[Path]:
    """Write ``NNNN.edges`` files into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in snapshots:
        p = directory / f"{snap.time_index:04d}.edges"
        write_snapshot(snap, p)
        paths.append(p)
    return paths


# -- transformations -----------------------------------------------------------

def symmetrize(snapshot: Snapshot, binarize: bool = False) -> Snapshot:
    """Make every edge bidirectional.

    Without ``binarize`` the two directions of a pair get the sum of the
    weights present; with it every weight becomes 1.0.
    """
    s = np.concatenate([snapshot.src, snapshot.dst])
    d = np.concatenate([snapshot.dst, snapshot.src])
    w = np.concatenate([snapshot.weight, snapshot.weight])
    loops = snapshot.src == snapshot.dst
    if loops.any():
        # a self-loop would otherwise be counted twice
        keep = np.concatenate([np.ones(snapshot.m, bool), ~loops])
        s, d, w = s[keep], d[keep], w[keep]
    if len(s) == 0:
        return Snapshot(snapshot.nodes, [], [], [], snapshot.time_index)
    mat = sp.coo_matrix((w, (s, d)), shape=(int(s.max()) + 1, int(d.max()) + 1)).tocsr()
    mat.sum_duplicates()
    coo = mat.tocoo()
    weights = np.ones(coo.nnz) if binarize else coo.data
    return Snapshot(snapshot.nodes, coo.row, coo.col, weights, snapshot.time_index)


def binarize(snapshot: Snapshot) -> Snapshot:
    """Same topology and direction, all weights 1.0."""
    return Snapshot(snapshot.nodes, snapshot.src, snapshot.dst, np.ones(snapshot.m), snapshot.time_index)


def add_self_loops(snapshot: Snapshot, mode: SelfLoopMode | str = SelfLoopMode.UNIT) -> Snapshot:
    """Give every node an edge to itself.

    Nodes without incoming edges get weight 1 whatever the mode.
    """
    mode = SelfLoopMode.parse(mode)
    if snapshot.has_self_loops:
        k = int(np.flatnonzero(snapshot.src == snapshot.dst)[0])
        raise DomainError(f"snapshot already has a self-loop at node {snapshot.src[k]}")
    loop_w = np.ones(snapshot.n)
    if mode is not SelfLoopMode.UNIT and snapshot.m:
        target = np.searchsorted(snapshot.nodes, snapshot.dst)
        if mode is SelfLoopMode.MAX_INCIDENT:
            acc = np.zeros(snapshot.n)
            np.maximum.at(acc, target, snapshot.weight)
        else:
            acc = np.bincount(target, weights=snapshot.weight, minlength=snapshot.n)
        has_in = np.bincount(target, minlength=snapshot.n) > 0
        loop_w[has_in] = acc[has_in]
    return Snapshot(
        snapshot.nodes,
        np.concatenate([snapshot.src, snapshot.nodes]),
        np.concatenate([snapshot.dst, snapshot.nodes]),
        np.concatenate([snapshot.weight, loop_w]),
        snapshot.time_index,
    )


def strip_self_loops(snapshot: Snapshot) -> Snapshot:
    keep = snapshot.src != snapshot.dst
    return Snapshot(snapshot.nodes, snapshot.src[keep], snapshot.dst[keep], snapshot.weight[keep], snapshot.time_index)


def _edge_records(snapshot: Snapshot) -> np.ndarray:
    rec = np.empty(snapshot.m, dtype=[("s", np.int64), ("d", np.int64), ("w", np.float64)])
    rec["s"], rec["d"], rec["w"] = snapshot.src, snapshot.dst, snapshot.weight
    return rec


def diff_snapshots(prev: Snapshot, cur: Snapshot, *, check_sequence: bool = True) -> SnapshotDelta:
    """Changed, born and dead nodes between two consecutive snapshots.

    A surviving node is changed when any edge touching it was added,
    removed, or re-weighted.
    """
    if check_sequence and cur.time_index != prev.time_index + 1:
        raise SequencingError(
            f"snapshots are not consecutive: t={prev.time_index} then t={cur.time_index}"
        )
    a, b = _edge_records(prev), _edge_records(cur)
    sym = np.concatenate([np.setdiff1d(a, b), np.setdiff1d(b, a)])
    touched = np.unique(np.concatenate([sym["s"], sym["d"]]))
    survivors = np.intersect1d(prev.nodes, cur.nodes)
    changed = np.intersect1d(touched, survivors)
    born = np.setdiff1d(cur.nodes, prev.nodes)
    dead = np.setdiff1d(prev.nodes, cur.nodes)
    return SnapshotDelta(
        frozenset(changed.tolist()), frozenset(born.tolist()), frozenset(dead.tolist())
    )
