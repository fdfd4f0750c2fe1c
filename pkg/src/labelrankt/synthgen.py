"""Seeded planted-partition snapshots and scripted evolution events.

All randomness goes through :func:`numpy.random.default_rng` (PCG64), so a
``(spec, seed)`` pair always regenerates the same stream.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParameterError, ParseError
from .graph import Snapshot, write_stream
from .labelprop import CommunityAssignment

__all__ = [
    "RNG_ALGORITHM",
    "EventKind",
    "EvolutionEvent",
    "PlantedStream",
    "generate_planted",
    "apply_events",
    "churn_events",
    "planted_stream",
    "stream_from_spec",
    "write_planted_stream",
    "read_truth",
    "write_truth",
]

RNG_ALGORITHM = "numpy.random.PCG64"


class EventKind(enum.Enum):
    MIGRATE_NODE = "migrate_node"
    ADD_EDGES = "add_edges"
    DELETE_EDGES = "delete_edges"
    BIRTH_NODE = "birth_node"
    DEATH_NODE = "death_node"
    SPLIT_COMMUNITY = "split_community"
    MERGE_COMMUNITIES = "merge_communities"
    DISSOLVE_COMMUNITY = "dissolve_community"


@dataclass(frozen=True)
class EvolutionEvent:
    """One structural change.

    Parameters by kind (all optional ones shown with defaults):

    * ``MIGRATE_NODE``: ``node``, ``target`` (community), ``degree=None``
      (defaults to the number of intra edges the node loses)
    * ``ADD_EDGES``: ``edges=[(u, v), ...]`` or ``count`` with optional
      ``community`` to draw them inside
    * ``DELETE_EDGES``: ``edges`` or ``count`` with optional ``community``
    * ``BIRTH_NODE``: ``node``, ``community``, ``degree=3``
    * ``DEATH_NODE``: ``node``
    * ``SPLIT_COMMUNITY``: ``community``, ``new_community``
    * ``MERGE_COMMUNITIES``: ``community``, ``into``, ``p=0.5``
    * ``DISSOLVE_COMMUNITY``: ``community``

    Every kind accepts ``weight_range=(lo, hi)`` for the edges it creates.
    """

    kind: EventKind
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def make(cls, kind: EventKind | str, **params) -> "EvolutionEvent":
        return cls(EventKind(kind) if isinstance(kind, str) else kind, params)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "EvolutionEvent":
        raw = dict(raw)
        try:
            kind = EventKind(str(raw.pop("kind")).lower())
        except KeyError:
            raise ParameterError("event is missing field 'kind'") from None
        except ValueError:
            raise ParameterError(f"unknown event kind in {raw!r}") from None
        return cls(kind, raw)


@dataclass
class PlantedStream:
    snapshots: list[Snapshot]
    truths: list[CommunityAssignment]
    seed: int
    rng_algorithm: str = RNG_ALGORITHM

    def __len__(self) -> int:
        return len(self.snapshots)


# -- static generator ----------------------------------------------------------

def _sample_pairs(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    if total == 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    k = rng.binomial(total, p)
    return np.sort(rng.choice(total, size=k, replace=False))


def generate_planted(
    num_communities: int | None,
    sizes: int | Sequence[int],
    p_in: float,
    p_out: float,
    weight_range: tuple[float, float] = (1.0, 1.0),
    directed: bool = False,
    seed: int = 0,
    *,
    out_weight_range: tuple[float, float] | None = None,
    first_id: int = 0,
) -> tuple[Snapshot, CommunityAssignment]:
    """Planted-partition graph with ground truth.

    Pairs inside a community are linked with probability ``p_in``, other
    pairs with ``p_out``. Undirected graphs store each edge as two arcs of
    equal weight. Weights are uniform in ``weight_range``; inter-community
    edges use ``out_weight_range`` when given. Communities are labelled
    ``0..k-1`` and node ids are consecutive from ``first_id``.
    """
    if isinstance(sizes, (int, np.integer)):
        if num_communities is None:
            raise ParameterError("num_communities is required when sizes is an int")
        sizes = [int(sizes)] * num_communities
    sizes = [int(s) for s in sizes]
    if num_communities is not None and num_communities != len(sizes):
        raise ParameterError(f"num_communities={num_communities} but {len(sizes)} sizes given")
    if not sizes or min(sizes) <= 0:
        raise ParameterError("community sizes must be positive")
    if not (0 <= p_out < p_in <= 1):
        raise ParameterError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    out_weight_range = weight_range if out_weight_range is None else out_weight_range
    for lo, hi in (weight_range, out_weight_range):
        if not (0 < lo <= hi):
            raise ParameterError(f"weight range must satisfy 0 < lo <= hi, got {(lo, hi)}")

    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)]) + first_id
    srcs, dsts, ws = [], [], []

    def emit(u, v, wr):
        w = rng.uniform(wr[0], wr[1], size=len(u)) if wr[0] < wr[1] else np.full(len(u), float(wr[0]))
        srcs.append(u)
        dsts.append(v)
        ws.append(w)
        if not directed:
            srcs.append(v)
            dsts.append(u)
            ws.append(w)

    k = len(sizes)
    for a in range(k):
        s, base = sizes[a], offsets[a]
        if directed:
            idx = _sample_pairs(rng, s * (s - 1), p_in)
            u = idx // (s - 1) if s > 1 else idx
            v = idx % (s - 1) if s > 1 else idx
            v = v + (v >= u)
        else:
            iu, iv = np.triu_indices(s, 1)
            idx = _sample_pairs(rng, len(iu), p_in)
            u, v = iu[idx], iv[idx]
        emit(u + base, v + base, weight_range)
        for b in range(k):
            if b == a or (not directed and b < a):
                continue
            idx = _sample_pairs(rng, s * sizes[b], p_out)
            emit(idx // sizes[b] + base, idx % sizes[b] + offsets[b], out_weight_range)

    nodes = np.arange(offsets[0], offsets[-1])
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)  # noqa: E731
    snap = Snapshot(nodes, cat(srcs, np.int64), cat(dsts, np.int64), cat(ws, np.float64), 0)
    truth = CommunityAssignment.from_arrays(nodes, np.repeat(np.arange(k), sizes))
    return snap, truth


# -- events --------------------------------------------------------------------

class _Editable:
    """Mutable edge dictionary used while applying one batch of events."""

    def __init__(self, snapshot: Snapshot, truth: CommunityAssignment, directed: bool, rng, weight_range=(1.0, 1.0)):
        self.weight_range = tuple(weight_range)
        self.edges: dict[tuple[int, int], float] = snapshot.edge_dict()
        self.nodes: set[int] = set(snapshot.node_set)
        self.membership: dict[int, int] = dict(truth.membership)
        self.directed = directed
        self.rng = rng
        self.time_index = snapshot.time_index
        if set(self.membership) != self.nodes:
            raise DomainError("ground truth does not cover the snapshot's nodes")

    def members(self, community) -> list[int]:
        out = sorted(n for n, c in self.membership.items() if c == community)
        if not out:
            raise DomainError(f"community {community} does not exist")
        return out

    def require(self, node) -> int:
        if node not in self.nodes:
            raise DomainError(f"node {node} does not exist")
        return node

    def weight(self, params) -> float:
        lo, hi = params.get("weight_range", self.weight_range)
        return float(self.rng.uniform(lo, hi)) if lo < hi else float(lo)

    def link(self, u, v, w):
        if u == v:
            return
        self.edges[(u, v)] = w
        if not self.directed:
            self.edges[(v, u)] = w

    def unlink(self, u, v):
        self.edges.pop((u, v), None)
        if not self.directed:
            self.edges.pop((v, u), None)

    def neighbors(self, node) -> set[int]:
        return {v for (u, v) in self.edges if u == node} | {u for (u, v) in self.edges if v == node}

    def mates(self, node) -> list[int]:
        old = self.membership[node]
        return [v for v in self.neighbors(node) if self.membership.get(v) == old]

    def detach(self, node) -> None:
        """Drop ``node``'s edges inside its community."""
        for v in self.mates(node):
            self.unlink(node, v)
            self.unlink(v, node)

    def attach(self, node, target, degree, params):
        """Move ``node`` into ``target`` with ``degree`` fresh intra edges."""
        self.membership[node] = target
        pool = [v for v in self.members(target) if v != node]
        degree = min(max(degree, 1), len(pool))
        for v in self.rng.choice(pool, size=degree, replace=False).tolist():
            self.link(node, v, self.weight(params))
            if self.directed:
                self.link(v, node, self.weight(params))

    def random_edges(self, count, community, present: bool) -> list[tuple[int, int]]:
        if present:
            pool = sorted(
                (u, v) for (u, v) in self.edges
                if (self.directed or u < v)
                and (community is None or self.membership[u] == self.membership[v] == community)
            )
        else:
            cands = self.members(community) if community is not None else sorted(self.nodes)
            pool = [
                (u, v) for u in cands for v in cands
                if u != v and (self.directed or u < v) and (u, v) not in self.edges
            ]
        if count > len(pool):
            raise DomainError(f"cannot pick {count} edges from {len(pool)} candidates")
        picks = self.rng.choice(len(pool), size=count, replace=False)
        return [pool[i] for i in sorted(picks.tolist())]

    def apply(self, event: EvolutionEvent):
        p, kind = dict(event.params), event.kind
        try:
            if kind is EventKind.MIGRATE_NODE:
                node = self.require(p["node"])
                self.members(p["target"])
                lost = len(self.mates(node))
                self.detach(node)
                self.attach(node, p["target"], p.get("degree", lost), p)
            elif kind is EventKind.ADD_EDGES:
                edges = p["edges"] if "edges" in p else self.random_edges(p["count"], p.get("community"), present=False)
                for u, v in edges:
                    self.require(u), self.require(v)
                    self.link(u, v, self.weight(p))
            elif kind is EventKind.DELETE_EDGES:
                edges = p["edges"] if "edges" in p else self.random_edges(p["count"], p.get("community"), present=True)
                for u, v in edges:
                    if (u, v) not in self.edges:
                        raise DomainError(f"edge {u} -> {v} does not exist")
                    self.unlink(u, v)
            elif kind is EventKind.BIRTH_NODE:
                node = int(p["node"])
                if node in self.nodes:
                    raise DomainError(f"node {node} already exists")
                pool = self.members(p["community"])
                self.nodes.add(node)
                self.membership[node] = p["community"]
                degree = min(int(p.get("degree", 3)), len(pool))
                for v in self.rng.choice(pool, size=degree, replace=False).tolist():
                    self.link(node, v, self.weight(p))
                    if self.directed:
                        self.link(v, node, self.weight(p))
            elif kind is EventKind.DEATH_NODE:
                node = self.require(p["node"])
                self.edges = {e: w for e, w in self.edges.items() if node not in e}
                self.nodes.discard(node)
                del self.membership[node]
            elif kind is EventKind.SPLIT_COMMUNITY:
                members = self.members(p["community"])
                new = p["new_community"]
                if new in set(self.membership.values()):
                    raise DomainError(f"community {new} already exists")
                half = set(members[len(members) // 2:])
                for u in members:
                    for v in members:
                        if (u in half) != (v in half):
                            self.edges.pop((u, v), None)
                for v in half:
                    self.membership[v] = new
            elif kind is EventKind.MERGE_COMMUNITIES:
                a, b = self.members(p["community"]), self.members(p["into"])
                prob = float(p.get("p", 0.5))
                for u in a:
                    for v in b:
                        if self.rng.random() < prob:
                            self.link(u, v, self.weight(p))
                            if self.directed:
                                self.link(v, u, self.weight(p))
                for u in a:
                    self.membership[u] = p["into"]
            elif kind is EventKind.DISSOLVE_COMMUNITY:
                members = self.members(p["community"])
                others = sorted(set(self.membership.values()) - {p["community"]})
                if not others:
                    raise DomainError("cannot dissolve the only community")
                lost = [len(self.mates(node)) for node in members]
                for node in members:
                    self.detach(node)
                for k, node in enumerate(members):
                    self.attach(node, others[k % len(others)], p.get("degree", lost[k]), p)
        except KeyError as exc:
            raise DomainError(f"{kind.value} event is missing parameter {exc.args[0]!r}") from None

    def result(self) -> tuple[Snapshot, CommunityAssignment]:
        items = sorted(self.edges.items())
        snap = Snapshot(
            sorted(self.nodes),
            [u for (u, _), _ in items],
            [v for (_, v), _ in items],
            [w for _, w in items],
            self.time_index,
        )
        return snap, CommunityAssignment(self.membership)


def apply_events(
    snapshot: Snapshot,
    truth: CommunityAssignment,
    events: Sequence[EvolutionEvent],
    seed: int = 0,
    *,
    directed: bool = False,
    weight_range: tuple[float, float] = (1.0, 1.0),
) -> tuple[Snapshot, CommunityAssignment]:
    """Apply ``events`` in order; returns the next snapshot and truth.

    The time index is advanced by one unless ``events`` is empty. With
    ``directed=False`` edges are created and removed in both directions.
    New edges draw weights from ``weight_range`` unless the event carries
    its own.
    """
    if not events:
        return snapshot, truth
    ed = _Editable(snapshot, truth, directed, np.random.default_rng(seed), weight_range)
    for event in events:
        ed.apply(event)
    ed.time_index = snapshot.time_index + 1
    return ed.result()


def churn_events(
    snapshot: Snapshot,
    truth: CommunityAssignment,
    fraction: float,
    seed: int = 0,
    *,
    directed: bool = False,
    weight_range: tuple[float, float] = (1.0, 1.0),
) -> list[EvolutionEvent]:
    """Edge churn touching about ``fraction`` of the nodes.

    ``round(fraction * n)`` nodes are drawn; each loses one random edge to
    a neighbour in its community and gains one to a non-neighbour in it.
    """
    rng = np.random.default_rng(seed)
    nodes = snapshot.nodes
    picks = np.sort(rng.choice(nodes, size=int(round(fraction * len(nodes))), replace=False))
    edges = snapshot.edge_dict()
    members: dict[int, list[int]] = {}
    for node, c in truth.membership.items():
        members.setdefault(c, []).append(node)
    dels, adds = [], []
    taken: set[tuple[int, int]] = set()
    for u in picks.tolist():
        c = truth[u]
        mates = [v for v in members[c] if v != u and (u, v) in edges and (u, v) not in taken]
        fresh = [v for v in members[c] if v != u and (u, v) not in edges and (u, v) not in taken]
        if mates:
            v = mates[int(rng.integers(len(mates)))]
            dels.append((u, v))
            taken.update({(u, v), (v, u)})
        if fresh:
            v = fresh[int(rng.integers(len(fresh)))]
            adds.append((u, v))
            taken.update({(u, v), (v, u)})
    return [
        EvolutionEvent.make(EventKind.DELETE_EDGES, edges=dels),
        EvolutionEvent.make(EventKind.ADD_EDGES, edges=adds, weight_range=weight_range),
    ]


def planted_stream(
    sizes: Sequence[int],
    p_in: float,
    p_out: float,
    steps: int,
    churn: float = 0.0,
    weight_range: tuple[float, float] = (1.0, 1.0),
    directed: bool = False,
    seed: int = 0,
    **planted_kwargs,
) -> PlantedStream:
    """A planted graph followed by ``steps - 1`` snapshots of random edge churn."""
    snap, truth = generate_planted(len(sizes), sizes, p_in, p_out, weight_range, directed, seed, **planted_kwargs)
    seeds = np.random.SeedSequence(seed).spawn(steps)
    snaps, truths = [snap], [truth]
    for t in range(1, steps):
        ev_seed = int(seeds[t].generate_state(1)[0])
        events = churn_events(snap, truth, churn, ev_seed, directed=directed, weight_range=weight_range)
        snap, truth = apply_events(snap, truth, events, ev_seed, directed=directed, weight_range=weight_range)
        if snap.time_index != t:
            snap = snap.with_time(t)
        snaps.append(snap)
        truths.append(truth)
    return PlantedStream(snaps, truths, seed)


# -- spec files ----------------------------------------------------------------

def _field(spec: Mapping[str, Any], name: str, kind=None):
    if name not in spec:
        raise ParameterError(f"spec is missing field {name!r}")
    value = spec[name]
    if kind is not None and not isinstance(value, kind):
        raise ParameterError(f"spec field {name!r} has the wrong type")
    return value


def stream_from_spec(spec: Mapping[str, Any], seed: int) -> PlantedStream:
    """Build a stream from a JSON-style spec.

    Fields: ``sizes`` (list of int), ``p_in``, ``p_out``, optional
    ``weight_range``, ``out_weight_range``, ``directed``, ``churn`` and
    ``steps``. ``steps`` is a list with one entry per output snapshot
    (default: a single snapshot with no events); entry ``t`` is the list of events turning snapshot ``t-1`` into ``t`` (entry 0
    applies to the freshly generated graph). A non-zero ``churn`` adds
    random edge churn to every step after the first.
    """
    sizes = _field(spec, "sizes", list)
    try:
        p_in, p_out = float(_field(spec, "p_in")), float(_field(spec, "p_out"))
    except (TypeError, ValueError):
        raise ParameterError("spec fields 'p_in' and 'p_out' must be numbers") from None
    if not 0 <= p_out < p_in <= 1:
        raise ParameterError(f"spec field 'p_out' must satisfy 0 <= p_out < p_in <= 1 (p_in={p_in}, p_out={p_out})")
    weight_range = tuple(spec.get("weight_range", (1.0, 1.0)))
    directed = bool(spec.get("directed", False))
    churn = float(spec.get("churn", 0.0))
    steps = spec.get("steps", [[]])
    if not isinstance(steps, list) or not steps:
        raise ParameterError("spec field 'steps' must be a non-empty list")
    out_range = spec.get("out_weight_range")
    snap, truth = generate_planted(
        len(sizes), sizes, p_in, p_out, weight_range, directed, seed,
        out_weight_range=tuple(out_range) if out_range else None,
    )
    seeds = np.random.SeedSequence(seed).spawn(len(steps))
    snaps, truths = [], []
    for t, raw_events in enumerate(steps):
        if not isinstance(raw_events, list):
            raise ParameterError(f"spec field 'steps[{t}]' must be a list of events")
        events = [EvolutionEvent.from_dict(e) for e in raw_events]
        ev_seed = int(seeds[t].generate_state(1)[0])
        if churn and t > 0:
            events = churn_events(snap, truth, churn, ev_seed, directed=directed, weight_range=weight_range) + events
        snap, truth = apply_events(snap, truth, events, ev_seed, directed=directed, weight_range=weight_range)
        snap = snap.with_time(t)
        snaps.append(snap)
        truths.append(truth)
    return PlantedStream(snaps, truths, seed)


def write_truth(truth: CommunityAssignment, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(truth.to_text())


def read_truth(path: str | os.PathLike) -> CommunityAssignment:
    membership = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                node, label = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise ParseError(f"expected 'node community', got {line!r}", lineno) from None
            membership[node] = label
    return CommunityAssignment(membership)


def write_planted_stream(stream: PlantedStream, directory: str | os.PathLike) -> None:
    """Snapshots as ``NNNN.edges``, truths as ``truth.NNNN.txt``, plus ``meta.json``."""
    directory = Path(directory)
    write_stream(stream.snapshots, directory)
    for snap, truth in zip(stream.snapshots, stream.truths):
        write_truth(truth, directory / f"truth.{snap.time_index:04d}.txt")
    meta = {"seed": stream.seed, "rng_algorithm": stream.rng_algorithm, "snapshots": len(stream)}
    with open(directory / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
