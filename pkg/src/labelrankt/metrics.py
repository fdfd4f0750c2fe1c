"""Partition quality and structure: modularity, size histograms, Rand index."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .graph import Snapshot
from .labelprop import CommunityAssignment

__all__ = [
    "ModularityVariant",
    "ModularityScore",
    "SizeDistribution",
    "modularity",
    "size_distribution",
    "partition_agreement",
]


class ModularityVariant(enum.Enum):
    UNDIRECTED_WEIGHTED = "undirected"
    DIRECTED_WEIGHTED = "directed"


@dataclass(frozen=True)
class ModularityScore:
    q: float
    variant: ModularityVariant

    def __float__(self) -> float:
        return self.q


@dataclass(frozen=True)
class SizeDistribution:
    histogram: dict[int, int]
    community_count: int

    @property
    def node_count(self) -> int:
        return sum(size * count for size, count in self.histogram.items())


def _community_index(snapshot: Snapshot, assignment: CommunityAssignment) -> np.ndarray:
    try:
        labels = np.array([assignment.membership[node] for node in snapshot.nodes.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise DomainError(f"node {exc.args[0]} is missing from the assignment") from None
    _, comm = np.unique(labels, return_inverse=True)
    return comm


def modularity(
    snapshot: Snapshot,
    assignment: CommunityAssignment,
    variant: ModularityVariant | str = ModularityVariant.DIRECTED_WEIGHTED,
) -> ModularityScore:
    """Newman modularity of ``assignment`` on ``snapshot``.

    Self-loops are ignored. For the undirected variant every arc ``u -> v``
    of weight ``w`` contributes ``w`` to both ``A[u, v]`` and ``A[v, u]``, so
    a symmetric snapshot scores the same under both variants.
    """
    variant = ModularityVariant(variant) if isinstance(variant, str) else variant
    comm = _community_index(snapshot, assignment)
    keep = snapshot.src != snapshot.dst
    s = np.searchsorted(snapshot.nodes, snapshot.src[keep])
    d = np.searchsorted(snapshot.nodes, snapshot.dst[keep])
    w = snapshot.weight[keep]
    m = w.sum()
    if m <= 0:
        raise DomainError("modularity is undefined on a graph without edges")
    k = comm.max() + 1
    cs, cd = comm[s], comm[d]
    inside = np.bincount(cs[cs == cd], weights=w[cs == cd], minlength=k)
    out_w = np.bincount(cs, weights=w, minlength=k)
    in_w = np.bincount(cd, weights=w, minlength=k)

    if variant is ModularityVariant.DIRECTED_WEIGHTED:
        q = inside.sum() / m - np.dot(out_w, in_w) / m**2
    else:
        two_m = 2 * m
        tot = out_w + in_w
        q = 2 * inside.sum() / two_m - np.dot(tot, tot) / two_m**2
    return ModularityScore(float(q), variant)


def size_distribution(assignment: CommunityAssignment) -> SizeDistribution:
    sizes = Counter(len(members) for members in assignment.communities.values())
    return SizeDistribution(dict(sorted(sizes.items())), assignment.count)


def _pairs(x: np.ndarray) -> float:
    return float(np.sum(x * (x - 1) / 2))


def partition_agreement(a: CommunityAssignment, b: CommunityAssignment) -> float:
    """Rand index: fraction of node pairs both partitions treat alike."""
    if a.membership.keys() != b.membership.keys():
        raise DomainError("partitions cover different node sets")
    n = len(a)
    if n < 2:
        return 1.0
    _, la = np.unique(a.labels, return_inverse=True)
    _, lb = np.unique(b.labels, return_inverse=True)
    joint = np.unique(la * (lb.max() + 1) + lb, return_counts=True)[1]
    same_both = _pairs(joint)
    same_a = _pairs(np.bincount(la))
    same_b = _pairs(np.bincount(lb))
    total = n * (n - 1) / 2
    return (total + 2 * same_both - same_a - same_b) / total
