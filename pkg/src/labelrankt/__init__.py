"""Incremental label-propagation community detection for evolving networks."""

from .dynamic import StepResult, StreamState, apply_edge_update, initial_state, run_stream, step_snapshot
from .errors import DomainError, LabelRankError, ParameterError, ParseError, SequencingError
from .graph import (
    SelfLoopMode,
    Snapshot,
    SnapshotDelta,
    add_self_loops,
    binarize,
    diff_snapshots,
    load_snapshot,
    read_snapshot,
    read_stream,
    strip_self_loops,
    symmetrize,
    write_snapshot,
    write_stream,
)
from .labelprop import (
    CommunityAssignment,
    LabelDistribution,
    LabelRankResult,
    LabelState,
    Params,
    RunStats,
    conditional_update,
    cutoff,
    extract_communities,
    inflate,
    init_distribution,
    max_label_set,
    propagate,
    run_labelrank,
)
from .metrics import ModularityScore, ModularityVariant, SizeDistribution, modularity, partition_agreement, size_distribution
from .synthgen import (
    EventKind,
    EvolutionEvent,
    PlantedStream,
    apply_events,
    generate_planted,
    planted_stream,
    stream_from_spec,
    write_planted_stream,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
