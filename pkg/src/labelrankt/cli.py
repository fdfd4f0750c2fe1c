"""Command-line front end.

::

    labelrankt run INPUT --inflation 4 [--mode incremental] [--out DIR]
    labelrankt sweep INPUT --inflation 4 [--q-values 0.05,0.1,...]
    labelrankt bench INPUT --inflation 4
    labelrankt generate SPEC.json --seed 7 --out DIR

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamic import run_stream
from .errors import DomainError, LabelRankError, ParameterError
from .graph import Snapshot, binarize, read_stream, symmetrize
from .labelprop import CommunityAssignment, Params, run_labelrank
from .metrics import ModularityVariant, modularity
from .synthgen import stream_from_spec, write_planted_stream

log = logging.getLogger("labelrankt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

Q_GRID = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

REPORT_HEADER = ["t", "Q", "communities", "iters", "updated", "ms"]


@dataclass(frozen=True)
class RunRecord:
    time_index: int
    modularity: float
    community_count: int
    iterations: int
    updated_nodes: int
    wall_millis: float


@dataclass
class RunReport:
    records: list[RunRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in self.records:
            writer.writerow([
                r.time_index, repr(r.modularity), r.community_count,
                r.iterations, r.updated_nodes, repr(r.wall_millis),
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunReport":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != REPORT_HEADER:
            raise DomainError(f"report header must be {','.join(REPORT_HEADER)}")
        records = [
            RunRecord(int(t), float(q), int(c), int(i), int(u), float(ms))
            for t, q, c, i, u, ms in rows[1:]
        ]
        return cls(records)


def prepare(snapshot: Snapshot, directed: bool = True, weighted: bool = True) -> Snapshot:
    """Apply the direction/weight flags to one snapshot."""
    if not directed:
        return symmetrize(snapshot, binarize=not weighted)
    return snapshot if weighted else binarize(snapshot)


def _variant(choice: str, directed: bool) -> ModularityVariant:
    if choice == "auto":
        return ModularityVariant.DIRECTED_WEIGHTED if directed else ModularityVariant.UNDIRECTED_WEIGHTED
    return ModularityVariant(choice)


def _safe_q(snapshot: Snapshot, assignment: CommunityAssignment, variant: ModularityVariant) -> float:
    if snapshot.m == 0:
        return 0.0
    return modularity(snapshot, assignment, variant).q


def detect(
    snapshots: Sequence[Snapshot],
    params: Params,
    mode: str = "incremental",
    *,
    variant: ModularityVariant = ModularityVariant.DIRECTED_WEIGHTED,
    score_on: Sequence[Snapshot] | None = None,
    timing: bool = True,
) -> tuple[RunReport, list[CommunityAssignment], list[int]]:
    """Run static or incremental detection over a stream.

    Returns the report, the assignments and the row-operation count of every
    snapshot. Modularity is scored on ``score_on`` (default: the snapshots
    themselves).
    """
    score_on = snapshots if score_on is None else score_on
    records, assignments, ops = [], [], []
    if mode == "static":
        results = []
        for snap in snapshots:
            t0 = time.perf_counter()
            res = run_labelrank(snap, params)
            ms = (time.perf_counter() - t0) * 1e3
            results.append((res.assignment, res.stats, ms))
    elif mode == "incremental":
        t0 = time.perf_counter()
        steps = run_stream(snapshots, params)
        # run_stream is one call; spread its wall time over steps by work done
        total_ms = (time.perf_counter() - t0) * 1e3
        total_ops = sum(s.stats.row_ops for s in steps) or 1
        results = [(s.assignment, s.stats, total_ms * s.stats.row_ops / total_ops) for s in steps]
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    for snap, score_snap, (assignment, stats, ms) in zip(snapshots, score_on, results):
        records.append(RunRecord(
            snap.time_index,
            _safe_q(score_snap, assignment, variant),
            assignment.count,
            stats.iterations,
            stats.updated_nodes,
            round(ms, 3) if timing else 0.0,
        ))
        assignments.append(assignment)
        ops.append(stats.row_ops)
    return RunReport(records), assignments, ops


def sweep(
    snapshots: Sequence[Snapshot],
    params: Params,
    q_values: Sequence[float] = Q_GRID,
    variant: ModularityVariant = ModularityVariant.DIRECTED_WEIGHTED,
) -> list[dict]:
    """Average Q of weighted+directed vs binarized+undirected runs for each q.

    Both partitions are scored on the original snapshots.
    """
    plain = [prepare(s, directed=False, weighted=False) for s in snapshots]
    rows = []
    for q in q_values:
        p = Params(**{**params.__dict__, "q": float(q)})
        rich, _, _ = detect(snapshots, p, "incremental", variant=variant, timing=False)
        poor, _, _ = detect(plain, p, "incremental", variant=variant, score_on=snapshots, timing=False)
        q_rich = float(np.mean([r.modularity for r in rich.records]))
        q_poor = float(np.mean([r.modularity for r in poor.records]))
        rows.append({
            "q": float(q),
            "Q_weighted_directed": q_rich,
            "Q_binarized_undirected": q_poor,
            "difference": q_rich - q_poor,
        })
    return rows


def bench(snapshots: Sequence[Snapshot], params: Params) -> dict:
    """Static vs incremental on the same stream: wall time and row operations."""
    t0 = time.perf_counter()
    static, _, static_ops = detect(snapshots, params, "static")
    static_ms = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    inc, _, inc_ops = detect(snapshots, params, "incremental")
    inc_ms = (time.perf_counter() - t0) * 1e3
    return {
        "snapshots": len(snapshots),
        "static_ms": round(static_ms, 3),
        "incremental_ms": round(inc_ms, 3),
        "static_row_ops": int(sum(static_ops)),
        "incremental_row_ops": int(sum(inc_ops)),
        "row_ops_ratio": sum(inc_ops) / max(sum(static_ops), 1),
        "static_per_snapshot_ms": [r.wall_millis for r in static.records],
        "updated_nodes": [r.updated_nodes for r in inc.records],
        "static_updated_nodes": [r.updated_nodes for r in static.records],
    }


# -- argument parsing ----------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values or any(not 0 <= v <= 1 for v in values):
        raise argparse.ArgumentTypeError("q values must lie in [0, 1]")
    return values


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--inflation", type=float, required=True, help="inflation exponent (>= 1)")
    p.add_argument("--q", type=float, default=0.5, help="conditional update parameter")
    p.add_argument("--cutoff", type=float, default=0.1)
    p.add_argument("--self-loop", choices=["unit", "max", "sum"], default="unit")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--stall", type=int, default=5)
    p.add_argument("--expand-active", action="store_true",
                   help="let neighbours of changed nodes update too")


def _add_shape(p: argparse.ArgumentParser) -> None:
    d = p.add_mutually_exclusive_group()
    d.add_argument("--directed", dest="directed", action="store_true", default=True)
    d.add_argument("--undirected", dest="directed", action="store_false")
    w = p.add_mutually_exclusive_group()
    w.add_argument("--weighted", dest="weighted", action="store_true", default=True)
    w.add_argument("--binarized", dest="weighted", action="store_false")


def _add_seed(p: argparse.ArgumentParser) -> None:
    # detection itself draws no random numbers; the flag keeps command lines uniform
    p.add_argument("--seed", type=int, default=0, help="ignored by detection (it is deterministic)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labelrankt", description="LabelRank / LabelRankT community detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="detect communities in a snapshot stream")
    run.add_argument("input", type=Path, help="snapshot directory or stream file")
    _add_params(run)
    _add_shape(run)
    run.add_argument("--mode", choices=["static", "incremental"], default="incremental")
    run.add_argument("--modularity", choices=["auto", "directed", "undirected"], default="auto")
    run.add_argument("--out", type=Path, help="directory for report.csv and assign.NNNN.txt")
    run.add_argument("--no-timing", action="store_true", help="write 0 in the ms column")
    _add_seed(run)

    sw = sub.add_parser("sweep", help="weighted+directed vs binarized+undirected over q")
    sw.add_argument("input", type=Path)
    _add_params(sw)
    sw.add_argument("--q-values", type=_float_list, default=list(Q_GRID))
    sw.add_argument("--modularity", choices=["directed", "undirected"], default="directed")
    sw.add_argument("--out", type=Path)
    _add_seed(sw)

    be = sub.add_parser("bench", help="static vs incremental timing")
    be.add_argument("input", type=Path)
    _add_params(be)
    _add_shape(be)
    be.add_argument("--out", type=Path)
    _add_seed(be)

    gen = sub.add_parser("generate", help="write a synthetic planted stream")
    gen.add_argument("spec", type=Path, help="JSON stream spec")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)
    return parser


def _params(args) -> Params:
    return Params(
        inflation=args.inflation, q=args.q, cutoff=args.cutoff, self_loop=args.self_loop,
        max_iters=args.max_iters, stall_iters=args.stall, expand_active=args.expand_active,
    )


def _read(path: Path) -> list[Snapshot]:
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    return read_stream(path)


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    target = out / name if out.suffix == "" else out
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8", newline="\n")


def cmd_run(args) -> int:
    params = _params(args)
    raw = _read(args.input)
    snaps = [prepare(s, args.directed, args.weighted) for s in raw]
    variant = _variant(args.modularity, args.directed)
    report, assignments, _ = detect(snaps, params, args.mode, variant=variant, timing=not args.no_timing)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for snap, assignment in zip(snaps, assignments):
            (args.out / f"assign.{snap.time_index:04d}.txt").write_text(
                assignment.to_text(), encoding="utf-8", newline="\n"
            )
    _emit(report.to_csv(), args.out, "report.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = _params(args)
    snaps = _read(args.input)
    rows = sweep(snaps, params, args.q_values, ModularityVariant(args.modularity))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["q", "Q_weighted_directed", "Q_binarized_undirected", "difference"])
    for r in rows:
        writer.writerow([repr(r["q"]), repr(r["Q_weighted_directed"]),
                         repr(r["Q_binarized_undirected"]), repr(r["difference"])])
    _emit(buf.getvalue(), args.out, "sweep.csv")
    return EXIT_OK


def cmd_bench(args) -> int:
    params = _params(args)
    snaps = [prepare(s, args.directed, args.weighted) for s in _read(args.input)]
    _emit(json.dumps(bench(snaps, params), indent=2) + "\n", args.out, "bench.json")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        spec = json.loads(args.spec.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise ParameterError("spec must be a JSON object")
    stream = stream_from_spec(spec, args.seed)
    write_planted_stream(stream, args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench, "generate": cmd_generate}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LabelRankError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
