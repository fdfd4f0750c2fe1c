import json
import subprocess
import sys

import pytest

from labelrankt import Snapshot, write_stream
from labelrankt.cli import RunRecord, RunReport, Q_GRID, main
from labelrankt.synthgen import planted_stream


@pytest.fixture
def triangles_dir(tmp_path, two_triangles):
    write_stream([two_triangles], tmp_path / "tri")
    return tmp_path / "tri"


@pytest.fixture
def stream_dir(tmp_path):
    stream = planted_stream([15, 15, 15], 0.5, 0.03, steps=3, churn=0.05, weight_range=(0.5, 1.5), seed=2)
    write_stream(stream.snapshots, tmp_path / "s")
    return tmp_path / "s"


def test_static_triangles(triangles_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(triangles_dir), "--inflation", "2", "--mode", "static", "--out", str(out)]) == 0
    report = RunReport.from_csv((out / "report.csv").read_text())
    (rec,) = report.records
    assert rec.community_count == 2 and rec.modularity == pytest.approx(0.5, abs=1e-12)
    assert (out / "assign.0000.txt").read_text() == "1 1\n2 1\n3 1\n4 4\n5 4\n6 4\n"


def test_identical_pair_updates_nothing(tmp_path, two_triangles):
    write_stream([two_triangles, two_triangles.with_time(1)], tmp_path / "p")
    assert main(["run", str(tmp_path / "p"), "--inflation", "2", "--out", str(tmp_path / "o")]) == 0
    report = RunReport.from_csv((tmp_path / "o" / "report.csv").read_text())
    assert report.records[1].updated_nodes == 0


def test_reruns_byte_identical(stream_dir, tmp_path):
    for name in ("a", "b"):
        assert main(["run", str(stream_dir), "--inflation", "2", "--no-timing", "--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "report.csv" in files and len(files) == 4
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_report_roundtrip():
    rep = RunReport([RunRecord(0, 0.1 + 0.2, 3, 7, 11, 1.234), RunRecord(1, -1 / 3, 1, 0, 0, 0.0)])
    assert RunReport.from_csv(rep.to_csv()) == rep
    assert rep.to_csv().splitlines()[0] == "t,Q,communities,iters,updated,ms"


@pytest.mark.parametrize("flags", [[], ["--undirected"], ["--binarized"], ["--undirected", "--binarized"],
                                   ["--modularity", "undirected"], ["--self-loop", "sum", "--q", "0.7"]])
def test_flag_combinations(stream_dir, tmp_path, flags, capsys):
    assert main(["run", str(stream_dir), "--inflation", "3", *flags]) == 0
    report = RunReport.from_csv(capsys.readouterr().out)
    assert len(report.records) == 3


def test_sweep_single(triangles_dir, capsys):
    assert main(["sweep", str(triangles_dir), "--inflation", "2", "--q-values", "0.5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "q,Q_weighted_directed,Q_binarized_undirected,difference"
    q, a, b, d = map(float, lines[1].split(","))
    assert q == 0.5 and d == a - b


def test_sweep_default_grid(triangles_dir, capsys):
    assert main(["sweep", str(triangles_dir), "--inflation", "2"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert [float(r.split(",")[0]) for r in rows] == list(Q_GRID)


def test_bench_zero_churn(tmp_path, two_triangles, capsys):
    write_stream([two_triangles.with_time(t) for t in range(3)], tmp_path / "z")
    assert main(["bench", str(tmp_path / "z"), "--inflation", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["updated_nodes"][1:] == [0, 0]
    assert out["incremental_row_ops"] < out["static_row_ops"]


def test_generate(tmp_path):
    spec = {"sizes": [6, 6], "p_in": 0.9, "p_out": 0.05,
            "steps": [[], [{"kind": "death_node", "node": 2}], [{"kind": "birth_node", "node": 30, "community": 0}]]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    for name in ("a", "b"):
        assert main(["generate", str(tmp_path / "spec.json"), "--seed", "4", "--out", str(tmp_path / name)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert sum(n.endswith(".edges") for n in names) == 3 and sum(n.startswith("truth.") for n in names) == 3
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_generate_rejects_bad_probabilities(tmp_path, capsys):
    (tmp_path / "spec.json").write_text(json.dumps({"sizes": [5], "p_in": 0.1, "p_out": 0.4}))
    assert main(["generate", str(tmp_path / "spec.json"), "--out", str(tmp_path / "x")]) == 1
    assert "p_out" in capsys.readouterr().err


@pytest.mark.parametrize("argv, code", [
    (["run", "/nonexistent/path", "--inflation", "2"], 2),
    (["run", "{tri}"], 1),
    (["run", "{tri}", "--inflation", "0.5"], 1),
    (["run", "{tri}", "--inflation", "2", "--directed", "--undirected"], 1),
    (["run", "{tri}", "--inflation", "2", "--mode", "batch"], 1),
    (["sweep", "{tri}", "--inflation", "2", "--q-values", "0.5,1.5"], 1),
    (["frobnicate"], 1),
])
def test_exit_codes(triangles_dir, argv, code, capsys):
    argv = [a.replace("{tri}", str(triangles_dir)) for a in argv]
    assert main(argv) == code


def test_data_error(tmp_path, capsys):
    (tmp_path / "bad.edges").write_text("1 2 -4\n")
    assert main(["run", str(tmp_path / "bad.edges"), "--inflation", "2"]) == 2
    assert "line 1" in capsys.readouterr().err


def test_module_entry_point(triangles_dir):
    proc = subprocess.run([sys.executable, "-m", "labelrankt", "run", str(triangles_dir), "--inflation", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("t,Q,")
