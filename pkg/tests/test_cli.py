import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import array_shapes, arrays

from bregmanlab import cli

CONFIG = {
    "seed": 5,
    "problems": [
        {"id": "quad", "family": "quadratic", "dim": 8, "L": 4, "sigma": 0.5, "feasible": {"kind": "box"}},
        {"id": "pwl", "family": "pwl-strong", "dim": 6, "pieces": 6, "sigma": 1},
    ],
    "runs": [
        {"id": "sweep", "problem_class": "SP", "problems": ["quad"], "variant": ["classical", "modified"],
         "model": ["extended-md", "dual-averaging", "hybrid"], "schedule": {"kind": "modified-structured"},
         "K": 40},
        {"id": "ns", "problem_class": "NSP", "problems": ["pwl"], "variant": "modified", "model": "mixed",
         "schedule": {"kind": "simple-averaging"}, "K": 40},
    ],
}


@pytest.fixture
def workspace(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CONFIG))
    assert cli.main(["gen", "--config", str(path), "--out", str(tmp_path / "probs")]) == 0
    return tmp_path, path


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, array_shapes(max_dims=2, max_side=5)))
def test_array_roundtrip(a):
    b = cli.decode_array(json.loads(json.dumps(cli.encode_array(a))))
    assert b.shape == a.shape
    assert b.tobytes() == np.ascontiguousarray(a).tobytes()


def test_generated_instance_rebuilds_exactly(workspace):
    tmp, _ = workspace
    doc = json.loads((tmp / "probs" / "quad.json").read_text())
    inst = cli.load_instance(doc)
    ev = np.linalg.eigvalsh(inst.data["H"])
    assert ev[-1] == pytest.approx(4.0) and ev[0] == pytest.approx(0.5)
    again = cli.generate(CONFIG["problems"][0], CONFIG["seed"])
    assert again.data["H"].tobytes() == inst.data["H"].tobytes()


def test_sweep_writes_one_csv_per_pair_and_is_reproducible(workspace):
    tmp, cfg = workspace
    args = ["run", "--config", str(cfg), "--problems", str(tmp / "probs")]
    assert cli.main(args + ["--out", str(tmp / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp / "b")]) == 0
    files = sorted(p.name for p in (tmp / "a").glob("*.csv"))
    assert len([f for f in files if "__sweep__" in f]) == 6
    assert len(files) == 7
    for name in files:
        assert (tmp / "a" / name).read_bytes() == (tmp / "b" / name).read_bytes()
    lines = (tmp / "a" / "quad__sweep__modified__hybrid.csv").read_text().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1].split(",") == cli.CSV_COLUMNS
    assert len(lines) == 2 + 41


def test_report_counts_no_violations(workspace):
    tmp, cfg = workspace
    cli.main(["run", "--config", str(cfg), "--problems", str(tmp / "probs"), "--out", str(tmp / "runs")])
    assert cli.main(["report", "--in", str(tmp / "runs"), "--out", str(tmp / "sum.json")]) == 0
    doc = json.loads((tmp / "sum.json").read_text())
    assert doc["bound_violations"] == 0
    assert all(r["max_Rk_residual"] <= 1e-8 for r in doc["runs"].values())


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--config"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["bogus"])
    assert info.value.code == 1


def test_validation_exit_code(tmp_path):
    bad = dict(CONFIG, problems=[{"id": "x", "family": "nope", "dim": 3}])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert cli.main(["gen", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    path.write_text("{not json")
    assert cli.main(["gen", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    rho = dict(CONFIG, problems=[{"id": "h", "family": "holder", "dim": 3, "rho": 2.0}])
    path.write_text(json.dumps(rho))
    assert cli.main(["gen", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_io_exit_code(tmp_path):
    assert cli.main(["gen", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 4
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CONFIG))
    assert cli.main(["run", "--config", str(path), "--problems", str(tmp_path / "none"),
                     "--out", str(tmp_path / "o")]) == 4


def test_strict_invariant_exit_code(workspace, monkeypatch):
    tmp, cfg = workspace
    real = cli.eng.RunConfig

    def mutated(**kw):
        return real(**{**kw, "ck_factor": 0.0})

    monkeypatch.setattr(cli.eng, "RunConfig", mutated)
    args = ["run", "--config", str(cfg), "--problems", str(tmp / "probs"), "--out", str(tmp / "s")]
    assert cli.main(args + ["--strict"]) == 3


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "3")
    assert cli._threads() == 3
    monkeypatch.setenv("LAB_THREADS", "0")
    assert cli._threads() == 1


def test_verify_quick_writes_report(tmp_path, capsys):
    assert cli.main(["verify", "--quick", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "acceptance.json").read_text())
    assert [c["id"] for c in doc["criteria"]] == list(range(1, 11))
    assert "criterion  1" in capsys.readouterr().out
