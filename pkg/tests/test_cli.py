import csv
import io
import json
import subprocess
import sys

import pytest

from vnfcdn.cli import EXIT_CONFIG, EXIT_INFEASIBLE, main
from vnfcdn.experiment import COLUMNS
from vnfcdn.placement import check_feasibility, load_solution
from vnfcdn.topology import load_topology
from vnfcdn.workload import load_workload


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_generate_then_run_from_files(tmp_path, capsys):
    topo, work, sol = tmp_path / "t.json", tmp_path / "w.json", tmp_path / "s.json"
    assert main(["gen-topology", "--seed", "3", "--out", str(topo)]) == 0
    assert main(["gen-workload", "--topology", str(topo), "--seed", "3", "--out", str(work)]) == 0
    capsys.readouterr()
    code = main(["run", "--topology", str(topo), "--workload", str(work), "--solution", str(sol), "--no-timing"])
    assert code == 0
    out = rows(capsys.readouterr().out)
    assert len(out) == 1 and out[0]["algorithm"] == "cpvnf"
    t, w = load_topology(topo), load_workload(work)
    s = load_solution(sol, w, t)
    assert check_feasibility(s, t, w) == []
    assert int(out[0]["accepted"]) == len(s.mappings)


def test_run_generated_to_csv(tmp_path):
    path = tmp_path / "m.csv"
    assert main(["run", "--seeds", "0", "1", "--output", str(path), "--no-timing"]) == 0
    parsed = list(csv.reader(io.StringIO(path.read_text())))
    assert tuple(parsed[0]) == COLUMNS and len(parsed) == 3


def test_run_is_reproducible(capsys):
    main(["run", "--seeds", "2", "--no-timing"])
    a = capsys.readouterr().out
    main(["run", "--seeds", "2", "--no-timing"])
    assert capsys.readouterr().out == a


def test_cpvnf_flags_are_applied(capsys):
    assert main(["run", "--seeds", "0", "--stop", "0", "--k-paths", "1", "--no-timing"]) == 0
    (row,) = rows(capsys.readouterr().out)
    assert row["retries_total"] == "0"


def test_sweep(capsys):
    assert main(["sweep", "--user-counts", "9", "12", "--seeds", "0", "--no-timing"]) == 0
    out = rows(capsys.readouterr().out)
    assert [r["n_users"] for r in out] == ["9", "12"]


def test_nested_exact_sweep(capsys):
    assert main(["sweep", "--preset", "tiny", "--algorithm", "exact", "--user-counts", "1", "2", "--nested", "--seeds", "1"]) == 0
    out = rows(capsys.readouterr().out)
    assert all(r["proven_optimal"] == "True" for r in out)


def test_compare_json(tmp_path):
    path = tmp_path / "gap.json"
    assert main(["compare", "--seeds", "1", "3", "--output", str(path)]) == 0
    doc = json.loads(path.read_text())
    assert set(doc) == {"scenario_id", "ratios", "excluded", "mean_ratio", "max_ratio"}
    assert all(v >= 1.0 for v in doc["ratios"].values())


def test_guard_refusal_exit_code(capsys):
    assert main(["run", "--algorithm", "exact", "--seeds", "0"]) == EXIT_CONFIG
    assert "size guard" in capsys.readouterr().err


def test_bad_parameter_exit_code(capsys):
    assert main(["run", "--pi", "1.5"]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"seeds": [1,')
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err


def test_config_file_applies(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario_id": "from-file", "seeds": [4]}))
    assert main(["run", "--config", str(cfg), "--no-timing"]) == 0
    (row,) = rows(capsys.readouterr().out)
    assert (row["scenario_id"], row["seed"]) == ("from-file", "4")


def test_mismatched_files(tmp_path, capsys):
    t1, t2, w = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "w.json"
    main(["gen-topology", "--seed", "0", "--out", str(t1)])
    main(["gen-topology", "--seed", "0", "--users", "3", "--out", str(t2)])
    main(["gen-workload", "--topology", str(t1), "--out", str(w)])
    assert main(["run", "--topology", str(t2), "--workload", str(w)]) == EXIT_CONFIG
    assert main(["run", "--topology", str(t1)]) == EXIT_CONFIG


def test_missing_topology_file(tmp_path):
    assert main(["gen-workload", "--topology", str(tmp_path / "nope.json"), "--out", str(tmp_path / "w.json")]) == EXIT_CONFIG


def test_infeasible_exact_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"workload": {"threshold_range_ms": [0.001, 0.001]}}))
    code = main(["run", "--preset", "tiny", "--algorithm", "exact", "--config", str(cfg), "--seeds", "0"])
    assert code == EXIT_INFEASIBLE


def test_generation_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"topology": {"content_out_degree": [0, 0], "surrogate_out_degree": [0, 0], "max_attempts": 2}}))
    assert main(["gen-topology", "--config", str(cfg), "--out", str(tmp_path / "t.json")]) == EXIT_INFEASIBLE


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["launch"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "t.json"
    proc = subprocess.run(
        [sys.executable, "-m", "vnfcdn", "gen-topology", "--seed", "1", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and out.exists()
