import csv
import io
import json
import os

import pytest

from conftest import DATA
from teamauction.cli import main
from teamauction.serialize import instance_to_json, load_instance

FIG1 = os.path.join(DATA, "fig1.json")


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_run_ap_fig1():
    code, out, _ = call("run", "--mechanism", "ap", "--instance", FIG1, "--r", "10")
    assert code == 0
    doc = json.loads(out)
    assert doc["payments"] == {"X": 8.0}
    assert doc["winner"] == ["sv", "vt"] and doc["mechanism"] == "ap" and doc["reserve"] == 10.0


def test_run_with_bids_file(tmp_path):
    bids = tmp_path / "bids.json"
    bids.write_text(json.dumps({"bids": {"sv": 1, "vt": 1, "st": 8}, "reported_owner": {"vt": "X2"}}))
    code, out, _ = call("run", "--mechanism", "ap", "--instance", FIG1, "--bids", str(bids), "--r", "10")
    assert code == 0
    assert json.loads(out)["payments"] == {"X": 2.0, "X2": 2.0}


def test_lowerbound():
    code, out, _ = call("lowerbound", "--m", "5", "--kappa", "0.0625")
    assert code == 0
    doc = json.loads(out)
    assert (doc["payment"], doc["nu"], doc["ratio"]) == (1.0, 0.0625, 16.0)


@pytest.mark.parametrize("argv", [
    ("run", "--mechanism", "mp", "--r", "10", "--instance", FIG1),
    ("run", "--mechanism", "ap", "--instance", FIG1),
    ("run", "--mechanism", "ap", "--instance", FIG1, "--r", "-1"),
    ("run", "--mechanism", "ap", "--instance", "missing.json", "--r", "1"),
    ("run", "--mechanism", "xx", "--instance", FIG1),
    ("lowerbound", "--m", "0"),
    ("generate", "--kind", "explicit", "--elements", "2", "--sets", "4"),
    ("frugality", "--mechanism", "mp", "--elements", "1"),
    ("sweep", "--trials", "2"),
    ("sweep", "--trials", "0", "--out", "x"),
    ("frobnicate",),
    (),
])
def test_validation_errors_exit_2(argv):
    code, out, err = call(*argv)
    assert code == 2
    assert out == ""
    assert err.startswith("error:") and err.count("\n") == 1


def test_malformed_instance_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call("nu", "--instance", str(bad))[0] == 2
    bad.write_text(json.dumps({"elements": [1]}))
    assert call("nu", "--instance", str(bad))[0] == 2


def test_runtime_error_exit_1(tmp_path):
    mono = tmp_path / "mono.json"
    mono.write_text(json.dumps({"elements": [1, 2], "ownership": {"1": 1, "2": 2},
                                "feasible": {"explicit": [[1], [1, 2]]}, "costs": {"1": 1, "2": 1}}))
    code, _, err = call("nu", "--instance", str(mono))
    assert code == 1 and "NotMonopolyFree" in err


def test_nu_and_audit(tmp_path):
    code, out, _ = call("nu", "--instance", FIG1)
    assert code == 0 and json.loads(out)["nu"] == 8.0
    code, out, _ = call("audit", "--mechanism", "rvcg", "--r", "10", "--instance", FIG1)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    x = next(r for r in rows if r["agent"] == "X")
    assert float(x["gain"]) >= 6 and x["kind"]
    code, _, _ = call("audit", "--mechanism", "ap", "--r", "10", "--instance", FIG1,
                      "--out", str(tmp_path), "--format", "json")
    assert code == 0
    doc = json.loads((tmp_path / "audit.json").read_text())
    assert all(float(r["gain"]) == 0 for r in doc)


def test_frugality_probe_csv_is_reproducible():
    a = call("frugality", "--mechanism", "mp", "--trials", "4", "--seed", "9")
    b = call("frugality", "--mechanism", "mp", "--trials", "4", "--seed", "9")
    assert a[0] == 0 and a[1] == b[1]
    rows = list(csv.DictReader(io.StringIO(a[1])))
    assert [r["trial"] for r in rows] == ["0", "1", "2", "3"]
    assert set(rows[0]) == {"trial", "payment", "nu", "ratio"}


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("TEAM_AUCTION_SEED", "9")
    env = call("frugality", "--mechanism", "mp", "--trials", "3")
    flag = call("frugality", "--mechanism", "mp", "--trials", "3", "--seed", "9")
    assert env[1] == flag[1]
    monkeypatch.setenv("TEAM_AUCTION_SEED", "nine")
    assert call("nu", "--instance", FIG1)[0] == 2


@pytest.mark.parametrize("kind", ["explicit", "graph", "uniform", "smallworld", "lowerbound"])
def test_generated_instances_round_trip(tmp_path, kind):
    code, _, _ = call("generate", "--kind", kind, "--seed", "4", "--out", str(tmp_path))
    assert code == 0
    path = tmp_path / "instance.json"
    sys, costs = load_instance(str(path))
    assert json.loads(path.read_text()) == instance_to_json(sys, costs)
    assert call("generate", "--kind", kind, "--seed", "4")[1] == path.read_text()


def test_sweep_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nodes": 8, "edges": 14, "trials": 2, "r_max": 1.0, "r_step": 0.5}))
    code, _, _ = call("sweep", "--config", str(cfg), "--out", str(tmp_path / "a"))
    assert code == 0
    rows = (tmp_path / "a" / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 3 * 2
    code, _, _ = call("sweep", "--config", str(cfg), "--trials", "3", "--out", str(tmp_path / "b"))
    assert code == 0
    assert len((tmp_path / "b" / "results.csv").read_text().splitlines()) == 1 + 3 * 3 * 2
    cfg.write_text(json.dumps({"nodes": 8, "bogus": 1}))
    assert call("sweep", "--config", str(cfg), "--out", str(tmp_path / "c"))[0] == 2


def test_out_directory_has_no_temp_files(tmp_path):
    code, _, _ = call("run", "--mechanism", "mp", "--instance", FIG1, "--out", str(tmp_path))
    assert code == 0
    assert os.listdir(tmp_path) == ["outcome.json"]
