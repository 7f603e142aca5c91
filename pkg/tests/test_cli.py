import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.stats import spearmanr

from maprank import AttentionSurface, synthetic_radial_surface
from maprank.cli import CSV_COLUMNS, main, read_inventory
from maprank.sim import InventoryConfig, generate_inventory


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def inventory(tmp_path):
    path = tmp_path / "inv.jsonl"
    assert run("gen-inventory", "--n", 80, "--seed", 3, "--base", -3, "--noise", 0.8, "--out", path) == 0
    return path


# --- gen-inventory ----------------------------------------------------------


def test_gen_inventory_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("gen-inventory", "--n", 100, "--seed", 7, "--out", a) == 0
    assert run("gen-inventory", "--n", 100, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == 100
    assert set(json.loads(lines[0])) == {"id", "x", "y", "logit", "price", "reviews", "rating"}


def test_gen_inventory_empty(tmp_path):
    out = tmp_path / "empty.jsonl"
    assert run("gen-inventory", "--n", 0, "--out", out) == 0
    assert out.read_bytes() == b""


def test_gen_inventory_unwritable(tmp_path, capsys):
    assert run("gen-inventory", "--n", 5, "--out", tmp_path / "missing" / "x.jsonl") == 2
    assert "cannot write" in capsys.readouterr().err


def test_gen_inventory_round_trip_and_distance_coupling(tmp_path):
    out = tmp_path / "inv.jsonl"
    args = ("--n", 400, "--seed", 1, "--beta", 0.5, "--noise", 0.01, "--base", -0.5)
    assert run("gen-inventory", *args, "--out", out) == 0
    listings = read_inventory(str(out))
    cfg = InventoryConfig(n_listings=400, seed=1, distance_coeff=0.5, noise_sd=0.01, base_logit=-0.5)
    assert listings == generate_inventory(cfg)
    rho = spearmanr([l.logit for l in listings], [-math.hypot(l.x, l.y) for l in listings]).statistic
    assert rho > 0.9


# --- run-exp ----------------------------------------------------------------


def test_run_exp_csv_and_sidecar(tmp_path, inventory):
    out = tmp_path / "report.csv"
    assert run("run-exp", "--inventory", inventory, "--experiment", "shuffle_map", "--sessions", 3000, "--out", out) == 0
    with open(out, newline="") as fh:
        assert next(csv.reader(fh)) == list(CSV_COLUMNS)
    rows = read_csv(out)
    assert [r["arm"] for r in rows] == ["control", "treatment"]
    assert abs(float(rows[0]["analytic_expected"]) - float(rows[1]["analytic_expected"])) <= 1e-12
    sidecar = json.loads((tmp_path / "report.json").read_text())
    assert sidecar["seed"] == 0 and sidecar["config"]["experiment"] == "shuffle_map"
    assert b"\r" not in out.read_bytes()


def test_run_exp_alpha_sweep_pin_counts(tmp_path, inventory):
    out = tmp_path / "sweep.csv"
    assert run("run-exp", "--inventory", inventory, "--experiment", "alpha_sweep", "--sessions", 500, "--out", out) == 0
    rows = read_csv(out)
    pins = [float(r["pins_mean"]) for r in rows[1:]] + [float(rows[0]["pins_mean"])]
    assert pins == sorted(pins)


def test_run_exp_numbers_have_nine_significant_digits(tmp_path, inventory):
    out = tmp_path / "r.csv"
    assert run("run-exp", "--inventory", inventory, "--experiment", "shuffle_list", "--sessions", 777, "--out", out) == 0
    for row in read_csv(out):
        for col in ("booking_rate", "analytic_expected", "ndcg"):
            assert row[col] == f"{float(row[col]):.9g}"


def test_run_exp_same_seed_identical(tmp_path, inventory):
    outs = [tmp_path / f"r{i}.csv" for i in range(3)]
    base = ("run-exp", "--inventory", inventory, "--experiment", "urgency_3arm", "--sessions", 9000, "--seed", 5)
    assert run(*base, "--out", outs[0]) == 0
    assert run(*base, "--out", outs[1]) == 0
    assert run(*base, "--threads", 4, "--out", outs[2]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes() == outs[2].read_bytes()


def test_run_exp_json_format(tmp_path, inventory):
    out = tmp_path / "r.json"
    assert run("run-exp", "--inventory", inventory, "--experiment", "minipin", "--sessions", 200, "--format", "json", "--out", out) == 0
    report = json.loads(out.read_text())
    assert [a["arm"] for a in report["arms"]] == ["control", "treatment"]
    assert report["arms"][1]["tier_impressions"]["mini"] > 0


def test_run_exp_malformed_line(tmp_path, inventory, capsys):
    lines = inventory.read_text().splitlines()
    lines[4] = '{"id": "broken", "x": 0.1}'
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert run("run-exp", "--inventory", bad, "--experiment", "shuffle_map", "--out", tmp_path / "r.csv") == 3
    assert "line 5" in capsys.readouterr().err
    bad.write_text("not json\n")
    assert run("run-exp", "--inventory", bad, "--experiment", "shuffle_map", "--out", tmp_path / "r.csv") == 3


def test_run_exp_unknown_experiment(tmp_path, inventory):
    assert run("run-exp", "--inventory", inventory, "--experiment", "bogus", "--out", tmp_path / "r.csv") == 4


def test_run_exp_missing_inventory(tmp_path):
    assert run("run-exp", "--inventory", tmp_path / "none", "--experiment", "shuffle_map", "--out", tmp_path / "r.csv") == 3


# --- estimate-surface -------------------------------------------------------


def test_estimate_surface_recovers_generator(tmp_path):
    log, out = tmp_path / "clicks.jsonl", tmp_path / "surface.json"
    flags = ("--peak-ctr", 0.9, "--decay", 0.15, "--resolution", 11)
    assert run("gen-clicks", "--impressions", 300_000, "--seed", 2, *flags, "--out", log) == 0
    assert run("estimate-surface", "--log", log, "--out", out, "--resolution", 11) == 0
    est = AttentionSurface.from_dict(json.loads(out.read_text()))
    truth = synthetic_radial_surface(0.9, 0.15, resolution=11)
    assert np.abs(est.relative() - truth.relative()).max() <= 0.05
    rows = read_csv(tmp_path / "surface.csv")
    center = [r for r in rows if float(r["dx_cell"]) == 0 and float(r["dy_cell"]) == 0]
    assert center[0]["relative_attention"] == "1"


def test_estimate_surface_threads_identical(tmp_path):
    log = tmp_path / "clicks.jsonl"
    assert run("gen-clicks", "--impressions", 20000, "--seed", 2, "--out", log) == 0
    assert run("estimate-surface", "--log", log, "--out", tmp_path / "a.json") == 0
    assert run("estimate-surface", "--log", log, "--out", tmp_path / "b.json", "--threads", 4) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_estimate_surface_empty_log(tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    assert run("estimate-surface", "--log", log, "--out", tmp_path / "s.json") == 5


# --- curves -----------------------------------------------------------------


def test_curves_from_positional_logs(tmp_path, inventory):
    log = tmp_path / "clicks.jsonl"
    assert run(
        "gen-clicks", "--mode", "session", "--inventory", inventory, "--user", "list",
        "--max-pins", 6, "--sessions", 40000, "--click-propensity", 0.2, "--seed", 4, "--out", log,
    ) == 0
    assert run("curves", "--log", log, "--out-dir", tmp_path / "curves") == 0
    rows = read_csv(tmp_path / "curves" / "ctr_by_search_rank.csv")
    assert rows[0]["search_rank"] == "1" and rows[0]["normalized_ctr"] == "1"
    ctr = [float(r["normalized_ctr"]) for r in rows]
    assert all(a >= b for a, b in zip(ctr, ctr[1:]))
    assert (tmp_path / "curves" / "ctr_by_distance_rank.csv").exists()


def test_curves_transform_value(tmp_path):
    log = tmp_path / "clicks.jsonl"
    record = {"query_id": "q", "dx": 0.0, "dy": 0.0, "clicked": True, "tier": "regular", "rank": 2, "distance_rank": 1}
    log.write_text(json.dumps(record) + "\n")
    assert run("curves", "--log", log, "--out-dir", tmp_path / "c") == 0
    rows = read_csv(tmp_path / "c" / "rank_distance.csv")
    assert float(rows[0]["rank_transform"]) == pytest.approx(0.5)


def test_curves_missing_key(tmp_path, capsys):
    log = tmp_path / "clicks.jsonl"
    log.write_text(json.dumps({"query_id": "q", "dx": 0.0, "dy": 0.0, "clicked": True, "tier": "regular"}) + "\n")
    assert run("curves", "--log", log, "--out-dir", tmp_path / "c") == 3
    assert "rank" in capsys.readouterr().err


# --- optimize-center --------------------------------------------------------


def test_optimize_center(tmp_path, inventory):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("optimize-center", "--inventory", inventory, "--epsilon", 0.05, "--out", a) == 0
    assert run("optimize-center", "--inventory", inventory, "--epsilon", 0.05, "--threads", 3, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    result = json.loads(a.read_text())
    assert len(result["pins"]) == 18 and len(result["center"]) == 2 and result["objective"] > 0


def test_threads_must_be_positive(tmp_path):
    assert run("gen-inventory", "--threads", 0, "--out", tmp_path / "x") == 2


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "maprank.cli", "gen-inventory", "--n", "3", "--seed", "1"],
        capture_output=True, text=True, check=True,
    )
    assert len(proc.stdout.splitlines()) == 3
    bad = subprocess.run([sys.executable, "-m", "maprank.cli", "run-exp"], capture_output=True, text=True)
    assert bad.returncode == 2
