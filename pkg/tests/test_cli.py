import json
import math
import os

import pytest

from orbitweave.cli import main


def run(tmp_path, command, config, seed=1, outdir="out"):
    cfg = tmp_path / f"{command}.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / outdir
    code = main(["--config", str(cfg), "--seed", str(seed),
                 "--out", str(out), "--command", command])
    return code, out


SPECTRUM_CFG = {
    "system": {"kind": "full_shift", "k": 2},
    "observable": {"kind": "frequency", "symbol": 1},
    "alpha_grid": [i / 10 for i in range(1, 10)],
}


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# hash=")
    assert "orbitweave=" in lines[0]
    header = lines[1].split(",")
    return header, [dict(zip(header, l.split(","))) for l in lines[2:]]


def test_spectrum_grid(tmp_path):
    code, out = run(tmp_path, "spectrum", SPECTRUM_CFG)
    assert code == 0
    header, rows = read_rows(out / "spectrum.csv")
    assert header == ["alpha", "h_var", "h_count", "n_count", "gap", "flag"]
    assert len(rows) == 10  # 9 grid rows plus the flagged sup row
    sup = rows[-1]
    assert sup["flag"] == "sup"
    assert float(sup["alpha"]) == 0.5
    assert float(sup["h_var"]) == pytest.approx(math.log(2), abs=1e-9)


def test_spectrum_constrained_sup_flagged(tmp_path):
    cfg = dict(SPECTRUM_CFG)
    cfg["alpha_grid"] = [0.27, 0.3, 0.33]
    cfg["constraint"] = {"lo": 0.25, "hi": 0.35, "closed": False}
    code, out = run(tmp_path, "spectrum", cfg)
    assert code == 0
    _, rows = read_rows(out / "spectrum.csv")
    assert rows[-1]["flag"] == "sup"


def test_spectrum_bad_grid_exits_2_without_csv(tmp_path):
    cfg = dict(SPECTRUM_CFG)
    cfg["alpha_grid"] = [0.5, 1.5]
    code, out = run(tmp_path, "spectrum", cfg)
    assert code == 2
    assert not (out / "spectrum.csv").exists()


def test_byte_identical_reruns(tmp_path):
    _, out1 = run(tmp_path, "spectrum", SPECTRUM_CFG, seed=7, outdir="a")
    _, out2 = run(tmp_path, "spectrum", SPECTRUM_CFG, seed=7, outdir="b")
    assert (out1 / "spectrum.csv").read_bytes() == \
        (out2 / "spectrum.csv").read_bytes()


def test_katok_csv(tmp_path):
    cfg = {"system": {"kind": "full_shift", "k": 2},
           "measure": {"bernoulli": 0.5},
           "q": 1, "delta": 0.1, "n_grid": [8, 14, 20]}
    code, out = run(tmp_path, "katok", cfg)
    assert code == 0
    lines = (out / "katok.csv").read_text().splitlines()
    assert "markov_entropy=" in lines[0]
    _, rows = read_rows(out / "katok.csv")
    assert len(rows) == 3
    assert abs(float(rows[-1]["rate"]) - math.log(2)) < 0.05


def test_katok_infeasible_exits_2(tmp_path):
    cfg = {"system": {"kind": "full_shift", "k": 2},
           "measure": {"bernoulli": 0.5},
           "q": 6, "delta": 0.1, "n_grid": [24]}
    code, _ = run(tmp_path, "katok", cfg)
    assert code == 2


def test_shadow_single_true_orbit(tmp_path):
    cfg = {"system": {"kind": "full_shift", "k": 2},
           "mode": "single", "delta": 0.0, "length": 50}
    code, out = run(tmp_path, "shadow", cfg)
    assert code == 0
    doc = json.loads((out / "shadow.json").read_text())
    assert doc["found"]
    assert doc["max_deviation"] == 0.0


def test_shadow_modulus_table(tmp_path):
    cfg = {"system": {"kind": "tent", "s": 2.0}, "mode": "modulus",
           "epsilon": 1e-3, "trials": 10, "length": 40}
    code, out = run(tmp_path, "shadow", cfg)
    assert code == 0
    lines = (out / "modulus.csv").read_text().splitlines()
    assert "delta_hat=" in lines[0]


def test_weave_and_truncation(tmp_path):
    cfg = {"system": {"kind": "full_shift", "k": 2},
           "target": {"bernoulli": 0.7},
           "k_max": 2, "block_length": 12, "budget": 200,
           "min_total_length": 3000, "bound": 0.05}
    code, out = run(tmp_path, "weave", cfg, seed=11)
    assert code == 0
    sched = json.loads((out / "schedule.json").read_text())
    assert sched["total_length"] >= 3000
    assert not sched["truncated"]
    assert (out / "woven.txt").exists()
    _, rows = read_rows(out / "convergence.csv")
    assert float(rows[-1]["D"]) <= 0.05
    cfg["k_max"] = 4
    cfg["length_cap"] = 700
    cfg.pop("min_total_length")
    code2, _ = run(tmp_path, "weave", cfg, seed=11, outdir="trunc")
    assert code2 == 3


def test_shrink_csv(tmp_path):
    cfg = {"system": {"kind": "full_shift", "k": 2},
           "nu": {"bernoulli": 0.8},
           "delta_grid": [0.2, 0.1], "budget": 20}
    code, out = run(tmp_path, "shrink", cfg)
    assert code == 0
    _, rows = read_rows(out / "shrink.csv")
    assert len(rows) == 2
    assert float(rows[0]["sup_hat"]) >= float(rows[1]["sup_hat"])


def test_missing_config_exits_2(tmp_path):
    code = main(["--config", str(tmp_path / "nope.json"),
                 "--seed", "1", "--out", str(tmp_path), "--command", "katok"])
    assert code == 2


def test_missing_key_exits_2(tmp_path):
    code, _ = run(tmp_path, "katok", {"system": {"kind": "full_shift", "k": 2}})
    assert code == 2
