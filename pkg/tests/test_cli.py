import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from resonorm.cli import COMMANDS, main


def run_cli(tmp_path, command, config, name="out"):
    cfg = tmp_path / f"{name}.yaml"
    cfg.write_text(yaml.safe_dump(config))
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_json(path):
    return json.loads(Path(path).read_text())


def test_commands_registered():
    assert set(COMMANDS) == {"resonance", "normalize", "renorm", "reduce", "cycles", "birkhoff", "verify-nt", "density"}


def test_cycles_power_map(tmp_path):
    code, out = run_cli(tmp_path, "cycles", {"map": {"polynomial": [0, 0, 1]}, "n": [1, 8]})
    assert code == 0
    rows = read_csv(out / "cycles.csv")
    assert [int(r["n"]) for r in rows] == list(range(1, 9))
    for r in rows:
        n = int(r["n"])
        assert float(r["estimate_s1"]) == pytest.approx((2 ** n - 1) / 2 ** n * math.log(2), abs=1e-12)
        mantissa = r["estimate_s1"].split("e")[0].replace("-", "").replace(".", "")
        assert len(mantissa) >= 12
    man = read_json(out / "manifest.json")
    assert man["command"] == "cycles" and man["config"]["n"] == [1, 8]
    assert "version" in man and "cycles.csv" in man["outputs"]


def test_resonance_table(tmp_path):
    code, out = run_cli(tmp_path, "resonance", {"spectrum": {"exponents": [-1, -2], "epsilon": 0.01}})
    assert code == 0
    summary = read_json(out / "summary.json")
    assert {"block": 2, "alpha": [2, 0]} in summary["resonant"]
    # nearest non-resonant gap is alpha = (3, 0) in block 2: 1 - 5 eps
    assert summary["zeta"] == pytest.approx(0.95, abs=1e-12)
    rows = read_csv(out / "resonance.csv")
    assert any(r["block"] == "2" and r["alpha"] == "2 0" and r["class"] == "resonant" for r in rows)


def test_malformed_config_names_field(tmp_path):
    code, out = run_cli(tmp_path, "cycles", {"map": {"polynomial": [0, 0, "x"]}, "n": 3})
    assert code != 0
    err = read_json(out / "error.json")
    assert err["field"] == "map.polynomial[2]" and err["type"] == "ConfigError"
    code, out = run_cli(tmp_path, "birkhoff", {"map": {"polynomial": [-1, 0, 1]}}, name="noseed")
    assert code != 0 and read_json(out / "error.json")["field"] == "seed"
    code, out = run_cli(tmp_path, "resonance", {"spectrum": {"exponents": [-1, -2], "epsilon": -1}}, name="neg")
    assert code != 0 and read_json(out / "error.json")["field"] == "spectrum.epsilon"


def test_unreadable_config(tmp_path):
    code = main(["cycles", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert read_json(tmp_path / "o" / "error.json")["type"] == "ConfigError"


def test_birkhoff_byte_identical(tmp_path):
    cfg = {"map": {"polynomial": [-1, 0, 1]}, "seed": 7, "n_samples": 200, "n_transient": 20, "n_average": 10}
    _, a = run_cli(tmp_path, "birkhoff", cfg, name="a")
    _, b = run_cli(tmp_path, "birkhoff", cfg, name="b")
    for name in ("summary.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert read_json(a / "manifest.json")["seed"] == 7


def test_normalize_and_renorm(tmp_path):
    germ = {"dim": 1, "degree": 4, "terms": [[0, [1], 0.5], [0, [2], 1.0]]}
    code, out = run_cli(tmp_path, "normalize", {"cocycle": {"germs": [germ]}, "epsilon": 0.02})
    assert code == 0
    s = read_json(out / "summary.json")
    assert s["residual"] < 1e-8
    assert (out / "V_0.jet").exists() and (out / "R_0.jet").exists()
    N = {"germs": [{"dim": 1, "degree": 4, "terms": [[0, [1], 0.5]]}]}
    code, out = run_cli(tmp_path, "renorm", {"F": {"germs": [germ]}, "N": N, "q": 1, "theta": 0.6}, name="renorm")
    assert code == 0
    assert read_json(out / "summary.json")["converged"]
    assert len(read_csv(out / "deltas.csv")) >= 1


def test_reduce(tmp_path):
    mats = [[[0.5, 0.1], [0.0, 0.2]], [[0.5, 0.05], [0.0, 0.2]]]
    code, out = run_cli(tmp_path, "reduce", {"matrices": mats, "epsilon": 0.05})
    assert code == 0
    s = read_json(out / "summary.json")
    assert s["conjugation_residual"] < 1e-10 and s["regular"]


def test_verify_nt_and_density(tmp_path):
    gold = (1 + math.sqrt(5)) / 2
    code, out = run_cli(tmp_path, "verify-nt", {"map": {"polynomial": [-1, 0, 1]}, "orbit": {"point": [gold], "period": 1}, "n_max": 10})
    assert code == 0
    assert read_json(out / "summary.json")["passed"]
    assert len(read_csv(out / "verify_nt.csv")) == 10
    code, out = run_cli(tmp_path, "density", {"map": {"polynomial": [0, 0, 1]}, "n": [3, 6], "epsilon": 0.1, "sigma_ref": math.log(2)}, name="dens")
    assert code == 0
    assert all(float(r["fraction"]) == 1.0 for r in read_csv(out / "density.csv"))


def test_verify_nt_wrong_point(tmp_path):
    code, out = run_cli(tmp_path, "verify-nt", {"map": {"polynomial": [-1, 0, 1]}, "orbit": {"point": [0.3]}})
    assert code == 2 and read_json(out / "error.json")["field"] == "orbit.point"


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"map": {"product": [[0, 0, 1], [0, 0, 1]]}, "n": 2, "s": 2}))
    res = subprocess.run([sys.executable, "-m", "resonorm.cli", "cycles", "--config", str(cfg), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    rows = read_csv(tmp_path / "o" / "cycles.csv")
    assert float(rows[0]["estimate_s2"]) == pytest.approx(9 / 16 * 2 * math.log(2), abs=1e-12)
