import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from ttkl.cli import main, read_table, write_table
from ttkl.pipeline import config_from_dict, run
from ttkl.serialize import FormatError, load_expansion, save_expansion
from ttkl.validate import sample_points

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[geometry]
preset = "unit_interval"

[kernel2]
type = "spectral_series"
terms = 6

[kernel3]
type = "spectral_series"
terms = 6

[cross2]
tol = 1e-8
mk = 100

[cross3]
tol = 1e-8
mk = 100

[test]
N = 200
seed = 1

[output]
grid = 11
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


@pytest.fixture(scope="module")
def saddle_expansion():
    tree = {
        "geometry": {"preset": "bilinear_saddle"},
        "kernel2": {"type": "squared_exponential"},
        "kernel3": {"type": "triple_exponential"},
        "cross2": {"tol": 1e-4, "mk": 200, "seed": 1},
        "cross3": {"tol": 1e-3, "mk": 200, "seed": 1},
        "test": {"N": 200, "N3": 200, "tol_g2": 1e-2, "tol_g3": 5e-2},
    }
    return run(config_from_dict(tree))[0]


def test_run_writes_all_outputs(small_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small_config), "--out-dir", str(out), "--json-report"]) == 0
    names = {p.name for p in out.iterdir()}
    expected = {"expansion.ttkl", "report.yaml", "report.json", "eigenvalues_f.csv", "modes_f.csv",
                "errdm_order2.csv", "errdm_order3.csv", "latent_covariance.csv"}
    assert expected <= names
    report = yaml.safe_load((out / "report.yaml").read_text())
    assert report == json.loads((out / "report.json").read_text())
    assert {e["metric"] for e in report["errors"]} == {"eps_g2", "eps_g3", "eps_gf2", "eps_gf3"}
    header, table = read_table(out / "modes_f.csv")
    assert table.shape == (11, 7) and header[0] == "coordinate"
    assert "eps_gf3" in capsys.readouterr().out


def test_interval_covariance_via_cli(tmp_path):
    out = tmp_path / "ex1"
    assert main(["run", str(CONFIGS / "example1.toml"), "--order", "2", "--out-dir", str(out)]) == 0
    _, eig = read_table(out / "eigenvalues_f.csv")
    assert eig[0, 1] == pytest.approx(0.405285, abs=1e-6)
    assert eig.shape[0] == 80
    assert load_expansion(out / "expansion.ttkl").cum3 is None


def test_covariance_only_config_exits_cleanly(tmp_path):
    out = tmp_path / "cov"
    assert main(["run", "--config", str(CONFIGS / "example2_order2.toml"), "--out-dir", str(out)]) == 0
    assert load_expansion(out / "expansion.ttkl").cum3 is None
    assert not (out / "errdm_order3.csv").exists()


def test_verify_reproduces_stored_errors(small_config, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(small_config), "--out-dir", str(out)])
    stored = load_expansion(out / "expansion.ttkl").metadata["errors"]
    capsys.readouterr()
    vout = tmp_path / "verify"
    assert main(["verify", str(out / "expansion.ttkl"), str(small_config), "--out-dir", str(vout)]) == 0
    data = yaml.safe_load((vout / "verify.yaml").read_text())
    for e in data["errors"]:
        assert abs(e["value"] - stored[e["metric"]]) <= 1e-12 * max(1.0, stored[e["metric"]])


def test_sample_modes(small_config, tmp_path):
    out = tmp_path / "out"
    main(["run", str(small_config), "--out-dir", str(out)])
    sout = tmp_path / "samples"
    assert main(["sample-modes", str(out / "expansion.ttkl"), "--grid", "5", "--out-dir", str(sout)]) == 0
    _, table = read_table(sout / "modes_f.csv")
    assert table.shape == (5, 7)
    x = table[:, 0]
    # six-term series: the first mode is sqrt(2) sin(pi x / 2)
    assert np.allclose(table[:, 1], np.sqrt(2) * np.sin(np.pi * x / 2), atol=1e-8)


def test_oracle(small_config, tmp_path):
    out = tmp_path / "oracle"
    assert main(["oracle", str(small_config), "--grid", "60", "--count", "3", "--out-dir", str(out)]) == 0
    _, eig = read_table(out / "oracle_eigenvalues.csv")
    assert eig[:, 1] == pytest.approx(4 / (np.pi**2 * np.array([1, 9, 25])), rel=1e-10)


def test_exit_codes(small_config, tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[geometry]\npreset = "moebius"\n[kernel2]\ntype = "squared_exponential"\n')
    assert main(["run", str(bad), "--out-dir", str(tmp_path / "x")]) == 3
    assert main(["run", "--out-dir", str(tmp_path / "x")]) == 3
    impossible = tmp_path / "impossible.toml"
    impossible.write_text(SMALL.replace("seed = 1", "seed = 1\ntol_g2 = 1e-300\nmax_retries = 0"))
    assert main(["run", str(impossible), "--out-dir", str(tmp_path / "y")]) == 4
    assert "tt2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["run", "--order", "5"])
    assert info.value.code == 2
    assert main(["sample-modes", str(tmp_path / "missing.ttkl")]) == 1


def test_console_entry_point(small_config, tmp_path):
    out = tmp_path / "sub"
    proc = subprocess.run([sys.executable, "-m", "ttkl", "run", str(small_config), "--order", "2",
                           "--out-dir", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "expansion.ttkl").exists()


def test_table_round_trip(tmp_path):
    cols = [np.arange(4), np.random.default_rng(0).standard_normal(4)]
    write_table(tmp_path / "t.csv", ["a", "b"], cols)
    header, table = read_table(tmp_path / "t.csv")
    assert header == ["a", "b"]
    assert np.array_equal(table[:, 1], cols[1])


def test_expansion_round_trip(saddle_expansion, tmp_path):
    path = tmp_path / "saddle.ttkl"
    save_expansion(saddle_expansion, path)
    back = load_expansion(path)
    u = sample_points(6, 100, 3)
    x, y, z = u[:, :2], u[:, 2:4], u[:, 4:]
    for a, b in ((saddle_expansion.covariance(x, y), back.covariance(x, y)),
                 (saddle_expansion.cumulant3(x, y, z), back.cumulant3(x, y, z))):
        assert np.max(np.abs(a - b)) <= 1e-14 * np.abs(a).max()
    assert np.allclose(back.geometry.map(x), saddle_expansion.geometry.map(x), atol=0)
    assert back.metadata["mode_counts"] == list(saddle_expansion.modes.counts)


def test_corrupt_container_rejected(tmp_path):
    path = tmp_path / "junk.ttkl"
    path.write_bytes(b"not an expansion at all")
    with pytest.raises(FormatError):
        load_expansion(path)
