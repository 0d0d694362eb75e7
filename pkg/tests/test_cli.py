import json
import math

import numpy as np
import pytest
import yaml

from kraichnan import cli, csvio
from kraichnan.config import Experiment, RunConfig, apply_override
from kraichnan.errors import ConfigError


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "fk-solve", "sampling": {"n_samples": 10}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "fk-solve", "sampling": {"seed": 1}, "bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "fk-solve", "sampling": {"seed": 1}, "options": {"horizon": 3}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "nope", "sampling": {"seed": 1}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "fk-solve", "sampling": {"seed": 1}, "kernel": {"family": "x", "rho0": 1}})
    cfg = RunConfig.from_dict({"experiment": "dim-estimate", "sampling": {"seed": 5}})
    assert cfg.experiment is Experiment.DIM_ESTIMATE and cfg.options["set"] == "level"


def test_digest_ignores_output_only():
    raw = {"experiment": "walsh-check", "sampling": {"seed": 3}}
    a = RunConfig.from_dict(dict(raw, output="a"))
    b = RunConfig.from_dict(dict(raw, output="b"))
    c = RunConfig.from_dict({"experiment": "walsh-check", "sampling": {"seed": 4}})
    assert a.digest() == b.digest() != c.digest()


def test_apply_override():
    raw = {}
    apply_override(raw, "options.horizon=1000")
    apply_override(raw, "kernel={family: constant, rho0: 2}")
    assert raw == {"options": {"horizon": 1000}, "kernel": {"family": "constant", "rho0": 2}}
    with pytest.raises(ConfigError):
        apply_override(raw, "novalue")


def test_csv_formatting(tmp_path):
    assert csvio.fmt(0.1) == "0.10000000000000001"
    assert csvio.fmt(True) == "true" and csvio.fmt(float("nan")) == "nan" and csvio.fmt(np.int64(3)) == "3"
    xs, ys = np.array([0.0, 1.0]), np.array([-1.0, 0.0, 1.0])
    vals = np.arange(6.0).reshape(2, 3)
    csvio.write_grid_field(tmp_path / "f.csv", xs, ys, vals, vals / 10, {"t": 0.5})
    meta, rx, ry, rv, re = csvio.read_grid_field(tmp_path / "f.csv")
    assert meta["nx"] == "2" and meta["t"] == "0.5"
    assert np.array_equal(rx, xs) and np.array_equal(ry, ys) and np.array_equal(rv, vals)


def test_gamma_trajectory_with_twin(tmp_path):
    rc = run(tmp_path, "gamma-trajectory", "--seed", "1", "--set", "options.horizon=1000",
             "--set", "options.twin_ratio=0.14", "--set", "params.nu=1e-7")
    assert rc == 0
    lines = (tmp_path / "gamma_trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,t_gamma,t_gamma_twin" and len(lines) == 1001
    data = np.loadtxt(tmp_path / "gamma_trajectory.csv", delimiter=",", skiprows=1)
    nu = 1e-7
    assert np.all(data[:, 1] <= 1 / (4 * math.pi * nu) * (1 + 1e-12))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 1 and len(manifest["config_sha256"]) == 64
    assert manifest["outputs"] == ["gamma_trajectory.csv"]


@pytest.mark.parametrize("args,files", [
    (["fk-solve", "--samples", "500"], ["trajectory.csv", "field.csv"]),
    (["fk-solve", "--samples", "200", "--set", "options.mode=conditional",
      "--set", "grid={x_min: -10, x_max: 10, n_x: 81, n_t: 32}"], ["trajectory.csv", "field.csv"]),
    (["spectral-solve", "--samples", "3"], ["field.csv"]),
    (["wz-converge", "--samples", "20", "--set", "options.n_noise=3", "--set", "options.levels=2",
      "--set", "params={nu: 0.5}", "--set", "grid={x_min: -30, x_max: 30, n_x: 241, T: 1.5, n_t: 384}"],
     ["convergence.csv"]),
    (["dim-estimate", "--set", "options.horizon=20000", "--set", "options.replicates=2"], ["dimension.csv"]),
    (["dim-estimate", "--set", "options.set=gamma-exceedance", "--set", "options.K=10",
      "--set", "options.horizon=20000", "--set", "options.replicates=1"], ["dimension.csv"]),
    (["nu-limit", "--set", "options.n_bridges=200"], ["nu_table.csv"]),
    (["nu-limit", "--set", "options.table=dichotomy", "--set", "options.n_bridges=0"], ["nu_table.csv"]),
    (["walsh-check", "--samples", "200"], ["walsh.csv"]),
])
def test_subcommands_write_outputs(tmp_path, args, files):
    assert run(tmp_path, *args, "--seed", "3") == 0
    for f in files + ["manifest.json"]:
        assert (tmp_path / f).stat().st_size > 0


def test_dimension_summary_row(tmp_path):
    run(tmp_path, "dim-estimate", "--seed", "2", "--set", "options.set=cone", "--set", "options.horizon=20000",
        "--set", "options.replicates=4")
    last = (tmp_path / "dimension.csv").read_text().splitlines()[-1]
    assert last.startswith("summary,slope=") and "target=1" in last


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "fk-solve") == 2  # seed missing
    assert run(tmp_path, "fk-solve", "--seed", "1", "--set", "options.bogus=1") == 2
    assert run(tmp_path, "fk-solve", "--seed", "1", "--set", "params={nu1: 0.2, nu2: 0.3}") == 2
    assert run(tmp_path, "gamma-trajectory", "--seed", "1", "--set", "kernel={family: gaussian_bell, rho0: 1}") == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: [unclosed\n")
    assert run(tmp_path, "fk-solve", "--config", str(bad)) == 2
    other = tmp_path / "other.yaml"
    other.write_text(yaml.safe_dump({"experiment": "walsh-check", "sampling": {"seed": 1}}))
    assert run(tmp_path, "fk-solve", "--config", str(other)) == 2
    assert "error" in capsys.readouterr().err


def test_self_test_failure_exit_code(tmp_path, monkeypatch):
    from kraichnan import acceptance
    failing = acceptance.Check(1, "forced", 1.0, 0.0, 0.0, False)
    monkeypatch.setattr(acceptance, "run", lambda sel, seed, echo=None: ([failing], {}))
    assert run(tmp_path, "self-test", "--seed", "1", "--criteria", "1") == 4
    assert run(tmp_path, "self-test", "--seed", "1", "--criteria", "99") == 2


def test_config_file_and_env_output(tmp_path, monkeypatch):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"experiment": "walsh-check", "sampling": {"seed": 4, "n_samples": 50},
                                   "output": str(tmp_path / "from_config")}))
    assert cli.main(["walsh-check", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "walsh.csv").exists()
    monkeypatch.setenv("KRAICHNAN_OUT", str(tmp_path / "from_env"))
    assert cli.main(["walsh-check", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "walsh.csv").exists()
    assert cli.main(["walsh-check", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "walsh.csv").exists()


def test_outputs_identical_across_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["fk-solve", "--seed", "9", "--samples", "5000", "--set", "options.mode=conditional",
              "--set", "grid={x_min: -10, x_max: 10, n_x: 81, n_t: 32}"]
    assert cli.main(common + ["--threads", "1", "--out", str(a)]) == 0
    assert cli.main(common + ["--threads", "8", "--out", str(b)]) == 0
    for name in ("trajectory.csv", "field.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_numerical_error_exit_code(tmp_path, monkeypatch):
    from kraichnan.config import Experiment
    from kraichnan.errors import TruncationError

    def boom(cfg, out):
        raise TruncationError("tail bound too large")

    monkeypatch.setitem(cli.RUNNERS, Experiment.SPECTRAL_SOLVE, boom)
    assert run(tmp_path, "spectral-solve", "--seed", "1") == 3
