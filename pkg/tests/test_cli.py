import os

import numpy as np
import pytest

from cli import ConfigError, ExperimentConfig, main, parse_config, read_config_file
from data import write_control_csv, write_path_csv, write_rough_path_csv, write_table_csv
from rough_paths import SampledPath, brownian_sample_lift
from variation import control_from_function


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_parse_config_defaults():
    config = parse_config(["solve-rde"])
    assert isinstance(config, ExperimentConfig)
    assert config.command == "solve-rde"
    assert config["p"] == 2.5 and config["field"] == "sin"
    assert config.seed == 0 and config.out_dir == "out" and config.logdir is None


def test_config_file_and_flag_precedence(tmp_path):
    cfg = _write(tmp_path / "run.cfg", "# solver settings\np = 2.8\nfield = linear  # builtin\n\nseed = 3\n")
    config = parse_config(["solve-rde", "--config", cfg, "--p", "2.2"])
    assert config["p"] == 2.2
    assert config["field"] == "linear"
    assert config.seed == 3

    assert parse_config(["solve-rde", "--config", cfg])["p"] == 2.8


def test_p_out_of_range_is_rejected(tmp_path):
    cfg = _write(tmp_path / "run.cfg", "p = 3.5\n")
    with pytest.raises(ConfigError, match="outside"):
        parse_config(["solve-rde", "--config", cfg])
    with pytest.raises(ConfigError, match="outside"):
        parse_config(["lift", "--p", "1.9"])


def test_unknown_key_lists_valid_keys(tmp_path):
    cfg = _write(tmp_path / "run.cfg", "q = 1\n")
    with pytest.raises(ConfigError, match="valid keys") as info:
        parse_config(["pvar", "--config", cfg, "--input", "x.csv"])
    assert "two_index" in str(info.value)


def test_type_and_missing_key_errors(tmp_path):
    with pytest.raises(ConfigError, match="expected int"):
        parse_config(["solve-rde", "--n", "many"])
    with pytest.raises(ConfigError, match="missing required key g"):
        parse_config(["gronwall-check", "--omega1", "w.csv", "--C", "1", "--L", "1"])
    with pytest.raises(ConfigError, match="not one of"):
        parse_config(["solve-reflected", "--scheme", "implicit"])
    with pytest.raises(ConfigError):
        read_config_file(_write(tmp_path / "bad.cfg", "p 2.5\n"))


def test_boolean_keys(tmp_path):
    cfg = _write(tmp_path / "run.cfg", "two_index = yes\ninput = x.csv\n")
    assert parse_config(["pvar", "--config", cfg])["two_index"] is True
    assert parse_config(["pvar", "--input", "x.csv", "--two-index"])["two_index"] is True
    assert parse_config(["pvar", "--input", "x.csv"])["two_index"] is False


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        parse_config(["integrate"])


def test_usage_errors_exit_with_2(tmp_path):
    assert main(["solve-rde", "--p", "3.5"]) == 2
    assert main(["solve-heat", "--nx", "16", "--dt", "0.01", "--out_dir", str(tmp_path)]) == 2
    assert main(["solve-rde", "--driver", "smooth:cubic", "--out_dir", str(tmp_path)]) == 2


def test_lift_is_deterministic(tmp_path):
    outputs = []
    for name in ["a", "b"]:
        out = str(tmp_path / name)
        assert main(["lift", "--driver", "brownian:0,64,2", "--out_dir", out]) == 0
        with open(os.path.join(out, "lift.csv"), "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]


def test_pvar(tmp_path, capsys):
    path = str(tmp_path / "hat.csv")
    write_path_csv(SampledPath([0.0, 0.5, 1.0], [0.0, 1.0, 0.0]), path)
    dump = str(tmp_path / "omega.csv")
    assert main(["pvar", "--input", path, "--p", "2", "--dump_control", dump]) == 0
    assert "pvar=1.4142135623730951" in capsys.readouterr().out
    assert os.path.isfile(dump)

    assert main(["pvar", "--input", path, "--p", "2", "--from", "0", "--to", "0.5"]) == 0
    assert "pvar=1\n" in capsys.readouterr().out


def test_pvar_two_index(tmp_path, capsys):
    x, rp = brownian_sample_lift(0, 4, 1, 1.0, 2.5)
    lift = str(tmp_path / "lift.csv")
    write_rough_path_csv(rp, lift)
    assert main(["pvar", "--input", lift, "--two-index", "--level", "1", "--p", "1"]) == 0
    value = float(capsys.readouterr().out.strip().split("=")[1])
    assert value == pytest.approx(np.sum(np.abs(np.diff(x.values[:, 0]))))

    assert main(["pvar", "--input", lift, "--two-index", "--level", "2", "--p", "1"]) == 0


def test_gronwall_check(tmp_path, capsys):
    grid = np.linspace(0.0, 1.0, 11)
    omega = str(tmp_path / "omega1.csv")
    write_control_csv(control_from_function(grid, lambda s, t: t - s), omega)

    g_ok = str(tmp_path / "g_ok.csv")
    write_table_csv(g_ok, ["t", "G"], np.column_stack([grid, np.ones(11)]))
    assert main(["gronwall-check", "--g", g_ok, "--omega1", omega, "--C", "1", "--L", "1"]) == 0
    out = capsys.readouterr().out
    assert "verdict: PASS" in out and '"alpha"' in out

    G = np.ones(11)
    G[-1] = 10.0
    g_bad = str(tmp_path / "g_bad.csv")
    write_table_csv(g_bad, ["t", "G"], np.column_stack([grid, G]))
    assert main(["gronwall-check", "--g", g_bad, "--omega1", omega, "--omega2", "zero", "--C", "1", "--L", "1"]) == 1
    assert "verdict: FAIL" in capsys.readouterr().out


def test_solve_rde(tmp_path):
    out = str(tmp_path)
    assert main(["solve-rde", "--driver", "line:1", "--field", "linear", "--y0", "1.0", "--n", "64",
                 "--mesh", "0.125", "--out_dir", out]) == 0
    rows = np.loadtxt(os.path.join(out, "rde_trajectory.csv"), delimiter=",", skiprows=1)
    assert rows.shape == (9, 2)
    assert rows[-1, 1] == pytest.approx(np.e, rel=1e-2)
    assert os.path.isfile(os.path.join(out, "rde_scaling.csv"))


def test_solve_reflected(tmp_path):
    out = str(tmp_path)
    assert main(["solve-reflected", "--driver", "line:-2", "--field", "constant", "--y0", "1", "--n", "64",
                 "--out_dir", out]) == 0
    with open(os.path.join(out, "reflected_trajectory.csv")) as f:
        assert f.readline().strip() == "t,y,m"
    scaling = np.loadtxt(os.path.join(out, "reflected_scaling.csv"), delimiter=",", skiprows=1)
    assert scaling.shape == (6, 2)
    assert np.all(np.isfinite(scaling[:, 1]))
    assert main(["solve-reflected", "--driver", "line:-2", "--field", "constant", "--scheme", "penalized",
                 "--epsilon", "0.2", "--out_dir", out]) == 0


def test_uniqueness_command(tmp_path):
    out = str(tmp_path)
    assert main(["uniqueness-probe", "--driver", "line:-2", "--field", "constant", "--y0", "1", "--n", "2048",
                 "--out_dir", out]) == 0
    rows = np.loadtxt(os.path.join(out, "uniqueness.csv"), delimiter=",", skiprows=1)
    assert rows.shape == (5, 2)


def test_solve_heat_and_energy_check(tmp_path):
    out = str(tmp_path)
    assert main(["solve-heat", "--nx", "16", "--T", "0.005", "--snapshot_every", "2", "--out_dir", out]) == 0
    energy = np.loadtxt(os.path.join(out, "heat_energy.csv"), delimiter=",", skiprows=1)
    assert energy.shape == (6, 2)
    snapshots = np.loadtxt(os.path.join(out, "heat_snapshots.csv"), delimiter=",", skiprows=1)
    assert snapshots.shape == (4, 17)
    scaling = np.loadtxt(os.path.join(out, "heat_scaling.csv"), delimiter=",", skiprows=1, ndmin=2)
    assert scaling.shape == (2, 3)
    np.testing.assert_array_equal(scaling[:, 0], [1, 2])

    assert main(["energy-check", "--nx", "16", "--T", "0.01", "--V", "0", "--u0", "bump", "--out_dir", out]) == 0
    assert os.path.isfile(os.path.join(out, "energy_certificate.txt"))


def test_solve_heat_takes_components_from_velocity_file(tmp_path):
    x = np.arange(8) / 8
    velocity = str(tmp_path / "v.csv")
    write_table_csv(velocity, ["x", "V_1", "V_2"], np.column_stack([x, np.full(8, 0.5), np.sin(2 * np.pi * x)]))
    out = str(tmp_path / "out")
    assert main(["solve-heat", "--nx", "8", "--T", "0.01", "--V", velocity, "--out_dir", out]) == 0
    assert os.path.isfile(os.path.join(out, "heat_scaling.csv"))

    # an explicitly one-dimensional driver does not match two velocity components
    assert main(["solve-heat", "--nx", "8", "--T", "0.01", "--V", velocity, "--driver", "brownian:3,4,1",
                 "--out_dir", out]) == 2
