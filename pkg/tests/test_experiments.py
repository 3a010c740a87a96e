import csv
import os

import pytest

import experiments
from experiments import (CriterionResult, SUITES, check_determinism, check_energy, check_gronwall, check_lifts,
                         check_pvar_oracle, check_rde_convergence, check_reflected_oracle, check_remainder_scaling,
                         check_uniqueness, criteria, digest_dir, run_all, write_summary)


def test_lifts(tmp_path):
    result = check_lifts(str(tmp_path), n_paths=5, max_n=64)
    assert result.passed, result.detail
    assert os.path.isfile(tmp_path / "lifts.csv")


def test_pvar_oracle(tmp_path):
    assert check_pvar_oracle(str(tmp_path), n_paths=20).passed


def test_gronwall(tmp_path):
    result = check_gronwall(str(tmp_path), n_families=10)
    assert result.passed, result.detail
    assert result.metric == 0


def test_rde_convergence(tmp_path):
    result = check_rde_convergence(str(tmp_path), oracle_n=2 ** 10)
    assert result.passed, result.detail


def test_remainder_scaling_runs(tmp_path):
    result = check_remainder_scaling(str(tmp_path), n=2 ** 10)
    assert result.passed, result.detail
    assert result.metric >= 1.0
    assert os.path.isfile(tmp_path / "remainder_scaling.csv")


def test_reflected_oracle(tmp_path):
    result = check_reflected_oracle(str(tmp_path))
    assert result.passed, result.detail


def test_uniqueness(tmp_path):
    result = check_uniqueness(str(tmp_path), fine_n=2 ** 11)
    assert result.passed, result.detail


def test_energy(tmp_path):
    result = check_energy(str(tmp_path), n_x=32, T=0.02)
    assert result.passed, result.detail
    assert os.path.isfile(tmp_path / "energy_certificate.txt")


def test_determinism_compares_against_existing_outputs(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "criteria", lambda suite: [lambda out: check_gronwall(out, 3),
                                                               lambda out: check_determinism(out, suite)])
    result = check_determinism(str(tmp_path))
    assert result.passed, result.detail
    assert os.path.isfile(tmp_path / "gronwall_families.csv")

    (tmp_path / "gronwall_families.csv").write_text("tampered\n")
    result = check_determinism(str(tmp_path))
    assert not result.passed
    assert result.metric == 1


def test_run_all_smoke_is_reproducible(tmp_path):
    first = run_all("smoke", str(tmp_path / "a"))
    assert all(r.passed for r in first), [r.detail for r in first if not r.passed]
    second = run_all("smoke", str(tmp_path / "b"))
    assert [r.passed for r in second] == [True] * len(first)
    assert digest_dir(str(tmp_path / "a" / "smoke")) == digest_dir(str(tmp_path / "b" / "smoke"))


def test_run_all_reports_a_wrong_alpha(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "alpha", lambda C, L, kappa: 1.0)
    assert not check_gronwall(str(tmp_path), n_families=3).passed

    monkeypatch.setattr(experiments, "criteria", lambda suite: [lambda out: check_gronwall(out, 3)])
    results = run_all("smoke", str(tmp_path))
    assert [r.passed for r in results] == [False]
    with open(tmp_path / "smoke" / "summary.csv") as f:
        rows = list(csv.reader(f))
    assert rows[1][:2] == ["gronwall_validity", "0"]


def test_digest_dir(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n")
    (tmp_path / "b.csv").write_text("1,2\n")
    digests = digest_dir(str(tmp_path))
    assert list(digests) == ["a.csv", "b.csv"]
    assert digests["a.csv"] == digests["b.csv"]


def test_suites():
    assert set(SUITES) == {"smoke", "acceptance"}
    assert len(criteria("smoke")) == 9
    with pytest.raises(ValueError):
        run_all("nightly")


def test_write_summary(tmp_path):
    filename = str(tmp_path / "summary.csv")
    write_summary([CriterionResult("a", True, 0.5, "fine"), CriterionResult("b", False, 2, "broken")], filename)
    with open(filename) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["criterion", "passed", "metric", "detail"]
    assert rows[1] == ["a", "1", "0.5", "fine"]
    assert rows[2] == ["b", "0", "2", "broken"]
