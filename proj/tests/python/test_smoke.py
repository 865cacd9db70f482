import math
import os
import pathlib
import subprocess

import numpy as np
import pytest

import synthctl

SOURCE = pathlib.Path(os.environ.get("SYNTHCTL_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
CONFIG = SOURCE / "configs" / "main_spec.json"
CLI = os.environ.get("SYNTHCTL_CLI")


def test_project_simplex_lands_on_simplex():
    w = synthctl.project_simplex(np.array([0.9, 0.4, -0.2]))
    assert w.min() >= 0.0
    assert w.sum() == pytest.approx(1.0)
    assert w == pytest.approx([0.75, 0.25, 0.0])


def test_simplex_solver_recovers_mixture():
    x0 = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 4.0]])
    x1 = x0 @ np.array([0.7, 0.3])
    r = synthctl.solve_simplex_wls(x1, x0, np.ones(3))
    assert r["weights"] == pytest.approx([0.7, 0.3], abs=1e-9)
    assert r["objective"] < 1e-12


def test_haversine_one_degree():
    assert synthctl.haversine_km((0.0, 0.0), (0.0, 1.0)) == pytest.approx(111.19, abs=0.01)


def test_exact_p_value_counts_treated():
    assert synthctl.exact_p_value([1.0, 2.0, 3.0, 4.0], 4.0) == pytest.approx(0.25)
    assert synthctl.exact_p_value([1.0, 2.0, 3.0, 4.0], 1.0) == pytest.approx(1.0)


def test_fingerprint_depends_on_seed():
    a = synthctl.config_fingerprint(str(CONFIG))
    assert a == synthctl.config_fingerprint(str(CONFIG))
    assert a != synthctl.config_fingerprint(str(CONFIG), seed=7)
    assert len(a) == 16


def test_fit_on_fixture():
    fits = synthctl.fit(CONFIG, "abadie_nocov")
    assert len(fits) == 4
    for f in fits:
        w = [d["weight"] for d in f["donors"]]
        assert sum(w) == pytest.approx(1.0, abs=1e-9)
        assert math.isfinite(f["pre_mspe"])


def test_unknown_outcome_raises():
    with pytest.raises(synthctl.SynthctlError, match="UnknownOutcome"):
        synthctl.placebo(CONFIG, "no_such_outcome")


@pytest.mark.skipif(CLI is None, reason="SYNTHCTL_CLI not set")
class TestCliExitCodes:
    def run(self, *args):
        return subprocess.run([CLI, *args], capture_output=True, text=True)

    def test_missing_config_is_usage_error(self):
        assert self.run("fit").returncode == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert self.run("frobnicate", "--config", str(CONFIG)).returncode == 2

    def test_unknown_outcome_is_domain_error(self, tmp_path):
        text = CONFIG.read_text()
        text = text.replace('"../data/', f'"{SOURCE}/data/')
        text = text.replace('"outcomes": ["numeracy_y3"', '"outcomes": ["no_such_outcome"')
        path = tmp_path / "bad.json"
        path.write_text(text)
        r = self.run("fit", "--config", str(path), "--out", str(tmp_path / "out"))
        assert r.returncode == 1
        assert "UnknownOutcome" in r.stdout + r.stderr
