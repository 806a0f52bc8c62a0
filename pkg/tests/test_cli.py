import json
import os

import numpy as np
import pytest

from pointdn.cli import main
from pointdn.config import (ConfigError, apply_overrides, load_config,
                            thread_count, validate)
from pointdn.grid import load_field_csv


def write_config(tmp_path, name="cfg.json", **body):
    body.setdefault("output_dir", str(tmp_path / "out"))
    p = tmp_path / name
    p.write_text(json.dumps(body))
    return p


class TestConfigModule:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            validate({"bogus": 1})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError):
            validate({"newton": {"max_iterations": 3}})

    def test_bad_type_rejected(self):
        with pytest.raises(ConfigError):
            validate({"n_data": "many"})

    def test_polymorphic_section_replaced_whole(self):
        cfg = validate({"q": {"kind": "csv", "path": "q.csv"}})
        assert cfg["q"] == {"kind": "csv", "path": "q.csv"}
        assert "value" not in cfg["q"]

    def test_defaults_filled_in(self):
        cfg = validate({})
        assert cfg["n_data"] == 81
        assert cfg["reconstruction"]["mode"] == "fourier"

    def test_overrides_dotted_and_typed(self):
        cfg = validate({})
        cfg = apply_overrides(cfg, ["n_data=21",
                                    "reconstruction.lambda=3e-13",
                                    "reconstruction.smoothing=identity"])
        assert cfg["n_data"] == 21
        assert cfg["reconstruction"]["lambda"] == 3e-13
        assert cfg["reconstruction"]["smoothing"] == "identity"

    def test_override_whole_json_section(self):
        cfg = validate({})
        cfg = apply_overrides(cfg, ['q={"kind": "constant", "value": 2.5}'])
        assert cfg["q"]["value"] == 2.5

    def test_override_revalidates(self):
        cfg = validate({})
        with pytest.raises(ConfigError):
            apply_overrides(cfg, ["n_data=-4"])

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides(validate({}), ["n_data 21"])

    def test_thread_env_override(self, monkeypatch):
        cfg = validate({"threads": 2})
        assert thread_count(cfg) == 2
        monkeypatch.setenv("POINTDN_THREADS", "5")
        assert thread_count(cfg) == 5

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.json"))


class TestExitCodes:
    def test_forward_ok(self, tmp_path):
        cfg = write_config(tmp_path, n_data=21)
        assert main(["forward", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        for name in ("u.csv", "flux.csv", "summary.csv", "manifest.json"):
            assert (out / name).exists()

    def test_unknown_key_is_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, bogus=1)
        assert main(["forward", "--config", str(cfg)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_pinned_command_mismatch_is_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, command="dn", n_data=21)
        assert main(["forward", "--config", str(cfg)]) == 2

    def test_branch_escape_is_exit_3(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n_data=41,
                           q={"kind": "constant", "value": 20.0},
                           f={"kind": "constant", "value": 0.24},
                           linearization={"delta": 10.0})
        assert main(["forward", "--config", str(cfg)]) == 3
        assert "solver failure" in capsys.readouterr().err
        err = json.loads((tmp_path / "out" / "error.json").read_text())
        assert err["error"] == "BranchEscape"

    def test_failed_check_is_exit_4(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n_data=41, n_recon=41,
                           reconstruction={"kmax_factor": 1,
                                           "check_threshold": 1e-9})
        assert main(["reconstruct", "--config", str(cfg), "--check"]) == 4
        assert "check failed" in capsys.readouterr().err
        err = json.loads((tmp_path / "out" / "error.json").read_text())
        assert err["error"] == "CheckFailure"

    def test_module_validation_error_is_exit_2_with_record(self, tmp_path,
                                                           capsys):
        # measure-data needs a point measure; a uniform one is refused by
        # the handler after the output directory exists, so error.json lands
        cfg = write_config(tmp_path, measure={"kind": "uniform"})
        assert main(["measure-data", "--config", str(cfg)]) == 2
        capsys.readouterr()
        assert (tmp_path / "out" / "error.json").exists()


class TestForwardBehavior:
    def test_zero_load_gives_zero_solution(self, tmp_path):
        cfg = write_config(tmp_path, n_data=21,
                           f={"kind": "constant", "value": 0.0})
        assert main(["forward", "--config", str(cfg)]) == 0
        from pointdn.grid import build_grid
        u = load_field_csv(build_grid(21), tmp_path / "out" / "u.csv")
        assert np.max(np.abs(u.values)) == 0.0

    def test_override_reaches_the_run(self, tmp_path):
        cfg = write_config(tmp_path, n_data=41)
        assert main(["forward", "--config", str(cfg),
                     "--set", "n_data=21"]) == 0
        mani = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert mani["config"]["n_data"] == 21

    def test_manifest_records_versions_and_timings(self, tmp_path):
        cfg = write_config(tmp_path, n_data=21)
        main(["forward", "--config", str(cfg)])
        mani = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert mani["command"] == "forward"
        assert "numpy" in mani["versions"]
        assert "scipy" in mani["versions"]
        assert "total" in mani["timings_s"]
        assert mani["timings_s"]["total"] >= 0


class TestIdentitiesCommand:
    def test_identities_artifact(self, tmp_path):
        cfg = write_config(tmp_path, n_data=41)
        assert main(["verify-identities", "--config", str(cfg)]) == 0
        text = (tmp_path / "out" / "identities.csv").read_text()
        assert "rel_mixed_cascade" in text
        assert "rel_cascade_volume" in text


class TestReconstructDeterminism:
    def _noisy_moment_config(self, tmp_path, subdir):
        return write_config(
            tmp_path, name=f"{subdir}.json", n_data=41, n_recon=41,
            output_dir=str(tmp_path / subdir),
            reconstruction={"mode": "moment", "basis_count": 5,
                            "noise_rel": 1e-3},
            seed=11)

    def test_reruns_are_byte_identical(self, tmp_path):
        c1 = self._noisy_moment_config(tmp_path, "run1")
        c2 = self._noisy_moment_config(tmp_path, "run2")
        assert main(["reconstruct", "--config", str(c1)]) == 0
        assert main(["reconstruct", "--config", str(c2)]) == 0
        for name in ("q_rec.csv", "metrics.csv", "lcurve.csv"):
            b1 = (tmp_path / "run1" / name).read_bytes()
            b2 = (tmp_path / "run2" / name).read_bytes()
            assert b1 == b2, name

    def test_different_seed_changes_noisy_data(self, tmp_path):
        c1 = self._noisy_moment_config(tmp_path, "seed_a")
        c2 = self._noisy_moment_config(tmp_path, "seed_b")
        assert main(["reconstruct", "--config", str(c1)]) == 0
        assert main(["reconstruct", "--config", str(c2),
                     "--set", "seed=12"]) == 0
        b1 = (tmp_path / "seed_a" / "q_rec.csv").read_bytes()
        b2 = (tmp_path / "seed_b" / "q_rec.csv").read_bytes()
        assert b1 != b2


class TestRungeCommand:
    def test_demo_artifacts_and_decrease(self, tmp_path):
        cfg = write_config(tmp_path, n_data=81,
                           runge={"counts": [8, 16]})
        assert main(["runge-demo", "--config", str(cfg)]) == 0
        rows = (tmp_path / "out" / "runge.csv").read_text().strip().splitlines()
        assert rows[0] == "n_sources,residual,condition"
        r8 = float(rows[1].split(",")[1])
        r16 = float(rows[2].split(",")[1])
        assert r16 < r8
        assert (tmp_path / "out" / "runge_negative.csv").exists()
