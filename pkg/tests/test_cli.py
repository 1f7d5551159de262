"""Runner: validation diagnostics, determinism, exit codes, file headers."""

import json
import math
import os

import pytest

from gbbmlab.cli import (
    ExperimentConfig,
    build_config,
    main,
    run,
    smooth_profile,
    validate,
)


def cfg(**kw):
    return ExperimentConfig(**kw)


class TestValidate:
    def test_gamma_requirement(self):
        diag = validate(cfg(experiment="conservation", gamma=0.9))
        assert any("gamma" in d and "> 1" in d for d in diag)

    def test_singular_window(self):
        diag = validate(cfg(experiment="singular-demo", gamma=2.0, s=1))
        assert any("(4/3, 3/2)" in d for d in diag)

    def test_regularity_coupling(self):
        diag = validate(cfg(experiment="conservation", gamma=2.5, s=1))
        assert any("s >= gamma/2" in d for d in diag)

    def test_valid_config_is_clean(self):
        assert validate(cfg(experiment="conservation", gamma=2.0, s=1,
                            n_modes=16, t=1.0, dt=1e-3)) == []

    def test_every_offending_field_listed(self):
        diag = validate(cfg(experiment="transport", gamma=0.5, dt=-1.0,
                            samples=10, r=-2.0))
        joined = "\n".join(diag)
        for token in ("gamma", "dt", "samples", "r"):
            assert token in joined

    def test_run_refuses_invalid(self):
        with pytest.raises(ValueError):
            run(cfg(experiment="conservation", gamma=0.5))


class TestRun:
    def test_transport_t_zero_identical_estimates(self, tmp_path):
        bundle = run(cfg(experiment="transport", gamma=2.0, s=1, n_modes=4,
                         t=0.0, samples=2000, master_seed=5, r=20.0,
                         out_dir=str(tmp_path)))
        assert bundle.status
        assert bundle.summary["direct"] == bundle.summary["weighted"]

    def test_conservation_pass(self, tmp_path):
        bundle = run(cfg(experiment="conservation", gamma=2.0, s=1, n_modes=16,
                         t=1.0, dt=1e-3, stride=100, out_dir=str(tmp_path)))
        assert bundle.status
        assert bundle.summary["max_rel_drift"] < 1e-6
        assert os.path.exists(os.path.join(tmp_path, "conservation.csv"))

    def test_singular_demo_pass(self, tmp_path):
        bundle = run(cfg(experiment="singular-demo", gamma=1.4, s=1, t=1.0,
                         out_dir=str(tmp_path)))
        assert bundle.status
        assert bundle.summary["fitted_exponent"] == pytest.approx(0.2, abs=0.05)

    def test_determinism_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        config = cfg(experiment="liouville", gamma=1.4, s=1, n_modes=4, t=0.5,
                     dt=2e-3, master_seed=3)
        import dataclasses

        run(dataclasses.replace(config, out_dir=str(out1)))
        run(dataclasses.replace(config, out_dir=str(out2)))
        a = (out1 / "liouville.json").read_bytes()
        b = (out2 / "liouville.json").read_bytes()
        assert a == b

    def test_header_blocks(self, tmp_path):
        bundle = run(cfg(experiment="conservation", gamma=2.0, s=1, n_modes=8,
                         t=0.1, dt=1e-2, out_dir=str(tmp_path)))
        text = (tmp_path / "conservation.csv").read_text()
        assert text.startswith("# config_hash: " + bundle.config_hash)
        assert "# version:" in text
        # JSON artifacts carry the same meta block
        b2 = run(cfg(experiment="liouville", gamma=2.0, s=1, n_modes=4, t=0.2,
                     dt=1e-2, out_dir=str(tmp_path)))
        doc = json.loads((tmp_path / "liouville.json").read_text())
        assert doc["meta"]["config_hash"] == b2.config_hash
        assert doc["meta"]["tool"] == "gbbmlab"

    def test_smooth_profile_shape(self):
        u = smooth_profile(8)
        assert u.n_max == 8 and abs(u.coeff(1)) < 1.0

    def test_simulate_writes_trajectory(self, tmp_path):
        bundle = run(cfg(experiment="simulate", gamma=2.0, s=1, n_modes=8,
                         t=0.2, dt=1e-2, stride=5, out_dir=str(tmp_path)))
        assert bundle.status
        text = (tmp_path / "trajectory.csv").read_text()
        assert "t,conserved,energy,n1,re1,im1" in text
        doc = json.loads((tmp_path / "trajectory.json").read_text())
        assert doc["trajectory"]["n_modes"] == 8
        assert doc["meta"]["config_hash"] == bundle.config_hash

    def test_singular_demo_two_column_csv(self, tmp_path):
        run(cfg(experiment="singular-demo", gamma=1.4, s=1, t=1.0,
                out_dir=str(tmp_path)))
        body = [l for l in (tmp_path / "singular_demo.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        assert body[0] == "N,partial_sum"
        assert all(len(l.split(",")) == 2 for l in body[1:])
        assert (tmp_path / "singular_pairing.csv").exists()

    def test_energy_csv_columns(self, tmp_path):
        bundle = run(cfg(experiment="energy", gamma=1.5, s=2, n_modes=32,
                         samples=100, out_dir=str(tmp_path)))
        assert bundle.status
        body = [l for l in (tmp_path / "energy_ratios.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        assert body[0] == "sample_id,lhs,rhs,ratio"

    def test_dk_diagnostic_trend(self, tmp_path):
        bundle = run(cfg(experiment="dk-diagnostic", gamma=2.5, s=1, n_modes=48,
                         t=0.2, dt=5e-3, basis_list=(8, 16, 32),
                         expect_trend="shrinking", out_dir=str(tmp_path)))
        assert bundle.status
        assert bundle.summary["trend"] == "shrinking"

    def test_dk_diagnostic_trend_mismatch_fails(self, tmp_path):
        bundle = run(cfg(experiment="dk-diagnostic", gamma=2.5, s=1, n_modes=48,
                         t=0.2, dt=5e-3, basis_list=(8, 16, 32),
                         expect_trend="nonshrinking", out_dir=str(tmp_path)))
        assert not bundle.status

    def test_large_deviation_run(self, tmp_path):
        bundle = run(cfg(experiment="large-deviation", gamma=1.5, s=2,
                         n_modes=32, samples=10_000, p_list=(2.0, 4.0, 8.0),
                         eps=0.05, out_dir=str(tmp_path)))
        assert bundle.status
        body = [l for l in (tmp_path / "large_deviation.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        assert body[0] == "p,lp_norm" and len(body) == 4


class TestMain:
    def test_validation_exit_code(self, capsys):
        assert main(["singular-demo", "--gamma", "2.0"]) == 2
        assert "4/3" in capsys.readouterr().err

    def test_pass_exit_code(self, tmp_path, capsys):
        code = main(["conservation", "--gamma", "2.0", "--s", "1",
                     "--n-modes", "8", "--t", "0.2", "--dt", "1e-2",
                     "--stride", "10", "--out-dir", str(tmp_path)])
        assert code == 0
        assert "pass" in capsys.readouterr().out

    def test_tolerance_failure_exit_code(self, tmp_path):
        # a drift tolerance of zero cannot be met
        code = main(["conservation", "--gamma", "2.0", "--s", "1",
                     "--n-modes", "8", "--t", "0.2", "--dt", "1e-2",
                     "--stride", "10", "--drift-tol", "0",
                     "--out-dir", str(tmp_path)])
        assert code == 1

    def test_toml_config_with_flag_override(self, tmp_path):
        conf = tmp_path / "run.toml"
        conf.write_text(
            'gamma = 1.45\ns = 1\nt = 1.0\nn_list = [64, 128, 256, 512]\n')
        code = main(["singular-demo", "--config", str(conf),
                     "--t", "2.0", "--out-dir", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "singular_demo.json").read_text())
        # flag t=2.0 wins over the file's t=1.0; gamma comes from the file
        assert doc["results"]["target_exponent"] == pytest.approx(3.0 - 2.0 * 1.45)

    def test_unknown_toml_key_rejected(self, tmp_path):
        conf = tmp_path / "run.toml"
        conf.write_text("gamma = 1.4\nbogus_knob = 3\n")
        assert main(["singular-demo", "--config", str(conf),
                     "--out-dir", str(tmp_path)]) == 2

    def test_out_dir_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GBBMLAB_OUT_DIR", str(tmp_path))
        code = main(["singular-demo", "--gamma", "1.4", "--s", "1", "--t", "1.0"])
        assert code == 0
        assert (tmp_path / "singular_demo.csv").exists()
