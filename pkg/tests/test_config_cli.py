"""Experiment config loading, presets, and the CLI pipeline end to end."""

import numpy as np
import pytest

from ridgesense import cli, features, ingest, magnetics
from ridgesense import config as cfgmod

MINI_TOML = """
[experiment]
seed = 17

[[design]]
name = "flat"
kind = "flat"
contact_width_mm = 0.35

[[design]]
name = "ridged-flat"
kind = "flat-ridged"
contact_width_mm = 1.2
ridge_depth_um = 80.0
ridge_width_um = 400.0
ridge_wavelength_um = 600.0

[sweep]
wavelengths_mm = [0.42, 0.54]
amplitudes_um = [25.0, 50.0]
velocities_mm_s = [25.0]
repetitions = 3

[cv]
repeats = 4
"""


class TestConfig:
    def test_preset_grids(self):
        survey = cfgmod.preset("initial-survey")
        assert survey.sweep.wavelengths_mm == (0.06, 0.24, 0.30, 0.60, 5.98)
        assert survey.sweep.amplitudes_um == (10.0, 25.0, 50.0, 100.0)
        wl = cfgmod.preset("wavelength-sweep")
        assert len(wl.sweep.wavelengths_mm) == 10
        assert wl.sweep.velocities_mm_s == (25.0, 50.0, 100.0)
        amp = cfgmod.preset("amplitude-sweep")
        assert amp.sweep.amplitudes_um == (15.0, 20.0, 30.0, 35.0, 40.0, 45.0)
        with pytest.raises(cfgmod.ConfigError):
            cfgmod.preset("bogus")

    def test_default_designs(self):
        names = [d.name for d in cfgmod.default_designs()]
        assert names == ["flat", "ridged-flat", "ridged-sphere"]

    def test_from_toml(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(MINI_TOML)
        cfg = cfgmod.from_toml(path)
        assert cfg.seed == 17
        assert [d.name for d in cfg.designs] == ["flat", "ridged-flat"]
        assert cfg.sweep.wavelengths_mm == (0.42, 0.54)
        assert cfg.cv_repeats == 4

    def test_missing_seed_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[sweep]\npreset = 'initial-survey'\n")
        with pytest.raises(cfgmod.ConfigError, match="seed"):
            cfgmod.from_toml(path)

    def test_bad_toml_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("not [valid toml")
        with pytest.raises(cfgmod.ConfigError):
            cfgmod.from_toml(path)

    def test_hash_tracks_content(self):
        a = cfgmod.preset("initial-survey", seed=1)
        b = cfgmod.preset("initial-survey", seed=1)
        c = cfgmod.preset("initial-survey", seed=2)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()


@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    """One small simulate -> features -> classify pipeline, shared by tests."""
    root = tmp_path_factory.mktemp("mini")
    toml = root / "exp.toml"
    toml.write_text(MINI_TOML)
    out = root / "out"
    assert cli.main(["simulate", "--config", str(toml), "--out", str(out), "--jobs", "4"]) == 0
    assert cli.main(["features", "--out", str(out), "--jobs", "2"]) == 0
    assert cli.main(["classify", "--out", str(out)]) == 0
    return out


class TestCliPipeline:
    def test_simulate_layout_and_provenance(self, mini_run):
        runs = sorted((mini_run / "fields" / "flat").glob("*.csv"))
        assert len(runs) == 12  # 2 wl x 2 amp x 1 vel x 3 reps
        text = runs[0].read_text()
        for key in ("schema=", "config=", "design=flat", "label=wl", "phase_rad="):
            assert f"# {key}" in text or f"# {key}".rstrip("=") in text, key
        assert (mini_run / "config.json").exists()
        assert (mini_run / "trajectories" / "flat").is_dir()

    def test_simulate_resumes_without_force(self, mini_run, capsys):
        snap = (mini_run / "config.json").read_text()
        toml = mini_run.parent / "exp.toml"
        assert cli.main(["simulate", "--config", str(toml), "--out", str(mini_run)]) == 0
        captured = capsys.readouterr()
        assert "24 already present, 0 to compute" in captured.out
        assert (mini_run / "config.json").read_text() == snap

    def test_feature_tables(self, mini_run):
        table = (mini_run / "features" / "ridged-flat.csv").read_text()
        ds = features.dataset_from_csv(table)
        assert len(ds) == 12
        assert sorted(set(ds.labels)) == ["wl0.42", "wl0.54"]
        assert all(m["velocity_mm_s"] == "25.0" for m in ds.meta)

    def test_reports_written(self, mini_run):
        reports = mini_run / "reports"
        acc = (reports / "accuracy.csv").read_text().splitlines()
        assert acc[0] == "design,velocity_mm_s,repeat,fold,accuracy"
        assert len(acc) == 1 + 2 * 20  # 2 designs x (5 folds x 4 repeats)
        stats = (reports / "stats.csv").read_text()
        assert ",anova," in stats and ",tukey," in stats
        assert (reports / "accuracy_box.svg").stat().st_size > 0

    def test_report_command(self, mini_run, capsys):
        assert cli.main(["report", "--out", str(mini_run)]) == 0
        out = capsys.readouterr().out
        assert "flat" in out and "ridged-flat" in out

    def test_classify_velocity_filter_missing(self, mini_run):
        assert cli.main(["classify", "--out", str(mini_run), "--velocity", "99"]) == cli.EXIT_DATA


class TestCliErrors:
    def test_simulate_needs_config_or_preset(self, tmp_path):
        assert cli.main(["simulate", "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_unknown_command_is_usage_error(self, tmp_path):
        assert cli.main(["frobnicate", "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_features_without_simulate(self, tmp_path):
        assert cli.main(["features", "--out", str(tmp_path)]) == cli.EXIT_DATA

    def test_classify_without_features(self, tmp_path):
        assert cli.main(["classify", "--out", str(tmp_path)]) == cli.EXIT_DATA

    def test_features_reports_corrupted_file(self, mini_run, tmp_path, capsys):
        import shutil

        out = tmp_path / "corrupt"
        shutil.copytree(mini_run, out)
        victim = next((out / "fields" / "flat").glob("*.csv"))
        victim.write_text("# design=flat\nnot,a,field,file\n")
        assert cli.main(["features", "--out", str(out)]) == cli.EXIT_DATA
        assert victim.name in capsys.readouterr().err

    def test_classify_single_class_rejected(self, mini_run, tmp_path):
        import shutil

        out = tmp_path / "single"
        shutil.copytree(mini_run, out)
        for table in (out / "features").glob("*.csv"):
            ds = features.dataset_from_csv(table.read_text())
            ds.labels = [ds.labels[0]] * len(ds)
            table.write_text(features.dataset_to_csv(ds))
        assert cli.main(["classify", "--out", str(out)]) == cli.EXIT_DATA


class TestCliIngest:
    def _write_log(self, path, n=3000, velocity=25.0):
        rng = np.random.default_rng(21)
        rate = 1000.0
        quiet = 300
        records = []
        for i in range(n):
            t = i / rate
            contact = i >= quiet
            x = velocity * 1000.0 * max(0.0, t - quiet / rate)
            bz = 67000 + (int(40 * np.sin(2 * np.pi * 30 * t)) if contact else 0)
            records.append(
                ingest.LogRecord(t, x, 0.0, int(rng.integers(-3, 3)), 0, bz)
            )
        path.write_text(ingest.records_to_log(records))

    def test_ingest_happy_and_partial_failure(self, tmp_path, capsys):
        self._write_log(tmp_path / "good.log")
        manifest = tmp_path / "manifest.csv"
        manifest.write_text(
            "path,design,material,velocity_mm_s\n"
            "good.log,ridged-flat,sine,25.0\n"
            "missing.log,flat,alu,25.0\n"
        )
        out = tmp_path / "out"
        assert cli.main(["ingest", "--manifest", str(manifest), "--out", str(out)]) == 0
        err = capsys.readouterr().err
        assert "missing.log" in err
        index = (out / "ingested" / "passes.csv").read_text().splitlines()
        assert len(index) >= 2
        pass_file = out / "ingested" / index[1].split(",")[-1]
        fs = magnetics.field_from_csv(pass_file.read_text())
        assert len(fs.times_s) > 100

    def test_ingest_all_failed(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("path,design,material,velocity_mm_s\nnope.log,flat,alu,25.0\n")
        assert (
            cli.main(["ingest", "--manifest", str(manifest), "--out", str(tmp_path / "o")])
            == cli.EXIT_DATA
        )

    def test_empty_manifest_is_config_error(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("# nothing here\n")
        assert (
            cli.main(["ingest", "--manifest", str(manifest), "--out", str(tmp_path / "o")])
            == cli.EXIT_CONFIG
        )
