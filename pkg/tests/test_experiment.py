import json

import pytest

from ccafuse.errors import ConfigError
from ccafuse.experiment import (
    ExperimentConfig,
    build_datasets,
    bundled_config_path,
    directional_summary,
    load_config,
    run_experiment,
    run_sweep,
)
from ccafuse.io import save_array


def tiny(**over):
    d = {
        "name": "tiny",
        "seed": 1,
        "dataset": {"kind": "synthetic", "n": 150, "n_train": 100, "latent_dim": 2, "n_classes": 3, "dim_a": 6, "dim_b": 5},
        "net": {"hidden": [4], "classifier_hidden": 5},
        "schedule": {"epochs": 3, "cca_first_m": 2, "cca_freq_t": 1, "k": 2, "batch_size": 25},
        "modes": ["BASELINE", "ACCAR"],
        "corruption": {"view": "B", "sigma": 1.0},
        "sweep_seeds": [0, 1],
    }
    d.update(over)
    return d


class TestValidation:
    def test_resolves_defaults(self):
        cfg = ExperimentConfig.from_dict(tiny())
        assert cfg.schedule["learning_rate"] == 0.05
        assert cfg.corruption["seed_offset"] == 1000
        assert cfg.net["channels"] == 4

    def test_missing_seed(self):
        d = tiny()
        del d["seed"]
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(d)
        assert info.value.field == "seed"

    @pytest.mark.parametrize(
        "over,field",
        [
            ({"seed": -1}, "seed"),
            ({"seed": True}, "seed"),
            ({"colour": 1}, "colour"),
            ({"modes": []}, "modes"),
            ({"modes": ["ADAM"]}, "modes[0]"),
            ({"modes": ["ACCAR_2D"]}, "modes[0]"),
            ({"modes": ["BASELINE", "CCA_LAYER"], "dataset": {"kind": "synthetic_2d"}}, "modes[1]"),
            ({"corruption": {"view": "C"}}, "corruption.view"),
            ({"corruption": {"sigma": -1.0}}, "corruption.sigma"),
            ({"sweep_seeds": [1, "x"]}, "sweep_seeds"),
            ({"name": "a/b"}, "name"),
        ],
    )
    def test_bad_top_level(self, over, field):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(tiny(**over))
        assert info.value.field == field

    def test_unknown_nested_field(self):
        d = tiny()
        d["schedule"]["momentum"] = 0.9
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(d)
        assert info.value.field == "schedule.momentum"

    def test_wrong_type(self):
        d = tiny()
        d["schedule"]["epochs"] = "many"
        with pytest.raises(ConfigError, match="schedule.epochs"):
            ExperimentConfig.from_dict(d)

    def test_schedule_constraints(self):
        d = tiny()
        d["schedule"]["cca_first_m"] = 10
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_bad_split(self):
        d = tiny()
        d["dataset"]["n_train"] = 150
        with pytest.raises(ConfigError, match="dataset.n_train"):
            ExperimentConfig.from_dict(d)

    def test_missing_file(self, tmp_path):
        d = tiny(dataset={"kind": "files", "view_a": "a.csv", "view_b": "b.csv", "labels": "y.csv"})
        with pytest.raises(ConfigError, match="dataset.view_a"):
            ExperimentConfig.from_dict(d, base_dir=tmp_path)

    def test_hash_tracks_content(self):
        a = ExperimentConfig.from_dict(tiny())
        b = ExperimentConfig.from_dict(tiny())
        c = ExperimentConfig.from_dict(tiny(seed=2))
        assert a.config_hash == b.config_hash != c.config_hash

    def test_json_syntax_error_location(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "seed": 1,\n  "name": \n}')
        with pytest.raises(ConfigError, match="line 4 column 1"):
            load_config(p)

    def test_bundled_config_valid(self):
        cfg = load_config(bundled_config_path("robustness"))
        assert cfg.modes == ("BASELINE", "ACCAR") and len(cfg.sweep_seeds) == 5


class TestDatasets:
    def test_split_and_seed(self):
        cfg = ExperimentConfig.from_dict(tiny())
        tr, te = build_datasets(cfg)
        assert (tr.n, te.n) == (100, 50)
        tr2, _ = build_datasets(cfg)
        assert (tr.view_a == tr2.view_a).all()

    def test_files(self, tmp_path, rng):
        save_array(tmp_path / "a.ccat", rng.normal(size=(30, 3)))
        save_array(tmp_path / "b.csv", rng.normal(size=(30, 2)))
        save_array(tmp_path / "y.csv", (rng.integers(0, 2, 30)[:, None]).astype(float))
        d = tiny(dataset={"kind": "files", "view_a": "a.ccat", "view_b": "b.csv", "labels": "y.csv", "n_train": 20})
        (tmp_path / "cfg.json").write_text(json.dumps(d))
        tr, te = build_datasets(load_config(tmp_path / "cfg.json"))
        assert (tr.n, te.n, tr.n_classes) == (20, 10, 2)

    def test_fractional_labels_rejected(self, tmp_path, rng):
        save_array(tmp_path / "a.csv", rng.normal(size=(10, 2)))
        save_array(tmp_path / "y.csv", rng.uniform(size=(10, 1)))
        d = tiny(dataset={"kind": "files", "view_a": "a.csv", "view_b": "a.csv", "labels": "y.csv"})
        with pytest.raises(ConfigError, match="integers"):
            build_datasets(ExperimentConfig.from_dict(d, base_dir=tmp_path))


class TestRuns:
    def test_run_directory(self, tmp_path):
        cfg = ExperimentConfig.from_dict(tiny())
        target = run_experiment(cfg, tmp_path)
        assert target.name == f"tiny-{cfg.config_hash}"
        names = sorted(p.name for p in target.iterdir())
        assert names == ["log_ACCAR.csv", "log_BASELINE.csv", "metrics.csv", "net_ACCAR.json", "net_BASELINE.json", "summary.json"]
        log = (target / "log_ACCAR.csv").read_text().splitlines()
        assert log[0] == "epoch,loss,corr,val_acc,replaced"
        assert [row.split(",")[-1] for row in log[1:]] == ["1", "1", "0"]
        summary = json.loads((target / "summary.json").read_text())
        assert summary["config"] == cfg.as_dict() and summary["version"]

    def test_rerun_from_summary_is_identical(self, tmp_path):
        first = run_experiment(ExperimentConfig.from_dict(tiny()), tmp_path / "one")
        again = run_experiment(load_config(first / "summary.json"), tmp_path / "two")
        for name in ("log_BASELINE.csv", "log_ACCAR.csv", "metrics.csv", "net_ACCAR.json"):
            assert (first / name).read_bytes() == (again / name).read_bytes()

    def test_sweep_serial_equals_parallel(self, tmp_path):
        cfg = ExperimentConfig.from_dict(tiny())
        a, sa = run_sweep(cfg, tmp_path / "serial", workers=1)
        b, sb = run_sweep(cfg, tmp_path / "pool", workers=2)
        assert (a / "comparison.csv").read_bytes() == (b / "comparison.csv").read_bytes()
        assert sa["directional"] == sb["directional"]
        assert len((a / "comparison.csv").read_text().splitlines()) == 1 + 2 * 2

    def test_sweep_needs_seeds(self, tmp_path):
        with pytest.raises(ConfigError):
            run_sweep(ExperimentConfig.from_dict(tiny(sweep_seeds=[])), tmp_path)

    def test_2d_run(self, tmp_path):
        d = tiny(
            dataset={"kind": "synthetic_2d", "n": 90, "n_train": 60, "shape_a": [5, 4], "shape_b": [4, 4]},
            modes=["ACCAR_2D"],
        )
        d["schedule"]["batch_size"] = 20
        target = run_experiment(ExperimentConfig.from_dict(d), tmp_path)
        assert (target / "log_ACCAR_2D.csv").exists()


def test_directional_summary():
    rows = [
        (0, "BASELINE", 0.9, 0.7),
        (1, "BASELINE", 0.8, 0.7),
        (2, "BASELINE", 1.0, 0.5),
        (0, "ACCAR", 0.9, 0.85),
        (1, "ACCAR", 0.9, 0.9),
        (2, "ACCAR", 0.9, 0.8),
    ]
    s = directional_summary(rows)
    assert s["BASELINE"]["median_drop"] == pytest.approx(0.2)
    assert s["ACCAR"]["median_drop"] == pytest.approx(0.05)
    assert s["accar_drop_smaller"] is True
    assert s["corrupt_gap"] == pytest.approx(0.15)
