"""Config validation and JSON round-trips."""

import numpy as np
import pytest

from acmnet.config import (DataConfig, ModelConfig, RunConfig, desk_config,
                           load_run_config, run_config_from_dict)
from acmnet.errors import ConfigError
from acmnet.train import evaluate_samples, worker_count


class TestModelConfig:
    def test_defaults_match_full_scale_architecture(self):
        cfg = ModelConfig()
        assert cfg.levels == 3
        assert cfg.channels == (64, 64, 64)
        assert cfg.k == 6
        assert cfg.nodes_per_level == (10000, 5000, 2500)
        assert cfg.coord_system == "3d"
        assert cfg.fusion == "sg"
        assert cfg.integration == "feature"
        assert cfg.propagation == "encoder"
        assert cfg.gamma1 == 0.5 and cfg.gamma2 == 0.01
        assert cfg.leaky_slope == 0.2

    def test_length_invariant(self):
        with pytest.raises(ConfigError):
            ModelConfig(levels=3, channels=(8, 8), nodes_per_level=(4, 4, 4))
        with pytest.raises(ConfigError):
            ModelConfig(levels=2, channels=(8, 8), nodes_per_level=(4,))

    def test_gamma_nonnegative(self):
        with pytest.raises(ConfigError):
            ModelConfig(gamma1=-0.1)

    def test_enum_validation(self):
        for field, value in (("fusion", "x"), ("integration", "mid"),
                             ("propagation", "everywhere"), ("coord_system", "4d")):
            with pytest.raises(ConfigError):
                ModelConfig(**{field: value})

    def test_slope_range(self):
        with pytest.raises(ConfigError):
            ModelConfig(leaky_slope=1.5)


class TestRunConfig:
    def test_json_roundtrip(self, tmp_path):
        cfg = desk_config(seed=4)
        p = tmp_path / "cfg.json"
        cfg.to_json(p)
        back = load_run_config(p)
        assert back.to_dict() == cfg.to_dict()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            run_config_from_dict({"model": {"bogus_field": 1}})
        with pytest.raises(ConfigError):
            run_config_from_dict({"optimizer": {}})

    def test_invalid_json_reported(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_run_config(p)

    def test_data_ratio_validation(self):
        with pytest.raises(ConfigError):
            DataConfig(train_ratio=0.0)
        with pytest.raises(ConfigError):
            DataConfig(eval_ratio=1.2)

    def test_desk_profile(self):
        cfg = desk_config()
        assert cfg.model.channels == (32, 32, 32)
        assert cfg.data.height == cfg.data.width == 64
        assert cfg.data.n_train == 200 and cfg.data.n_eval == 50
        assert cfg.train.batch_size == 1
        assert RunConfig().train.batch_size == 8


class TestWorkerParallelism:
    def test_env_var_caps_workers(self, monkeypatch):
        monkeypatch.setenv("ACMNET_THREADS", "4")
        assert worker_count(10) == 4
        assert worker_count(2) == 2
        monkeypatch.delenv("ACMNET_THREADS")
        assert worker_count(10) == 1

    def test_threaded_eval_matches_serial(self, monkeypatch):
        from acmnet.data import build_dataset, nearest_fill
        data = DataConfig(height=16, width=16, n_train=0, n_eval=4, scan_rows=6, seed=33)
        model = ModelConfig(levels=2, channels=(8, 8), nodes_per_level=(16, 8),
                            k=3, fi_channels=8)
        samples = build_dataset(data, model, "eval")
        predict = lambda s: nearest_fill(s.sparse)
        monkeypatch.setenv("ACMNET_THREADS", "1")
        serial, agg_serial = evaluate_samples(predict, samples)
        monkeypatch.setenv("ACMNET_THREADS", "3")
        threaded, agg_threaded = evaluate_samples(predict, samples)
        assert agg_serial == agg_threaded
        assert [(sid, r.rmse_mm) for sid, r in serial] == \
               [(sid, r.rmse_mm) for sid, r in threaded]
