import json

import pytest
from pydantic import ValidationError

from src.config import (
    DEFAULT_MODEL_CONFIG,
    DEFAULT_TOKENIZER_CONFIG,
    DEFAULT_TRAIN_CONFIG,
    ExperimentConfig,
    InputMode,
    LossMode,
    ModelConfig,
    TaskMode,
    TokenizerConfig,
    TrainConfig,
    load_experiment_config,
)
from src.errors import ConfigurationError


class TestDefaults:
    def test_train_defaults(self):
        tc = DEFAULT_TRAIN_CONFIG
        assert tc.learning_rate == 2e-5
        assert tc.epochs == 10
        assert tc.batch_size == 16
        assert tc.l2_lambda == 0.0
        assert tc.split == (0.8, 0.1, 0.1)
        assert not tc.weighted_loss

    def test_model_defaults(self):
        mc = DEFAULT_MODEL_CONFIG
        assert (mc.hidden, mc.layers, mc.heads, mc.max_len, mc.dropout) == (128, 4, 4, 512, 0.1)
        assert mc.task_mode is TaskMode.MULTI

    def test_tokenizer_budget_fits_max_len(self):
        assert DEFAULT_TOKENIZER_CONFIG.budget + 3 == DEFAULT_MODEL_CONFIG.max_len

    def test_experiment_grid(self):
        config = ExperimentConfig()
        assert config.approaches == [TaskMode.MULTI, TaskMode.ST_SATD, TaskMode.ST_VULN]
        assert config.loss_modes == [LossMode.REGULAR, LossMode.WEIGHTED]
        assert config.input_modes == [InputMode.OUT]


class TestValidation:
    def test_heads_divide_hidden(self):
        with pytest.raises(ValidationError, match="divisible"):
            ModelConfig(hidden=30, heads=4)

    @pytest.mark.parametrize("split", [(0.8, 0.2, 0.0), (0.5, 0.3, 0.3), (1.2, -0.1, -0.1)])
    def test_split_fractions(self, split):
        with pytest.raises(ValidationError):
            TrainConfig(split=split)

    def test_negative_task_weight(self):
        with pytest.raises(ValidationError):
            TrainConfig(task_loss_weights=(1.0, -0.5))

    @pytest.mark.parametrize("field,value", [("epochs", 0), ("batch_size", 0), ("learning_rate", -1.0), ("l2_lambda", -0.1)])
    def test_train_bounds(self, field, value):
        with pytest.raises(ValidationError):
            TrainConfig(**{field: value})

    def test_dropout_bounds(self):
        with pytest.raises(ValidationError):
            ModelConfig(dropout=1.0)

    def test_budget_must_fit_max_len(self):
        with pytest.raises(ValidationError, match="max_len"):
            ExperimentConfig(model=ModelConfig(max_len=128), tokenizer=TokenizerConfig(budget=126))
        ExperimentConfig(model=ModelConfig(max_len=128), tokenizer=TokenizerConfig(budget=125))

    def test_task_mode_tasks(self):
        assert TaskMode.MULTI.tasks == ("satd", "vuln")
        assert TaskMode.ST_SATD.tasks == ("satd",)
        assert TaskMode.ST_VULN.tasks == ("vuln",)


class TestLoadExperimentConfig:
    def test_defaults_without_path(self):
        assert load_experiment_config(None) == ExperimentConfig()

    def test_json_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(
            json.dumps(
                {
                    "name": "desk",
                    "approaches": ["MULTI"],
                    "input_modes": ["OUT", "IN"],
                    "model": {"hidden": 64, "max_len": 256},
                    "tokenizer": {"budget": 253},
                    "train_grid": [{"learning_rate": 1e-4}, {"learning_rate": 5e-5}],
                }
            )
        )
        config = load_experiment_config(path)
        assert config.name == "desk"
        assert config.approaches == [TaskMode.MULTI]
        assert config.input_modes == [InputMode.OUT, InputMode.IN]
        assert config.model.hidden == 64
        assert [tc.learning_rate for tc in config.train_grid] == [1e-4, 5e-5]

    def test_round_trip(self, tmp_path):
        config = ExperimentConfig(name="rt", model=ModelConfig(hidden=64, max_len=128), tokenizer=TokenizerConfig(budget=100))
        path = tmp_path / "rt.json"
        path.write_text(config.model_dump_json())
        assert load_experiment_config(path) == config

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_experiment_config(tmp_path / "absent.json")

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": {"hidden": 30, "heads": 4}}))
        with pytest.raises(ConfigurationError, match="invalid config"):
            load_experiment_config(path)
