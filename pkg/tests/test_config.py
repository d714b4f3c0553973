import pytest

from errors import ConfigError
from settings.config import CONFIG_ENV, RunConfig, load_config, parse_override


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_are_the_desk_profile(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    cfg = load_config()
    assert cfg.encoder.input_size == (64, 64)
    assert cfg.predictor.hidden_size == 64
    assert cfg.energy.k == 10
    assert cfg.learning_rate.initial == 1e-8
    assert cfg.frame_dims == (64, 64)


def test_full_profile():
    cfg = load_config(profile="full")
    assert cfg.encoder.input_size == (224, 224)
    assert cfg.predictor.hidden_size == 512
    assert cfg.frame_dims == (224, 224)


def test_toml_values_are_applied(tmp_path):
    path = write(tmp_path, '[energy]\nk = 4\nw_alpha = 0.5\n\n[run]\nmode = "gaze"\n\n[encoder]\nconv_layers = [[3, 2, 8], [3, 2, 8], [3, 2, 8]]\n')
    cfg = load_config(path)
    assert (cfg.energy.k, cfg.energy.w_alpha) == (4, 0.5)
    assert cfg.run.mode == "gaze"
    assert cfg.encoder.conv_layers == [(3, 2, 8), (3, 2, 8), (3, 2, 8)]


def test_overrides_win_over_the_file(tmp_path):
    path = write(tmp_path, "[energy]\nk = 4\n")
    cfg = load_config(path, ["energy.k=7", "run.output=elsewhere", "proposals.strategies=['grid']"])
    assert cfg.energy.k == 7
    assert cfg.run.output == "elsewhere"
    assert cfg.proposals.strategies == ["grid"]


def test_parse_override_forms():
    assert parse_override("energy.w_t=0.25") == {"energy": {"w_t": 0.25}}
    assert parse_override("run.mode=gaze") == {"run": {"mode": "gaze"}}
    with pytest.raises(ConfigError):
        parse_override("k=3")


def test_problems_are_collected_into_one_error(tmp_path):
    path = write(tmp_path, '[energy]\nk = "many"\nbogus = 1\n\n[nowhere]\nx = 1\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    message = str(info.value)
    assert "energy.k expects an integer" in message
    assert "unknown key energy.bogus" in message
    assert "unknown section [nowhere]" in message


def test_validation_lists_every_bad_value():
    cfg = RunConfig()
    cfg.energy.w_alpha = 2.0
    cfg.tubes.gap_tolerance = 0
    cfg.run.mode = "train"
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    message = str(info.value)
    assert "tubes.gap_tolerance" in message
    assert "run.mode" in message
    assert message.count("\n  - ") >= 3


def test_environment_names_the_config_file(tmp_path, monkeypatch):
    path = write(tmp_path, "[predictor]\nhidden_size = 16\n")
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config().predictor.hidden_size == 16


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[energy\nk = 1\n"))
