import pytest

from trac.config import DESK_PROFILE, ConfigError, RunConfig, parse_config, parse_config_text


def test_full_scale_defaults():
    cfg = RunConfig()
    assert (cfg.pretrain_steps, cfg.train_steps, cfg.batch_size, cfg.lr) == (30_000, 100_000, 96, 1e-4)
    assert (cfg.alpha, cfg.gamma, cfg.segment_ratio) == (0.2, 0.99, 1.0)
    assert (cfg.delta, cfg.eta, cfg.x_pct, cfg.y_pct) == (0.7, 0.25, 50.0, 0.0)
    assert cfg.dropout_rate == 0.25 and cfg.hidden_sizes == (256, 256)
    assert cfg.seeds == (0, 1, 2) and cfg.eval_episodes == 20


def test_file_then_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nalpha = 0.5   # trailing\n\nseeds = 3, 4\nhidden_sizes = 16,16\n")
    cfg = parse_config(str(path), {"alpha": "0.7"})
    assert cfg.alpha == 0.7
    assert cfg.seeds == (3, 4)
    assert cfg.hidden_sizes == (16, 16)


def test_profile_applies_before_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("train_steps = 7\n")
    cfg = parse_config(str(path), profile="desk")
    assert cfg.train_steps == 7
    assert cfg.pretrain_steps == int(DESK_PROFILE["pretrain_steps"])


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="'alhpa'"):
        parse_config_text("alhpa = 0.2\n")
    with pytest.raises(ConfigError, match="'bogus'"):
        parse_config(overrides={"bogus": "1"})


def test_out_of_range_names_rule():
    with pytest.raises(ConfigError, match="gamma"):
        parse_config(overrides={"gamma": "1.5"})
    with pytest.raises(ConfigError, match="x_pct"):
        parse_config(overrides={"x_pct": "80", "y_pct": "30"})
    with pytest.raises(ConfigError, match="seeds"):
        parse_config(overrides={"seeds": ""})


def test_bad_value_and_line():
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(overrides={"alpha": "abc"})
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("alpha = 1\nnot a pair\n")


def test_hash_ignores_out_dir_only():
    a = parse_config(overrides={"out_dir": "x"})
    b = parse_config(overrides={"out_dir": "y"})
    c = parse_config(overrides={"eta": "0.5"})
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_dumps_round_trip(tmp_path):
    cfg = parse_config(overrides={"seeds": "5,6", "avoidance_gains": "-8,0", "lr": "3e-4"})
    path = tmp_path / "dump.cfg"
    path.write_text(cfg.dumps())
    assert parse_config(str(path)) == cfg


def test_train_config_carries_seed():
    cfg = parse_config(overrides={"bc_lr": "1e-3"})
    assert cfg.train_config(4).seed == 4
    assert cfg.bc_config(4).lr == 1e-3
    assert cfg.train_config(4).lr == cfg.lr
