from pathlib import Path

import pytest

from diffreward.config import RunConfig, config_from_text, load_config, parse_config_text

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def test_grammar_comments_blanks_and_overrides():
    raw = parse_config_text("""
# full-line comment
env = blob-world   # trailing comment
seed = 3

seed = 5
""")
    assert raw == {"env": "blob-world", "seed": "5"}


def test_typed_coercion():
    cfg = config_from_text("seed = 9\nw1 = 1500\nrandomize_init = true\n")
    assert cfg.seed == 9
    assert cfg.w1 == 1500.0
    assert cfg.randomize_init is True


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_text("zoom = 3\n")


def test_bad_value_rejected():
    with pytest.raises(ValueError, match="expected int"):
        config_from_text("seed = fast\n")
    with pytest.raises(ValueError, match="boolean"):
        config_from_text("randomize_init = maybe\n")


def test_missing_equals_rejected():
    with pytest.raises(ValueError, match="key = value"):
        parse_config_text("just words\n")


def test_semantic_validation():
    with pytest.raises(ValueError):
        config_from_text("reward_mode = audio\n")
    with pytest.raises(ValueError):
        config_from_text("optimizer = cma\n")
    with pytest.raises(ValueError):
        config_from_text("noise_lo = 500\nnoise_hi = 400\n")


def test_overrides_applied_last():
    cfg = config_from_text("seed = 1\nout = a\n", seed=42)
    assert cfg.seed == 42 and cfg.out == "a"


def test_grid_helpers():
    cfg = RunConfig(sweep_points="10, 20,30", weight_grid="1:2, 3:4")
    assert cfg.noise_grid() == [10, 20, 30]
    assert cfg.weight_cells() == [(1.0, 2.0), (3.0, 4.0)]


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.cfg")))
def test_checked_in_configs_parse(name):
    cfg = load_config(CONFIG_DIR / name)
    assert isinstance(cfg, RunConfig)
