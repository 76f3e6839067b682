import pytest

from sparseground.config import ConfigError, DetectConfig, from_mapping, load_config, parse_config


def test_defaults():
    cfg = DetectConfig()
    assert (cfg.epsilon, cfg.delta_deg, cfg.hypotheses) == (0.2, 10.0, 200)
    assert (cfg.grid_size, cfg.min_quadrant_inliers) == (80, 50)
    assert (cfg.crop_radius, cfg.downsample) == (40.0, 0.1)
    assert cfg.max_tilt == pytest.approx(0.7853981633974483)
    assert DetectConfig(max_tilt_deg=0).max_tilt is None


def test_parse_config_types_and_comments():
    values = parse_config("# tuning\nepsilon = 0.15\nmin-quadrant-inliers = 30  # per quadrant\n\nseed=4\n")
    assert values == {"epsilon": 0.15, "min_quadrant_inliers": 30, "seed": 4}
    assert isinstance(values["min_quadrant_inliers"], int)


@pytest.mark.parametrize(
    "text, message",
    [("epsilon 0.2", "line 1"), ("\nbogus = 1", "unknown key"), ("hypotheses = many", "cannot parse"),
     ("grid_size = 2.5", "cannot parse")],
)
def test_parse_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


@pytest.mark.parametrize(
    "kwargs",
    [dict(epsilon=0), dict(delta_deg=90), dict(hypotheses=0), dict(grid_size=1), dict(min_quadrant_inliers=-1),
     dict(crop_radius=0), dict(lpr_segments=0)],
)
def test_validation(kwargs):
    with pytest.raises(ConfigError):
        DetectConfig(**kwargs)


def test_load_config_layers_over_base(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text("epsilon = 0.3\n")
    cfg = load_config(path, DetectConfig(seed=7))
    assert cfg.epsilon == 0.3 and cfg.seed == 7
    assert load_config(None) == DetectConfig()


def test_updated_ignores_none():
    cfg = DetectConfig().updated(epsilon=None, hypotheses=50)
    assert cfg.epsilon == 0.2 and cfg.hypotheses == 50


def test_digest_tracks_values():
    assert DetectConfig().digest() == DetectConfig().digest()
    assert DetectConfig().digest() != DetectConfig(seed=1).digest()
    assert from_mapping({**DetectConfig(seed=2).as_dict(), "extra": 1}) == DetectConfig(seed=2)
