import pytest
import numpy as np

from slsito.core.config import (
    DEFAULT_DECAY_MIN,
    DEFAULT_LEVELS,
    FORMULA_KINDS,
    KINDS,
    ExperimentConfig,
    load_config,
    parse_levels,
    resolve_decay_min,
    write_manifest,
)
from slsito.core.exceptions import ConfigurationError
from slsito.core.simulate import make_time_grid


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.kind == "ito-2d"
    assert cfg.levels == DEFAULT_LEVELS
    assert cfg.n_paths == 1000
    assert cfg.effective_kind == "ito-2d"
    assert ExperimentConfig(kind="isometry").n_paths == 10_000
    assert ExperimentConfig(kind="convergence", target="localtime").n_paths == 10_000
    assert ExperimentConfig(kind="convergence", target="ito-1d").effective_kind == "ito-1d"
    assert set(FORMULA_KINDS.values()) <= set(KINDS)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "nope"},
        {"target": "convergence"},
        {"levels": (100, 50)},
        {"levels": (100, 100)},
        {"levels": ()},
        {"levels": (0, 10)},
        {"level_counts": (32, 16)},
        {"paths": 1},
        {"seed": -1},
        {"nprocesses": 0},
        {"max_exclusion": 1.0},
        {"eps_rule": "abc"},
        {"eps_rule": "-0.1"},
        {"sigma1": 0.0},
        {"rho": 2.0},
        {"horizon": 0.0},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**kwargs)


def test_steps_is_a_single_level():
    cfg = ExperimentConfig(steps=500)
    assert cfg.levels == (500,)


def test_replace():
    cfg = ExperimentConfig(seed=3, steps=500)
    assert cfg.replace(paths=None).paths is None
    assert cfg.replace(seed=None).seed == 3
    assert cfg.replace(seed=5).seed == 5
    # new levels drop the steps shortcut
    assert cfg.replace(levels=(10, 20)).levels == (10, 20)
    with pytest.raises(ConfigurationError, match="unknown configuration keys"):
        cfg.replace(bogus=1)


def test_eps_for():
    grid = make_time_grid(1.0, 400)
    np.testing.assert_allclose(ExperimentConfig().eps_for(grid), 0.05)
    assert ExperimentConfig(eps_rule="0.02").eps_for(grid) == 0.02


def test_diffusion():
    cfg = ExperimentConfig(x1=1.0, mu2=0.5, sigma1=2.0, rho=-0.3, seed=9)
    spec = cfg.diffusion()
    assert tuple(spec.start) == (1.0, 0.0)
    assert tuple(spec.drift) == (0.0, 0.5)
    assert tuple(spec.vol) == (2.0, 1.0)
    assert spec.rho == -0.3
    assert spec.seed == 9


def test_parse_levels():
    assert parse_levels("1000, 10000,") == (1000, 10000)
    assert parse_levels("7") == (7,)


def test_load_config(tmp_path):
    fl = tmp_path / "run.cfg"
    fl.write_text(
        "# an experiment\n"
        "kind = corollary\n"
        "function = ABS_CURVE   # kink along sin\n"
        "\n"
        "levels = 100, 400\n"
        "paths = 50\n"
        "rho = 0.25\n"
        "force_use_ray = yes\n"
        "out = runs/x\n"
    )
    values = load_config(fl)
    assert values == {
        "kind": "corollary",
        "function": "ABS_CURVE",
        "levels": (100, 400),
        "paths": 50,
        "rho": 0.25,
        "force_use_ray": True,
        "out": "runs/x",
    }
    cfg = ExperimentConfig.from_file(fl, paths=80, seed=None)
    assert cfg.paths == 80
    assert cfg.seed == 0


@pytest.mark.parametrize(
    "text, match",
    [
        ("kind ito-2d\n", "expected 'key = value'"),
        ("colour = red\n", "unknown configuration key"),
        ("paths = many\n", "bad value for 'paths'"),
        ("trace_mem = maybe\n", "bad value for 'trace_mem'"),
    ],
)
def test_load_config_errors(tmp_path, text, match):
    fl = tmp_path / "bad.cfg"
    fl.write_text("seed = 1\n" + text)
    with pytest.raises(ConfigurationError, match=match) as exc:
        load_config(fl)
    assert ":2:" in str(exc.value)


def test_from_file_level_override_replaces_steps(tmp_path):
    fl = tmp_path / "run.cfg"
    fl.write_text("steps = 300\n")
    assert ExperimentConfig.from_file(fl).levels == (300,)
    assert ExperimentConfig.from_file(fl, levels=(10, 20)).levels == (10, 20)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(fl, colour="red")


def test_manifest_loads_back(tmp_path):
    cfg = ExperimentConfig(
        kind="convergence", target="ito-1d", function="MOVING_KINK", seed=4, paths=30,
        levels=(100, 200), rho=0.1 + 0.2, out=str(tmp_path), force_use_ray=True,
    )
    fl = tmp_path / "manifest.txt"
    write_manifest(cfg, fl, extra={"rng": "philox4x64-10"})
    text = fl.read_text()
    assert "# n_paths = 30" in text
    assert "# rng = philox4x64-10" in text
    assert ExperimentConfig.from_file(fl) == cfg


def test_resolve_decay_min():
    assert resolve_decay_min(ExperimentConfig()) == DEFAULT_DECAY_MIN
    assert resolve_decay_min(ExperimentConfig(), 1.1) == 1.1
    assert resolve_decay_min(ExperimentConfig(decay_min=2.0), 1.1) == 2.0
