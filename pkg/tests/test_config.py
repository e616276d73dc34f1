import pytest

from cxrval.adapters.base import ConfigError
from cxrval.adapters.external import ExternalAdapter
from cxrval.config import RunConfig, config_from_dict, load_config


def test_defaults():
    cfg = RunConfig()
    assert (cfg.seed, cfg.workers, cfg.tau_det, cfg.pad, cfg.best_of_n) == (0, 1, 0.25, 0.05, 1)
    assert cfg.ssim_config().window == 11


@pytest.mark.parametrize("kw", [{"tau_det": 1.5}, {"workers": 0}, {"seed": -1}, {"seed": 2**64}, {"best_of_n": 0},
                                {"default_backend": "gpu"}, {"ssim": {"bogus": 1}}])
def test_invalid_values(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_unknown_keys_and_roles():
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({"sed": 1})
    with pytest.raises(ConfigError, match="role"):
        config_from_dict({"adapters": {"painter": {"backend": "phantom"}}})
    with pytest.raises(ConfigError, match="needs a command"):
        config_from_dict({"adapters": {"grounder": {"backend": "external"}}})


def test_bad_ssim_settings_surface_as_config_error():
    with pytest.raises(ConfigError, match="ssim"):
        RunConfig(ssim={"window": 10}).ssim_config()


def test_toml_round_trip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('manifest = "m.jsonl"\nseed = 7\nworkers = 2\n[ssim]\nwindow = 7\n'
                 '[adapters.grounder]\nbackend = "external"\ncommand = "python3 -m cxrval.adapters.external"\n')
    cfg = load_config(p)
    assert (cfg.manifest, cfg.seed, cfg.workers, cfg.ssim_config().window) == ("m.jsonl", 7, 2, 7)
    reg = cfg.with_overrides(output_dir=str(tmp_path)).build_registry()
    assert isinstance(reg.binding("grounder").adapter, ExternalAdapter)
    assert reg.backend_ids()["segmenter"] == "phantom-segmenter"


def test_overrides_win_and_none_is_ignored():
    cfg = RunConfig(seed=3).with_overrides(seed=None, workers=4, ssim_window=7)
    assert (cfg.seed, cfg.workers, cfg.ssim["window"]) == (3, 4, 7)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 3")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert load_config(None) == RunConfig()


def test_backend_none_leaves_roles_unbound():
    with pytest.raises(ConfigError, match="unbound adapter roles"):
        RunConfig(default_backend="none").build_registry()
