import json

import pytest

from src.config import (CACHE_ENV_VAR, PROJECT_ROOT, ExperimentConfig, cache_root, config_from_dict,
                        load_config)
from src.errors import ConfigError


class TestValidation:
    def test_defaults(self):
        cfg = config_from_dict({})
        assert cfg.kind == "clt"
        assert cfg.alpha == 70.5
        assert cfg.psi.support_radius == 1.0
        assert cfg.window_scales() == [10.0]

    @pytest.mark.parametrize("raw", [
        {"warp": 1},
        {"psi": {"radius": 0.5}},
        {"quad": {"tol": 1e-8, "nodes": 3}},
        {"kind": "séance"},
        {"mode": "infinite"},
        {"samples": 1},
        {"chi": [0.1, 0.2, 0.3]},
        {"chi": "goe"},
        {"moments": [1, 2]},
        {"moments": [7]},
        {"grid": [[6, -1]]},
        {"psi": {"support_radius": 1.5}},
        {"genus": 1},
        {"psi": "bump"},
    ])
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            config_from_dict(raw)

    def test_grid_and_cutoff(self):
        cfg = config_from_dict({"grid": [[6, 48], [10]], "lmax": None})
        assert cfg.window_scales() == [6, 10]
        assert cfg.required_cutoff() == 10
        assert config_from_dict({"lmax": 12.0}).required_cutoff() == 12.0

    def test_round_trip_through_dict(self):
        cfg = config_from_dict({"psi": {"support_radius": 0.5}, "chi": [0.0, 1.0, 2.0, 3.0]})
        assert config_from_dict(cfg.to_dict()) == cfg


class TestFiles:
    def test_toml(self, tmp_path):
        path = tmp_path / "ev.toml"
        path.write_text('kind = "energy-variance"\ngrid = [[6, 48], [8, 64]]\nsamples = 200\n'
                        '[psi]\nfamily = "bump"\n[quad]\ntol = 1e-9\n', encoding="utf-8")
        cfg = load_config(path)
        assert cfg.kind == "energy-variance"
        assert cfg.quad.tol == 1e-9
        assert cfg.grid == [[6, 48], [8, 64]]

    def test_json(self, tmp_path):
        path = tmp_path / "clt.json"
        path.write_text(json.dumps({"mode": "finite-n", "n": 3, "oracle": True}), encoding="utf-8")
        cfg = load_config(path)
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.oracle and cfg.n == 3

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")
        yaml = tmp_path / "cfg.yaml"
        yaml.write_text("kind: clt\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(yaml)
        broken = tmp_path / "broken.toml"
        broken.write_text("kind = \n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(broken)


class TestCacheRoot:
    def test_precedence(self, monkeypatch, tmp_path):
        monkeypatch.delenv(CACHE_ENV_VAR, raising=False)
        assert str(cache_root()) == ".covers_cache"
        monkeypatch.setenv(CACHE_ENV_VAR, str(tmp_path / "env"))
        assert cache_root() == tmp_path / "env"
        assert cache_root(str(tmp_path / "flag")) == tmp_path / "flag"


def test_shipped_configs_load():
    paths = sorted((PROJECT_ROOT / "content" / "configs").glob("*.toml"))
    assert len(paths) == 4
    kinds = {load_config(p).kind for p in paths}
    assert kinds == {"clt", "energy-variance", "diag-trend"}
