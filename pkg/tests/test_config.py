import dataclasses
import json

import pytest

from narrex.config import CONFIG_ENV_VAR, RunConfig
from narrex.errors import ConfigError


def test_defaults_validate():
    RunConfig().validate()


@pytest.mark.parametrize("field,value", [
    ("alpha", 0.0), ("alpha", 1.0), ("alpha", -0.2),
    ("knn_k", 0), ("sigma", -1.0), ("location_weight", -0.5),
    ("tol", 0.0), ("max_iter", 0), ("coherence_mode", "harmonic"),
    ("window", 0), ("top_k_out", 0), ("mincover", -0.1), ("mincover", 1.1),
    ("K", 1), ("timeout", 0.0), ("trials", 0), ("lengths", []),
    ("lengths", [5, 1]), ("spaces", []), ("spaces", ["weird"]),
    ("seed", -1), ("port", 0), ("port", 70000), ("host", ""),
])
def test_each_field_domain_enforced(field, value):
    cfg = dataclasses.replace(RunConfig(), **{field: value})
    with pytest.raises(ConfigError):
        cfg.validate()


def test_json_round_trip():
    cfg = RunConfig(alpha=0.5, lengths=[5, 10], window=3, sigma=0.2)
    back = RunConfig.from_dict(cfg.to_json())
    assert back == cfg


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_dict({"alpha": 0.5, "betamax": 1})


def test_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"alpha": 0.7, "trials": 3}))
    cfg = RunConfig.from_file(path)
    assert cfg.alpha == 0.7 and cfg.trials == 3
    assert cfg.knn_k == RunConfig().knn_k  # untouched fields keep defaults


def test_from_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        RunConfig.from_file(bad)


def test_overrides_beat_file_values():
    cfg = RunConfig(alpha=0.7, trials=3)
    out = cfg.with_overrides({"alpha": 0.8, "trials": None, "itf": True})
    assert out.alpha == 0.8      # explicit flag wins
    assert out.trials == 3       # None means "flag not given"
    assert out.itf is True


def test_overrides_rejects_bad_value():
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"alpha": 2.0})


def test_field_names_cover_dataclass():
    assert set(RunConfig.field_names()) == {f.name for f in dataclasses.fields(RunConfig)}


def test_env_var_name_stable():
    assert CONFIG_ENV_VAR == "NARREX_CONFIG"
