import pytest

from advsysid.config import ConfigError, load_config, resolve_config


def write(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


def test_preset_example1_defaults(tmp_path):
    cfg = load_config(write(tmp_path, 'preset = "example1"\n'))
    assert cfg.d == 10
    assert cfg.target_norm == 0.6
    assert cfg.model.kind == "sign_restricted"
    assert cfg.model.p == 0.7
    assert cfg.experiment.t_checkpoints == (125, 250, 500, 1000, 2000, 4000)
    assert cfg.sim_horizon == 4000


def test_preset_example2_defaults(tmp_path):
    cfg = load_config(write(tmp_path, 'preset = "example2"\n'))
    assert cfg.target_norm == 0.95
    assert cfg.model.kind == "arbitrary_noncentral"
    assert cfg.model.p == 0.45
    assert cfg.model.params["variance"] == 5.0


def test_preset_remark1_fixed_system(tmp_path):
    cfg = load_config(write(tmp_path, 'preset = "remark1"\n'))
    assert cfg.d == 1
    assert cfg.system is not None
    assert cfg.system.a_star[0, 0] == 0.5
    assert cfg.model.p == 1.0
    assert cfg.sim_horizon == 500


def test_preset_gaussian(tmp_path):
    cfg = load_config(write(tmp_path, 'preset = "gaussian"\n'))
    assert cfg.model.kind == "iid_gaussian"
    assert cfg.model.p == 1.0


def test_file_overrides_preset(tmp_path):
    cfg = load_config(write(tmp_path, """
preset = "example1"
[model]
p = 0.8
[experiment]
trials = 3
[run]
master_seed = 99
"""))
    assert cfg.model.p == 0.8
    assert cfg.experiment.trials == 3
    assert cfg.master_seed == 99
    assert cfg.d == 10  # preset value retained


def test_unknown_preset(tmp_path):
    with pytest.raises(ConfigError, match="preset"):
        load_config(write(tmp_path, 'preset = "example99"\n'))


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.toml"
    with pytest.raises(ConfigError, match="nope.toml"):
        load_config(missing)


def test_invalid_toml(tmp_path):
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(write(tmp_path, "preset = [unclosed\n"))


def test_field_level_errors():
    with pytest.raises(ConfigError, match="system"):
        resolve_config({"model": {"kind": "zero"}})
    with pytest.raises(ConfigError, match="model.kind"):
        resolve_config({"system": {"d": 2, "target_norm": 0.5},
                        "model": {"kind": "banana", "p": 0.5}})
    with pytest.raises(ConfigError, match="model.p"):
        resolve_config({"system": {"d": 2, "target_norm": 0.5},
                        "model": {"kind": "iid_gaussian", "p": 1.5}})
    with pytest.raises(ConfigError, match="system.target_norm"):
        resolve_config({"system": {"d": 2, "target_norm": 1.5},
                        "model": {"kind": "zero"}})
    with pytest.raises(ConfigError, match="experiment.estimators"):
        resolve_config({"system": {"d": 2, "target_norm": 0.5},
                        "model": {"kind": "zero"},
                        "experiment": {"estimators": []}})
    with pytest.raises(ConfigError, match="estimators"):
        resolve_config({"system": {"d": 2, "target_norm": 0.5},
                        "model": {"kind": "zero"},
                        "experiment": {"estimators": ["lasso"]}})


def test_remark1_needs_scalar_system():
    with pytest.raises(ConfigError, match="remark1"):
        resolve_config({"system": {"d": 2, "target_norm": 0.5},
                        "model": {"kind": "remark1"}})


def test_sweep_grids(tmp_path):
    cfg = load_config(write(tmp_path, """
preset = "example1"
[experiment]
p_values = [0.7, 0.75, 0.8]
d_values = [10, 20]
"""))
    assert cfg.p_values == [0.7, 0.75, 0.8]
    assert cfg.d_values == [10, 20]


def test_sign_restricted_interval_validation():
    base = {"system": {"d": 2, "target_norm": 0.5}}
    with pytest.raises(ConfigError, match="neg_low"):
        resolve_config({**base, "model": {"kind": "sign_restricted", "p": 0.5,
                                          "neg_low": -1.0, "neg_high": 0.5}})
    with pytest.raises(ConfigError, match="pos_low"):
        resolve_config({**base, "model": {"kind": "sign_restricted", "p": 0.5,
                                          "pos_low": -2.0}})


def test_explicit_system_matrix():
    cfg = resolve_config({
        "system": {"a_star": [[0.3, 0.1], [0.0, 0.2]], "x0": [1.0, -1.0]},
        "model": {"kind": "iid_gaussian", "p": 0.5},
    })
    assert cfg.d == 2
    assert cfg.system is not None
    assert cfg.target_norm is None


def test_unstable_explicit_system_rejected():
    with pytest.raises(ConfigError, match="system"):
        resolve_config({
            "system": {"a_star": [[1.2]], "x0": [1.0]},
            "model": {"kind": "zero"},
        })
