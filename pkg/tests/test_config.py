import json

import pytest

from geneaperc.config import ConfigError, apply_overrides, env_overrides, load_config, parse_value, resolve


def test_load_toml_and_json(tmp_path):
    (tmp_path / "a.toml").write_text('seed = 3\n[law]\ntype = "binomial"\nn = 2\np = 0.75\n')
    assert load_config(tmp_path / "a.toml") == {"seed": 3, "law": {"type": "binomial", "n": 2, "p": 0.75}}
    (tmp_path / "a.json").write_text(json.dumps({"seed": 4}))
    assert load_config(tmp_path / "a.json") == {"seed": 4}
    assert load_config(None) == {}


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    (tmp_path / "bad.toml").write_text("seed = = 3")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.json")


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("[0.1, 0.2]") == [0.1, 0.2]
    assert parse_value("1/3") == "1/3"
    assert parse_value("True") is True
    assert parse_value("dac") == "dac"


def test_overrides_last_wins():
    cfg = apply_overrides({"p": 0.1, "law": {"n": 2}}, ["p=0.2", "law.n=3", "p=0.3", "tree.type=example"])
    assert cfg == {"p": 0.3, "law": {"n": 3}, "tree": {"type": "example"}}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["=3"])


def test_env_overrides():
    env = {"GENEAPERC_SEED": "5", "GENEAPERC_LAW__TYPE": "example", "GENEAPERC_DISABLE_JIT": "1", "HOME": "/"}
    assert env_overrides(env) == ["law.type=example", "seed=5"]


def test_resolve_precedence_and_sections(tmp_path):
    (tmp_path / "c.toml").write_text('seed = 1\np = 0.1\n[sweep]\np = 0.2\nreplicates = 10\n[simulate]\np = 0.9\n')
    cfg = resolve(tmp_path / "c.toml", ["replicates=20"], {"GENEAPERC_SEED": "7"}, section="sweep")
    assert cfg == {"seed": 7, "p": 0.2, "replicates": 20}
    cfg = resolve(tmp_path / "c.toml", ["seed=9"], {"GENEAPERC_SEED": "7"}, section="simulate")
    assert cfg["seed"] == 9 and cfg["p"] == 0.9
