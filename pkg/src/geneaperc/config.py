"""Run configuration: TOML/JSON files, environment and ``key=value`` overrides."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ENV_PREFIX = "GENEAPERC_"
# variables with the prefix that are not configuration keys
ENV_RESERVED = {"GENEAPERC_DISABLE_JIT"}


class ConfigError(ValueError):
    pass


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            cfg = json.loads(text)
        else:
            cfg = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must hold a table/object at top level")
    return cfg


def parse_value(text: str):
    """JSON scalars and lists when they parse, the raw string otherwise (``1/3`` stays text)."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        low = text.lower()
        if low in ("true", "false"):
            return low == "true"
        return text


def set_key(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def apply_overrides(cfg: Mapping, pairs: Iterable[str]) -> dict:
    """Apply ``key=value`` strings in order; later ones win. Dotted keys reach nested tables."""
    out = json.loads(json.dumps(cfg))
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        k, v = pair.split("=", 1)
        k = k.strip()
        if not k:
            raise ConfigError(f"override {pair!r} has an empty key")
        set_key(out, k, parse_value(v.strip()))
    return out


def env_overrides(environ: Mapping[str, str] | None = None) -> list[str]:
    """``GENEAPERC_FOO__BAR=1`` becomes ``foo.bar=1``; sorted for a stable order."""
    environ = os.environ if environ is None else environ
    out = []
    for name in sorted(environ):
        if name.startswith(ENV_PREFIX) and name not in ENV_RESERVED:
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            if key:
                out.append(f"{key}={environ[name]}")
    return out


def resolve(path, sets: Iterable[str] = (), environ: Mapping[str, str] | None = None, section: str | None = None) -> dict:
    """File, then environment, then ``--set`` flags. A table named ``section`` is lifted to the top."""
    cfg = load_config(path)
    if section and isinstance(cfg.get(section), dict):
        base = {k: v for k, v in cfg.items() if not isinstance(v, dict) or k in ("law", "params")}
        base.update(cfg[section])
        cfg = base
    cfg = apply_overrides(cfg, env_overrides(environ))
    return apply_overrides(cfg, sets)
