"""One structured YAML config document shared by every CLI command.

Sections map 1:1 onto the dataclasses they configure; unknown keys are
rejected so a typo never silently falls back to a default. Command-line
flags override config values, and every command records the resolved
configuration next to its outputs.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .network.config import ModelConfig
from .phantom import DegradationConfig
from .training import TrainConfig

SECTIONS = ("model", "train", "phantom", "degrade", "stats", "seed")

PHANTOM_KEYS = ("n", "size", "seed", "surgical", "lesion_rate", "train_count", "test_count")
STATS_KEYS = ("weights", "bootstrap_n", "seed")


def load_run_config(path=None) -> dict:
    """Parse and validate the YAML document; returns a plain section dict."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {sorted(unknown)}")
    for section, allowed in (
        ("model", tuple(f.name for f in fields(ModelConfig))),
        ("train", tuple(f.name for f in fields(TrainConfig))),
        ("degrade", tuple(f.name for f in fields(DegradationConfig))),
        ("phantom", PHANTOM_KEYS),
        ("stats", STATS_KEYS),
    ):
        body = doc.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: section {section!r} must be a mapping")
        bad = set(body) - set(allowed)
        if bad:
            raise ConfigError(f"{path}: unknown keys in {section!r}: {sorted(bad)}")
    return doc


def build_section(cls, doc: dict, section: str, overrides: dict):
    """Instantiate a config dataclass from a section plus non-None overrides."""
    body = dict(doc.get(section) or {})
    body.update({k: v for k, v in overrides.items() if v is not None})
    allowed = {f.name for f in fields(cls)}
    bad = set(body) - allowed
    if bad:
        raise ConfigError(f"unknown {section} keys: {sorted(bad)}")
    try:
        return cls(**body)
    except TypeError as exc:
        raise ConfigError(f"invalid {section} config: {exc}") from exc


def resolved_to_yaml(sections: dict) -> str:
    return yaml.safe_dump(sections, sort_keys=True, default_flow_style=False)


def write_resolved(out_dir, sections: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.yaml"
    path.write_text(resolved_to_yaml(sections))
    return path
