"""
Settings file handling.

The settings file holds one ``section.key = value`` assignment per line;
``#`` starts a comment. Each section overlays the defaults of one
configuration dataclass, values are coerced to the type of the default::

    walk.alpha = 0.6
    personalize.weights = 0.5, 0.3, 0.2, 0.1
    cluster.chain = commons:0.01:2, commons:0.02:3
    filter.min_best_path = none
    balancing.user.likes = 0.7
    balancing.user.prefers = 0.3

Any ``balancing.*`` entry replaces the whole balancing table.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional

from .builder import BuilderConfig
from .coldstart import ColdStartConfig, NoveltyConfig
from .context import ClusterAlgorithm, ClusterConfig, ClusterStage, ContextFilterParams
from .errors import ConfigError
from .graph import BalancingConfig, EdgeType, VertexType
from .sequencer import RejectionConfig
from .walk import MainPageConfig, PersonalizationWeights, WalkParams

CONFIG_ENV = "TASTE_CONFIG"
SEED_ENV = "TASTE_SEED"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _weights(value: str) -> PersonalizationWeights:
    return PersonalizationWeights(tuple(float(w) for w in value.split(",") if w.strip()))


def _chain(value: str):
    stages = []
    for part in value.split(","):
        algorithm, tau, *nc = part.strip().split(":")
        stages.append(ClusterStage(ClusterAlgorithm(algorithm), float(tau), int(nc[0]) if nc else 1))
    return tuple(stages)


def _optional_number(value: str):
    return float(value) if any(c in value for c in ".eE") else int(value)


def coerce(default, value: str):
    """Parse ``value`` into the type of ``default``; "none" clears optional settings."""
    if value.lower() == "none":
        return None
    if isinstance(default, bool):
        lowered = value.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, Enum):
        return type(default)(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, PersonalizationWeights):
        return _weights(value)
    if isinstance(default, tuple) and default and isinstance(default[0], ClusterStage):
        return _chain(value)
    if default is None:
        return _optional_number(value)
    return value


SECTIONS = {
    "builder": BuilderConfig,
    "walk": WalkParams,
    "rejection": RejectionConfig,
    "cluster": ClusterConfig,
    "filter": ContextFilterParams,
    "novelty": NoveltyConfig,
    "coldstart": ColdStartConfig,
    "mainpage": MainPageConfig,
}


@dataclass(frozen=True)
class Settings:
    balancing: BalancingConfig = field(default_factory=BalancingConfig)
    builder: BuilderConfig = field(default_factory=BuilderConfig)
    walk: WalkParams = field(default_factory=WalkParams)
    personalize: PersonalizationWeights = field(default_factory=PersonalizationWeights)
    rejection: RejectionConfig = field(default_factory=RejectionConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    filter: ContextFilterParams = field(default_factory=ContextFilterParams)
    novelty: NoveltyConfig = field(default_factory=NoveltyConfig)
    coldstart: ColdStartConfig = field(default_factory=ColdStartConfig)
    mainpage: MainPageConfig = field(default_factory=MainPageConfig)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "Settings":
        overrides: Dict[str, Dict[str, str]] = {}
        balancing = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
            parts = name.strip().split(".")
            value = value.strip()
            try:
                if parts[0] == "balancing" and len(parts) == 3:
                    balancing[(VertexType(parts[1]), EdgeType(parts[2]))] = float(value)
                elif parts[0] == "personalize" and parts[1:] == ["weights"]:
                    overrides.setdefault("personalize", {})["weights"] = value
                elif len(parts) == 2 and parts[0] in SECTIONS:
                    overrides.setdefault(parts[0], {})[parts[1]] = value
                else:
                    raise ConfigError(f"unknown setting {name.strip()!r}")
            except ValueError as e:
                raise ConfigError(f"{source}:{lineno}: {e}") from None

        settings = {}
        if balancing:
            settings["balancing"] = BalancingConfig(balancing)
        if "personalize" in overrides:
            try:
                settings["personalize"] = _weights(overrides["personalize"]["weights"])
            except ValueError as e:
                raise ConfigError(f"{source}: personalize.weights: {e}") from None
        for section, values in overrides.items():
            if section in SECTIONS:
                settings[section] = _overlay(SECTIONS[section], values, source, section)
        return cls(**settings)

    @classmethod
    def load(cls, path: str) -> "Settings":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read(), source=path)

    @classmethod
    def from_env(cls, path: Optional[str] = None, environ: Mapping[str, str] = os.environ) -> "Settings":
        path = path or environ.get(CONFIG_ENV)
        return cls.load(path) if path else cls()


def _overlay(config_cls, values: Mapping[str, str], source: str, section: str):
    defaults = config_cls()
    known = {f.name for f in dataclasses.fields(config_cls)}
    changes = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"{source}: unknown setting {section}.{key}")
        try:
            changes[key] = coerce(getattr(defaults, key), value)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{source}: {section}.{key}: {e}") from None
    try:
        return dataclasses.replace(defaults, **changes)
    except TypeError as e:
        raise ConfigError(f"{source}: bad value in section {section}: {e}") from None


def resolve_seed(seed: Optional[int], environ: Mapping[str, str] = os.environ) -> Optional[int]:
    """The explicit seed, else TASTE_SEED, else None."""
    if seed is not None:
        return seed
    value = environ.get(SEED_ENV)
    if value is None or not value.strip():
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from None
