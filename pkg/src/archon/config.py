"""Workspace configuration: ``archon.toml`` at the workspace root.

Unknown keys are rejected. Every field has a default; the only indirection
is ``provider.credentials_env``, the name of the environment variable that
holds the API key for the network provider.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .gate import GatePolicy

CONFIG_FILE = "archon.toml"
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "toy"  # toy | external
    command: str = ""  # external: template with {root} and optionally {file}
    timeout: float = 30.0  # seconds per file, external only


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "scripted"  # scripted | http
    script: str = ".archon/script.json"
    endpoint: str = ""
    informal_endpoint: str = ""
    credentials_env: str = "ARCHON_API_KEY"


@dataclass(frozen=True)
class PolicyConfig:
    lexicon: tuple[str, ...] = ()  # empty: per-dialect default
    allowed_axioms: tuple[str, ...] = ("Classical.choice", "Quot.sound", "propext")
    allow_declared_axioms: bool = False
    placeholders_fail_build: bool = False

    def gate_policy(self) -> GatePolicy:
        return GatePolicy(
            lexicon=frozenset(self.lexicon) or None,
            allowed_axioms=frozenset(self.allowed_axioms),
            allow_declared_axioms=self.allow_declared_axioms,
            placeholders_fail_build=self.placeholders_fail_build,
        )


@dataclass(frozen=True)
class BudgetConfig:
    worker_tokens: int = 4096
    plan_tokens: int = 2048
    review_tokens: int = 2048
    max_turns: int = 0  # 0: no turn cap beyond the token budget
    stall_threshold: int = 3
    review_window: int = 6
    iteration_cap: int = 50
    parallelism: int = 4
    transport_retries: int = 2


@dataclass(frozen=True)
class PathsConfig:
    spec: str = "spec/Challenge.mck"
    corpus: str = "references/corpus.jsonl"
    informal_proof: str = "references/informal_proof.md"


@dataclass(frozen=True)
class RunConfig:
    replay: bool = False  # logical timestamps, no elapsed times
    quality_pass: bool = True
    review_sessions: bool = False


@dataclass(frozen=True)
class Config:
    schema_version: int = SCHEMA_VERSION
    backend: BackendConfig = field(default_factory=BackendConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    budgets: BudgetConfig = field(default_factory=BudgetConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    run: RunConfig = field(default_factory=RunConfig)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, name)
        elif isinstance(default, tuple):
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError(f"{where}.{name} must be a list of strings")
            kwargs[name] = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{where}.{name} must be true or false")
            kwargs[name] = value
        elif isinstance(default, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}.{name} must be a number")
            if isinstance(default, int) and not isinstance(value, int):
                raise ConfigError(f"{where}.{name} must be an integer")
            kwargs[name] = type(default)(value)
        else:
            if not isinstance(value, str):
                raise ConfigError(f"{where}.{name} must be a string")
            kwargs[name] = value
    return cls(**kwargs)


def parse_config(text: str) -> Config:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    cfg = _build(Config, data, "root")
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.schema_version}")
    if cfg.backend.kind not in ("toy", "external"):
        raise ConfigError(f"backend.kind must be toy or external, not {cfg.backend.kind!r}")
    if cfg.provider.kind not in ("scripted", "http"):
        raise ConfigError(f"provider.kind must be scripted or http, not {cfg.provider.kind!r}")
    if cfg.budgets.stall_threshold < 1 or cfg.budgets.iteration_cap < 1 or cfg.budgets.parallelism < 1:
        raise ConfigError("stall_threshold, iteration_cap and parallelism must be positive")
    return cfg


def load_config(root) -> Config:
    p = Path(root) / CONFIG_FILE
    if not p.exists():
        raise ConfigError(f"{p} not found (run `archon init` first)")
    return parse_config(p.read_text(encoding="utf-8"))


def with_overrides(cfg: Config, **sections) -> Config:
    """``with_overrides(cfg, run={"replay": True})``"""
    out = cfg
    for name, values in sections.items():
        out = dataclasses.replace(out, **{name: dataclasses.replace(getattr(out, name), **values)})
    return out


DEFAULT_TOML = f"""\
# Archon workspace configuration. Unknown keys are rejected.
schema_version = {SCHEMA_VERSION}

[backend]
kind = "toy"            # toy | external
command = ""            # external: e.g. "lake env lean {{file}}"; {{root}} and {{file}} are substituted
timeout = 30.0          # seconds per file (external)

[provider]
kind = "scripted"       # scripted | http
script = ".archon/script.json"
endpoint = ""
informal_endpoint = ""
credentials_env = "ARCHON_API_KEY"

[policy]
lexicon = []            # empty: per-dialect default
allowed_axioms = ["Classical.choice", "Quot.sound", "propext"]
allow_declared_axioms = false
placeholders_fail_build = false

[budgets]
worker_tokens = 4096
plan_tokens = 2048
review_tokens = 2048
max_turns = 0
stall_threshold = 3
review_window = 6
iteration_cap = 50
parallelism = 4
transport_retries = 2

[paths]
spec = "spec/Challenge.mck"
corpus = "references/corpus.jsonl"
informal_proof = "references/informal_proof.md"

[run]
replay = false
quality_pass = true
review_sessions = false
"""
