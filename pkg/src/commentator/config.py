"""Deployment configuration.

A data directory holds the store files plus a ``config`` file in
``key=value`` format (# comments and blank lines ignored).  Recognized
keys, all optional:

    database           store filename inside the data directory
    port               HTTP port for the API server
    lexicon_hi         path to a hi lexicon file (default: shipped demo)
    lexicon_en         path to an en lexicon file (default: shipped demo)
    pos_rules          path to a POS rule-table file (default: shipped)
    mli_tags           comma-separated matrix-language tagset
    remote_lid_url     remote recommender endpoint (empty = local engine)
    remote_timeout_ms  remote recommender timeout
    session_ttl_hours  login session lifetime
    static_dir         directory with the built web UI, served at /

Environment overrides: COMMENTATOR_DB_DIR, COMMENTATOR_PORT,
COMMENTATOR_REMOTE_LID_URL.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from commentator.domain import DEFAULT_MLI_TAGS, LID_TAGSET, POS_TAGSET, mli_tagset
from commentator.preannotation import (
    DEFAULT_REMOTE_TIMEOUT_MS,
    PreannotationEngine,
    RecommenderConfig,
)

DEFAULT_PORT = 8571
DEFAULT_DB_DIR = "commentator_data"
DEFAULT_DATABASE = "store.sqlite3"
DEFAULT_SESSION_TTL_HOURS = 24

ENV_DB_DIR = "COMMENTATOR_DB_DIR"
ENV_PORT = "COMMENTATOR_PORT"
ENV_REMOTE_LID_URL = "COMMENTATOR_REMOTE_LID_URL"


class ConfigError(ValueError):
    """Unreadable or malformed configuration."""


@dataclass(frozen=True)
class Config:
    db_dir: Path = Path(DEFAULT_DB_DIR)
    database: str = DEFAULT_DATABASE
    port: int = DEFAULT_PORT
    lexicon_hi: str | None = None
    lexicon_en: str | None = None
    pos_rules: str | None = None
    mli_tags: tuple[str, ...] = DEFAULT_MLI_TAGS
    remote_lid_url: str | None = None
    remote_timeout_ms: int = DEFAULT_REMOTE_TIMEOUT_MS
    session_ttl_hours: int = DEFAULT_SESSION_TTL_HOURS
    static_dir: str | None = None

    @property
    def db_path(self) -> Path:
        return self.db_dir / self.database

    def tagsets(self) -> dict:
        return {
            LID_TAGSET.task: LID_TAGSET,
            POS_TAGSET.task: POS_TAGSET,
            "mli": mli_tagset(self.mli_tags),
        }

    def recommender_config(self) -> RecommenderConfig:
        if self.remote_lid_url:
            return RecommenderConfig(mode="remote", remote_endpoint=self.remote_lid_url,
                                     timeout_ms=self.remote_timeout_ms)
        return RecommenderConfig(mode="local", timeout_ms=self.remote_timeout_ms)

    def load_engine(self) -> PreannotationEngine:
        return PreannotationEngine.load(
            lexicon_hi=self.lexicon_hi, lexicon_en=self.lexicon_en,
            pos_rules=self.pos_rules)


def parse_config_file(path) -> dict:
    """Read a key=value config file into a plain dict of strings."""
    values = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _apply(values: dict, config: Config) -> Config:
    updates = {}
    try:
        if "database" in values:
            updates["database"] = values["database"]
        if "port" in values:
            updates["port"] = int(values["port"])
        for key in ("lexicon_hi", "lexicon_en", "pos_rules", "static_dir"):
            if values.get(key):
                updates[key] = values[key]
        if "mli_tags" in values:
            tags = tuple(t.strip() for t in values["mli_tags"].split(",") if t.strip())
            if not tags:
                raise ConfigError("mli_tags must list at least one language")
            updates["mli_tags"] = tags
        if "remote_lid_url" in values:
            updates["remote_lid_url"] = values["remote_lid_url"] or None
        if "remote_timeout_ms" in values:
            updates["remote_timeout_ms"] = int(values["remote_timeout_ms"])
        if "session_ttl_hours" in values:
            updates["session_ttl_hours"] = int(values["session_ttl_hours"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None
    return replace(config, **updates)


def load_config(db_dir=None, config_path=None, env=None) -> Config:
    """Resolve configuration: defaults < config file < environment.

    ``db_dir`` defaults to $COMMENTATOR_DB_DIR or ./commentator_data; the
    config file defaults to ``<db_dir>/config`` when present.
    """
    env = os.environ if env is None else env
    if db_dir is None:
        db_dir = env.get(ENV_DB_DIR, DEFAULT_DB_DIR)
    config = Config(db_dir=Path(db_dir))

    path = Path(config_path) if config_path else config.db_dir / "config"
    if config_path and not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.exists():
        config = _apply(parse_config_file(path), config)

    if env.get(ENV_PORT):
        try:
            config = replace(config, port=int(env[ENV_PORT]))
        except ValueError:
            raise ConfigError(f"{ENV_PORT} must be an integer") from None
    if ENV_REMOTE_LID_URL in env:
        config = replace(config, remote_lid_url=env[ENV_REMOTE_LID_URL] or None)
    return config


DEFAULT_CONFIG_TEXT = """\
# commentator data-directory configuration (key=value).
# database=store.sqlite3
# port=8571
# lexicon_hi=
# lexicon_en=
# pos_rules=
# mli_tags=hi,en,other
# remote_lid_url=
# remote_timeout_ms=2000
# session_ttl_hours=24
# static_dir=
"""


def ensure_data_dir(config: Config) -> None:
    """Create the data directory and a commented default config file."""
    config.db_dir.mkdir(parents=True, exist_ok=True)
    config_file = config.db_dir / "config"
    if not config_file.exists():
        config_file.write_text(DEFAULT_CONFIG_TEXT, encoding="utf-8")
