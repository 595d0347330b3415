"""Service configuration: one TOML file, two environment overrides.

The file is declarative and entirely optional — every field has a sensible
default for local work.  ``POLICYDESK_LISTEN`` (host:port) and
``POLICYDESK_STORAGE`` (database path) override the file, nothing else does.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from .errors import ConfigInvalid

ENV_LISTEN = "POLICYDESK_LISTEN"
ENV_STORAGE = "POLICYDESK_STORAGE"


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8420
    storage_path: str = ""  # empty -> volatile in-memory store
    bootstrap_admin_email: str = ""
    bootstrap_admin_secret: str = ""
    session_idle_minutes: int = 30
    queue_page_size: int = 50

    @property
    def listen_address(self) -> str:
        return f"{self.listen_host}:{self.listen_port}"


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    env = os.environ if env is None else env
    config = ServiceConfig()

    if path is not None:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
        try:
            document = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigInvalid(f"config file {path} is not valid TOML: {exc}") from exc
        config = _apply_document(config, document)

    listen = env.get(ENV_LISTEN, "")
    if listen:
        config.listen_host, config.listen_port = _parse_listen(listen)
    storage = env.get(ENV_STORAGE, "")
    if storage:
        config.storage_path = storage

    if not (0 < config.listen_port < 65536):
        raise ConfigInvalid(f"port out of range: {config.listen_port}")
    if config.session_idle_minutes <= 0:
        raise ConfigInvalid("sessions.idle_minutes must be positive")
    if config.queue_page_size <= 0:
        raise ConfigInvalid("queue.page_size must be positive")
    return config


def _apply_document(config: ServiceConfig, document: dict) -> ServiceConfig:
    def section(name: str) -> dict:
        value = document.get(name, {})
        if not isinstance(value, dict):
            raise ConfigInvalid(f"[{name}] must be a table")
        return value

    listen = section("listen")
    if "host" in listen:
        config.listen_host = _expect_str(listen["host"], "listen.host")
    if "port" in listen:
        config.listen_port = _expect_int(listen["port"], "listen.port")

    storage = section("storage")
    if "path" in storage:
        config.storage_path = _expect_str(storage["path"], "storage.path")

    bootstrap = section("bootstrap")
    if "admin_email" in bootstrap:
        config.bootstrap_admin_email = _expect_str(bootstrap["admin_email"], "bootstrap.admin_email")
    if "admin_secret" in bootstrap:
        config.bootstrap_admin_secret = _expect_str(bootstrap["admin_secret"], "bootstrap.admin_secret")

    sessions = section("sessions")
    if "idle_minutes" in sessions:
        config.session_idle_minutes = _expect_int(sessions["idle_minutes"], "sessions.idle_minutes")

    queue = section("queue")
    if "page_size" in queue:
        config.queue_page_size = _expect_int(queue["page_size"], "queue.page_size")
    return config


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigInvalid(f"{ENV_LISTEN} must look like host:port, got {value!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ConfigInvalid(f"{ENV_LISTEN} port is not a number: {value!r}") from exc


def _expect_str(value, name: str) -> str:
    if not isinstance(value, str):
        raise ConfigInvalid(f"{name} must be a string, got {type(value).__name__}")
    return value


def _expect_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(f"{name} must be an integer, got {type(value).__name__}")
    return value
