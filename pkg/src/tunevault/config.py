"""Daemon configuration: YAML file plus flag/env overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .errors import ParseError

ENV_VAR = "TUNEVAULT_CONFIG"


@dataclass
class Config:
    port: int = 8080
    bind: str = "127.0.0.1"
    data_dir: str = "./tunevault-data"
    catalog: str | None = None
    scan_interval_s: float = 10.0
    tune_interval_s: float = 60.0
    sim_tick_ms: int = 200
    seed: int = 1234
    subscriber_queue: int = 4096
    ui_dir: str | None = None

    def catalog_path(self) -> Path:
        if self.catalog:
            return Path(self.catalog)
        return Path(self.data_dir) / "catalog.src"


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Build a Config from an optional YAML file plus overrides.

    Resolution order: defaults < file (explicit path, else $TUNEVAULT_CONFIG)
    < overrides (command-line flags).
    """
    if path is None:
        env = os.environ.get(ENV_VAR)
        path = Path(env) if env else None
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ParseError(f"bad config {path}: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: config root must be a mapping")
        known = {f.name for f in fields(Config)}
        unknown = set(raw) - known
        if unknown:
            raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = Config(**values)
    except TypeError as exc:
        raise ParseError(f"bad config values: {exc}") from exc
    _check(cfg)
    return cfg


def _check(cfg: Config) -> None:
    if not 0 < cfg.port < 65536:
        raise ParseError(f"port out of range: {cfg.port}")
    if cfg.scan_interval_s <= 0 or cfg.tune_interval_s <= 0:
        raise ParseError("intervals must be > 0")
    if cfg.sim_tick_ms < 0:
        raise ParseError("sim_tick_ms must be >= 0 (0 disables the simulator tick)")
    if cfg.subscriber_queue < 1:
        raise ParseError("subscriber_queue must be >= 1")


SAMPLE_CONFIG = """\
# Service configuration. All keys optional; these are the defaults.

port: 8080
bind: 127.0.0.1        # no auth: keep on loopback or an isolated network
data_dir: ./tunevault-data
# catalog: /path/to/catalog.src   # default: <data_dir>/catalog.src,
#                                 # generated on first start if absent

# Archiver schedules. Desk-scale defaults; production runs the tune
# capture on a 4-hour schedule (tune_interval_s: 14400) and snapshots
# every minute (scan_interval_s: 60).
scan_interval_s: 10
tune_interval_s: 60

# Simulator tick period; 0 disables the background ticker (readbacks
# then move only when tick() is driven manually, as in tests).
sim_tick_ms: 200
seed: 1234             # simulator noise seed, for reproducible runs

# Subscribers slower than this many queued deltas are disconnected.
subscriber_queue: 4096

# Directory of built UI assets to serve at /; omit to run API-only.
# ui_dir: ./frontend/dist
"""


def write_sample_config(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(SAMPLE_CONFIG, encoding="utf-8")
    return path
