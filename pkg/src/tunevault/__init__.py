"""Live channel database, scheduled archiver, and tune restore engine
for a simulated heavy-ion beamline, with an HTTP query API."""

from .archive import ArchiveStore, TableSchema, TABLES
from .catalog import Catalog, load_catalog, parse_catalog, default_catalog_text
from .channeldb import ChannelRecord, ChannelStore, StoreSnapshot, ValueKind
from .config import Config, load_config
from .query import QueryEngine, QueryResult, QuerySpec
from .scaling import BeamParameters, Kinematics, ScaleFactorSet, kinematics, scale_factors
from .scanner import Scanner, PRODUCTION_TUNE_INTERVAL_S
from .sim import SimEngine
from .tunes import RestoreReport, TuneEngine

__version__ = "0.1.0"

__all__ = [
    "ArchiveStore",
    "BeamParameters",
    "Catalog",
    "ChannelRecord",
    "ChannelStore",
    "Config",
    "Kinematics",
    "PRODUCTION_TUNE_INTERVAL_S",
    "QueryEngine",
    "QueryResult",
    "QuerySpec",
    "RestoreReport",
    "ScaleFactorSet",
    "Scanner",
    "SimEngine",
    "StoreSnapshot",
    "TABLES",
    "TableSchema",
    "TuneEngine",
    "ValueKind",
    "default_catalog_text",
    "kinematics",
    "load_catalog",
    "load_config",
    "parse_catalog",
    "scale_factors",
    "__version__",
]
