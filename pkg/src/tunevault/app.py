"""Wires the full stack into one process: channel store, catalog,
simulator, archive, tune engine, scanner, query engine."""

from __future__ import annotations

import threading
from pathlib import Path

from .archive import ArchiveStore
from .catalog import Catalog, load_catalog, write_default_catalog
from .channeldb import ChannelStore
from .config import Config
from .query import QueryEngine
from .scanner import Scanner
from .sim import SimEngine
from .tunes import TuneEngine


class Facility:
    """One running instance of the whole stack (minus the HTTP layer)."""

    def __init__(
        self,
        config: Config,
        channels: ChannelStore,
        catalog: Catalog,
        archive: ArchiveStore,
        sim: SimEngine,
        tunes: TuneEngine,
        scanner: Scanner,
        query: QueryEngine,
    ):
        self.config = config
        self.channels = channels
        self.catalog = catalog
        self.archive = archive
        self.sim = sim
        self.tunes = tunes
        self.scanner = scanner
        self.query = query
        self._ticker: threading.Thread | None = None
        self._stop = threading.Event()

    @classmethod
    def from_config(cls, config: Config) -> "Facility":
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        catalog_path = config.catalog_path()
        if not catalog_path.exists():
            write_default_catalog(catalog_path)
        channels = ChannelStore(default_queue=config.subscriber_queue)
        catalog = load_catalog(catalog_path, channels)
        archive = ArchiveStore(data_dir)
        seed_catalog_tables(archive, catalog)
        sim = SimEngine(
            catalog,
            channels,
            archive,
            seed=config.seed,
            nominal_tick_s=config.sim_tick_ms / 1000.0,
        )
        tunes = TuneEngine(channels, archive, catalog)
        scanner = Scanner(
            channels,
            archive,
            tunes,
            scan_interval_s=config.scan_interval_s,
            tune_interval_s=config.tune_interval_s,
        )
        query = QueryEngine(archive)
        sim.apply_golden_tune(settle=True)
        return cls(config, channels, catalog, archive, sim, tunes, scanner, query)

    def start(self) -> None:
        self.scanner.start()
        if self.config.sim_tick_ms > 0:
            self._stop.clear()
            self._ticker = threading.Thread(
                target=self._run_ticker, name="sim-ticker", daemon=True
            )
            self._ticker.start()

    def stop(self) -> None:
        self._stop.set()
        if self._ticker is not None:
            self._ticker.join(timeout=10)
            self._ticker = None
        self.scanner.stop()
        self.archive.close()

    def _run_ticker(self) -> None:
        dt = self.config.sim_tick_ms / 1000.0
        while not self._stop.wait(dt):
            self.sim.tick(dt)


def seed_catalog_tables(archive: ArchiveStore, catalog: Catalog) -> None:
    """Populate the inventory tables from the catalog on first boot."""
    if archive.count("camac_crates") == 0:
        crates = sorted({d.camac_address.crate for d in catalog.devices.values()})
        for crate in crates:
            archive.insert(
                "camac_crates",
                {"crate": crate, "description": f"serial highway crate {crate}", "powered": True},
            )
    if archive.count("camac_modules") == 0:
        for dev in sorted(catalog.devices.values(), key=lambda d: d.device_id):
            archive.insert(
                "camac_modules",
                {
                    "crate": dev.camac_address.crate,
                    "slot": dev.camac_address.slot,
                    "device_id": dev.device_id,
                    "module_type": dev.device_class,
                },
            )
    if archive.count("resonators") == 0:
        for dev in sorted(catalog.devices.values(), key=lambda d: d.device_id):
            if dev.device_class != "resonator":
                continue
            setpoint = f"{dev.device_id}:amplitude"
            archive.insert(
                "resonators",
                {
                    "device_id": dev.device_id,
                    "crate": dev.camac_address.crate,
                    "slot": dev.camac_address.slot,
                    "nominal_amplitude": catalog.golden.get(setpoint, 0.0),
                    "status": "online",
                },
            )
    if archive.count("stepper_presets") == 0:
        for (device_id, preset_name), preset in sorted(catalog.presets.items()):
            archive.insert(
                "stepper_presets",
                {
                    "device_id": device_id,
                    "preset_name": preset_name,
                    "position_steps": preset.position_steps,
                },
            )
