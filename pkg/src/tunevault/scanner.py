"""Periodic archiver: scheduled snapshots of critical channels plus
scheduled whole-machine tune captures.

Ticks are drift-free: the k-th capture of a schedule is due at
t0 + k * interval, regardless of how long earlier captures took. If a
whole period passes before a capture can start, the missed ticks are
skipped and counted, never queued, so the store receives fresh data or
nothing. Storage failures are logged and never stop a schedule.
"""

from __future__ import annotations

import logging
import threading
import time

from .archive import ArchiveStore
from .channeldb import ChannelStore
from .tunes import TuneEngine

log = logging.getLogger(__name__)

PRODUCTION_TUNE_INTERVAL_S = 4 * 3600  # 4-hour capture schedule
DEFAULT_SCAN_INTERVAL_S = 10.0
DEFAULT_TUNE_INTERVAL_S = 60.0


class Scanner:
    def __init__(
        self,
        channels: ChannelStore,
        archive: ArchiveStore,
        tunes: TuneEngine,
        scan_interval_s: float = DEFAULT_SCAN_INTERVAL_S,
        tune_interval_s: float = DEFAULT_TUNE_INTERVAL_S,
        wall_clock=time.time,
    ):
        if scan_interval_s <= 0 or tune_interval_s <= 0:
            raise ValueError("intervals must be > 0")
        self.channels = channels
        self.archive = archive
        self.tunes = tunes
        self.scan_interval_s = scan_interval_s
        self.tune_interval_s = tune_interval_s
        self.wall_clock = wall_clock
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._metrics_lock = threading.Lock()
        self.metrics = {
            "snapshots_taken": 0,
            "tunes_archived": 0,
            "skipped_ticks": 0,
            "capture_errors": 0,
        }

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._threads:
            raise RuntimeError("scanner already started")
        self._stop.clear()
        for kind, interval in (
            ("snapshot", self.scan_interval_s),
            ("tune", self.tune_interval_s),
        ):
            thread = threading.Thread(
                target=self._run_schedule, args=(kind, interval),
                name=f"scanner-{kind}", daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=10)
        self._threads = []

    # -- scheduling ----------------------------------------------------------

    def _run_schedule(self, kind: str, interval: float) -> None:
        t0 = time.monotonic()
        k = 1
        while not self._stop.is_set():
            target = t0 + k * interval
            now = time.monotonic()
            if now < target:
                if self._stop.wait(target - now):
                    return
                now = time.monotonic()
            if now >= target + interval:
                # This tick's whole window has passed: skip forward.
                current = int((now - t0) // interval)
                with self._metrics_lock:
                    self.metrics["skipped_ticks"] += current - k
                k = current
                continue
            self._capture(kind)
            k += 1

    def _capture(self, kind: str) -> None:
        try:
            if kind == "snapshot":
                self._take_snapshot("scheduled")
            else:
                self.tunes.archive_tune(label=None, provenance="scheduled")
                with self._metrics_lock:
                    self.metrics["tunes_archived"] += 1
        except Exception:
            log.exception("scheduled %s capture failed; schedule continues", kind)
            with self._metrics_lock:
                self.metrics["capture_errors"] += 1

    def _take_snapshot(self, trigger: str) -> int:
        snap = self.channels.snapshot("critical_only")
        snapshot_id = self.archive.persist_snapshot(
            snap, trigger, int(self.wall_clock() * 1000)
        )
        with self._metrics_lock:
            self.metrics["snapshots_taken"] += 1
        return snapshot_id

    # -- manual triggers --------------------------------------------------------

    def trigger_now(self, kind: str, label: str | None = None) -> int:
        """Capture immediately on the caller's thread; errors surface."""
        if kind == "snapshot":
            return self._take_snapshot("manual")
        if kind == "tune":
            tune_id = self.tunes.archive_tune(label=label, provenance="manual")
            with self._metrics_lock:
                self.metrics["tunes_archived"] += 1
            return tune_id
        raise ValueError(f"kind must be snapshot|tune, got {kind!r}")

    def skipped_ticks(self) -> int:
        with self._metrics_lock:
            return self.metrics["skipped_ticks"]
