"""Scheduler: drift-free ticks, skip-not-queue, capture error isolation."""

import time

import pytest

from tunevault.archive import ArchiveStore
from tunevault.catalog import parse_catalog, default_catalog_text
from tunevault.channeldb import ChannelStore
from tunevault.errors import StorageFailure
from tunevault.scanner import (
    DEFAULT_SCAN_INTERVAL_S,
    DEFAULT_TUNE_INTERVAL_S,
    PRODUCTION_TUNE_INTERVAL_S,
    Scanner,
)
from tunevault.tunes import TuneEngine


@pytest.fixture
def stack(tmp_path):
    catalog = parse_catalog(default_catalog_text())
    store = ChannelStore()
    catalog.create_channels(store)
    archive = ArchiveStore(tmp_path / "data")
    tunes = TuneEngine(store, archive, catalog)
    yield catalog, store, archive, tunes
    archive.close()


def make_scanner(stack, scan_s=3600.0, tune_s=3600.0):
    _, store, archive, tunes = stack
    return Scanner(store, archive, tunes, scan_interval_s=scan_s, tune_interval_s=tune_s)


def test_production_constants():
    assert PRODUCTION_TUNE_INTERVAL_S == 4 * 3600
    assert DEFAULT_SCAN_INTERVAL_S == 10.0
    assert DEFAULT_TUNE_INTERVAL_S == 60.0


def test_intervals_must_be_positive(stack):
    _, store, archive, tunes = stack
    with pytest.raises(ValueError):
        Scanner(store, archive, tunes, scan_interval_s=0)
    with pytest.raises(ValueError):
        Scanner(store, archive, tunes, tune_interval_s=-1)


def test_double_start_rejected(stack):
    scanner = make_scanner(stack)
    scanner.start()
    try:
        with pytest.raises(RuntimeError):
            scanner.start()
    finally:
        scanner.stop()


def test_scheduled_snapshots_fire_on_the_grid(stack):
    _, _, archive, _ = stack
    scanner = make_scanner(stack, scan_s=0.2)
    t0 = time.monotonic()
    scanner.start()
    time.sleep(1.1)
    scanner.stop()
    elapsed = time.monotonic() - t0
    rows = archive.scan("snapshots")
    assert all(r["trigger"] == "scheduled" for r in rows)
    # drift-free schedule: k-th tick at t0 + 0.2k, so ~5 in a 1.1s window
    assert 4 <= len(rows) <= int(elapsed / 0.2) + 1
    spacings = [b["taken_at"] - a["taken_at"] for a, b in zip(rows, rows[1:])]
    assert spacings, "need at least two snapshots to measure the grid"
    for gap_ms in spacings:
        assert 120 <= gap_ms <= 280
    assert scanner.skipped_ticks() == 0


def test_scheduled_tunes_fire(stack):
    _, _, archive, _ = stack
    scanner = make_scanner(stack, tune_s=0.25)
    scanner.start()
    time.sleep(0.8)
    scanner.stop()
    rows = archive.scan("tunes")
    assert 2 <= len(rows) <= 4
    assert all(r["provenance"] == "scheduled" for r in rows)
    assert scanner.metrics["tunes_archived"] == len(rows)


def test_slow_capture_skips_instead_of_queueing(stack, monkeypatch):
    _, store, archive, _ = stack
    orig = store.snapshot

    def slow_snapshot(mode="full"):
        time.sleep(0.35)
        return orig(mode)

    monkeypatch.setattr(store, "snapshot", slow_snapshot)
    scanner = make_scanner(stack, scan_s=0.1)
    scanner.start()
    time.sleep(1.4)
    scanner.stop()
    taken = scanner.metrics["snapshots_taken"]
    skipped = scanner.skipped_ticks()
    # each 0.35s capture burns ~3 windows of 0.1s: misses are dropped, not queued
    assert taken >= 2
    assert skipped >= 2
    assert taken + skipped <= 1.4 / 0.1 + 2


def test_capture_error_does_not_stop_schedule(stack, monkeypatch):
    _, _, archive, _ = stack
    calls = {"n": 0}
    orig = archive.persist_snapshot

    def flaky(snap, trigger, taken_at):
        calls["n"] += 1
        if calls["n"] <= 2:
            raise StorageFailure("disk on fire")
        return orig(snap, trigger, taken_at)

    monkeypatch.setattr(archive, "persist_snapshot", flaky)
    scanner = make_scanner(stack, scan_s=0.1)
    scanner.start()
    time.sleep(0.75)
    alive = [t.is_alive() for t in scanner._threads]
    scanner.stop()
    assert all(alive)
    assert scanner.metrics["capture_errors"] == 2
    assert scanner.metrics["snapshots_taken"] >= 1
    assert archive.count("snapshots") == scanner.metrics["snapshots_taken"]


def test_trigger_now_snapshot_is_manual(stack):
    _, _, archive, _ = stack
    scanner = make_scanner(stack)
    sid = scanner.trigger_now("snapshot")
    row = archive.get("snapshots", sid)
    assert row["trigger"] == "manual"
    assert row["n_values"] == archive.count("snapshot_values")


def test_trigger_now_tune_carries_label(stack):
    _, _, archive, _ = stack
    scanner = make_scanner(stack)
    tid = scanner.trigger_now("tune", label="before-shift-change")
    row = archive.get("tunes", tid)
    assert row["label"] == "before-shift-change"
    assert row["provenance"] == "manual"


def test_trigger_now_rejects_unknown_kind(stack):
    scanner = make_scanner(stack)
    with pytest.raises(ValueError):
        scanner.trigger_now("teapot")


def test_trigger_now_while_running(stack):
    _, _, archive, _ = stack
    scanner = make_scanner(stack, scan_s=0.05)
    scanner.start()
    try:
        ids = [scanner.trigger_now("snapshot") for _ in range(5)]
        time.sleep(0.25)
    finally:
        scanner.stop()
    assert len(set(ids)) == 5
    triggers = {r["trigger"] for r in archive.scan("snapshots")}
    assert "manual" in triggers
    assert "scheduled" in triggers


def test_trigger_now_error_surfaces(stack, monkeypatch):
    _, _, archive, _ = stack
    scanner = make_scanner(stack)

    def boom(snap, trigger, taken_at):
        raise StorageFailure("no space")

    monkeypatch.setattr(archive, "persist_snapshot", boom)
    with pytest.raises(StorageFailure):
        scanner.trigger_now("snapshot")
