"""Tune archive and scaled restore: round trips, factors, clamps, locking."""

import json
import threading

import pytest

from tunevault.archive import ArchiveStore
from tunevault.catalog import parse_catalog, default_catalog_text
from tunevault.channeldb import ChannelStore
from tunevault.errors import RestoreBusy, UnknownTune
from tunevault.scaling import BeamParameters, scale_factors
from tunevault.tunes import TuneEngine

IDENTITY = BeamParameters(mass_amu=40.0, charge_state=12, energy_mev_u=7.0)
HEAVIER = BeamParameters(mass_amu=84.0, charge_state=17, energy_mev_u=5.5)
FAST = BeamParameters(mass_amu=40.0, charge_state=12, energy_mev_u=25.0)


@pytest.fixture
def stack(tmp_path):
    catalog = parse_catalog(default_catalog_text())
    store = ChannelStore()
    catalog.create_channels(store)
    archive = ArchiveStore(tmp_path / "data")
    engine = TuneEngine(store, archive, catalog)
    for name, value in catalog.golden.items():
        store.write(name, value)
    store.write("SLIT:L1:position", 120000)
    yield catalog, store, archive, engine
    archive.close()


def critical_values(catalog, store):
    return {
        spec.name: store.read(spec.name).value
        for spec in catalog.channel_specs.values()
        if spec.critical
    }


def test_archive_covers_every_critical_setpoint(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune(label="golden-ref")
    row, values = archive.load_tune(tune_id)
    names = [v["channel"] for v in values]
    assert names == sorted(names)
    expected = sorted(critical_values(catalog, store))
    assert names == expected
    assert row["label"] == "golden-ref"
    assert row["provenance"] == "manual"


def test_tune_row_carries_current_beam(stack):
    _, _, archive, engine = stack
    tune_id = engine.archive_tune()
    row, _ = archive.load_tune(tune_id)
    assert row["mass_amu"] == 40.0
    assert row["charge_state"] == 12
    assert row["energy_mev_u"] == 7.0


def test_archive_then_load_is_bit_exact(stack):
    catalog, store, archive, engine = stack
    before = critical_values(catalog, store)
    tune_id = engine.archive_tune()
    _, values = archive.load_tune(tune_id)
    assert len(values) == len(before)
    for vrow in values:
        assert vrow["value_float"] == float(before[vrow["channel"]])


def test_identity_restore_commit_is_bit_exact(stack):
    catalog, store, archive, engine = stack
    before = critical_values(catalog, store)
    tune_id = engine.archive_tune()
    for name in catalog.scaling_setpoints():
        lo, hi = catalog.limits_for_channel(name)
        store.write(name, (lo + hi) / 2 + 0.01 * (hi - lo))
    store.write("SLIT:L1:position", 7)

    report = engine.restore_tune(tune_id, IDENTITY, mode="commit")

    assert report.factors.magnetic == 1.0
    assert report.factors.electrostatic == 1.0
    assert report.factors.rf_amplitude == 1.0
    assert all(e.applied for e in report.entries)
    assert not any(e.clamped for e in report.entries)
    after = critical_values(catalog, store)
    assert after == before
    assert store.read("SLIT:L1:position").value == 120000


def test_dry_run_mutates_nothing(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    version = store.version()
    beam_before = engine.beam
    report = engine.restore_tune(tune_id, HEAVIER, mode="dry_run")
    assert store.version() == version
    assert engine.beam == beam_before
    assert report.mode == "dry_run"
    assert report.entries
    assert all(not e.applied for e in report.entries)


def test_scaled_proposals_match_law_factors(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    factors = scale_factors(IDENTITY, HEAVIER)
    report = engine.restore_tune(tune_id, HEAVIER, mode="dry_run")
    assert report.factors.to_dict() == factors.to_dict()
    by_channel = {e.channel: e for e in report.entries}

    dipole = by_channel["MAG:D03:field"]
    assert dipole.scaling_law == "magnetic"
    assert dipole.factor == factors.magnetic
    deflector = by_channel["DEF:E02:voltage"]
    assert deflector.scaling_law == "electrostatic"
    assert deflector.factor == factors.electrostatic
    resonator = by_channel["RES:R042:amplitude"]
    assert resonator.scaling_law == "rf_amplitude"
    assert resonator.factor == factors.rf_amplitude
    slit = by_channel["SLIT:L1:position"]
    assert slit.scaling_law == "none"
    assert slit.factor == 1.0
    assert slit.proposed_value == 120000.0

    for entry in report.entries:
        if not entry.clamped and entry.scaling_law != "none":
            assert entry.proposed_value == entry.archived_value * entry.factor


def test_out_of_limit_proposals_clamp(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    # 10x the mass at constant E/u and q: every scaled factor is exactly 10
    big = BeamParameters(mass_amu=400.0, charge_state=12, energy_mev_u=7.0)
    report = engine.restore_tune(tune_id, big, mode="dry_run")
    by_channel = {e.channel: e for e in report.entries}
    for name in catalog.scaling_setpoints():
        entry = by_channel[name]
        lo, hi = catalog.limits_for_channel(name)
        assert entry.clamped
        assert entry.proposed_value == hi
    assert not by_channel["SLIT:L1:position"].clamped


def test_commit_applies_and_updates_beam(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    report = engine.restore_tune(tune_id, HEAVIER, mode="commit")
    assert engine.beam == HEAVIER
    for entry in report.entries:
        assert entry.applied
        assert store.read(entry.channel).value == pytest.approx(entry.proposed_value)
    next_id = engine.archive_tune()
    row, _ = archive.load_tune(next_id)
    assert row["mass_amu"] == 84.0


def test_commit_restore_is_idempotent(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    engine.restore_tune(tune_id, HEAVIER, mode="commit")
    first = critical_values(catalog, store)
    engine.restore_tune(tune_id, HEAVIER, mode="commit")
    assert critical_values(catalog, store) == first


def test_beta_warning_tracks_velocity_limit(stack):
    _, _, _, engine = stack
    tune_id = engine.archive_tune()
    assert engine.restore_tune(tune_id, IDENTITY, "dry_run").beta_warning is False
    assert engine.restore_tune(tune_id, FAST, "dry_run").beta_warning is True
    near = BeamParameters(mass_amu=40.0, charge_state=12, energy_mev_u=19.2)
    over = BeamParameters(mass_amu=40.0, charge_state=12, energy_mev_u=19.3)
    assert engine.restore_tune(tune_id, near, "dry_run").beta_warning is False
    assert engine.restore_tune(tune_id, over, "dry_run").beta_warning is True


def test_unknown_tune(stack):
    _, _, _, engine = stack
    with pytest.raises(UnknownTune):
        engine.restore_tune(999, IDENTITY, "dry_run")


def test_bad_mode_rejected(stack):
    _, _, _, engine = stack
    tune_id = engine.archive_tune()
    with pytest.raises(ValueError):
        engine.restore_tune(tune_id, IDENTITY, "apply")


def test_concurrent_commit_raises_restore_busy(stack):
    catalog, store, archive, engine = stack
    tune_id = engine.archive_tune()
    in_commit = threading.Event()
    release = threading.Event()
    orig_write = store.write

    def stalling_write(name, value, **kwargs):
        in_commit.set()
        release.wait(5)
        return orig_write(name, value, **kwargs)

    store.write = stalling_write
    worker = threading.Thread(
        target=engine.restore_tune, args=(tune_id, IDENTITY, "commit"), daemon=True
    )
    worker.start()
    try:
        assert in_commit.wait(5)
        with pytest.raises(RestoreBusy):
            engine.restore_tune(tune_id, IDENTITY, "commit")
        # dry runs stay available while a commit is in flight
        report = engine.restore_tune(tune_id, IDENTITY, "dry_run")
        assert report.mode == "dry_run"
    finally:
        release.set()
        worker.join(5)
        store.write = orig_write


def reduced_catalog_text():
    """Default catalog with one resonator removed end to end."""
    lines = []
    for line in default_catalog_text().splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        record = json.loads(stripped)
        if record.get("device_id") == "RES:R042":
            continue
        if record.get("type") == "golden_tune":
            record["values"] = {
                k: v for k, v in record["values"].items() if not k.startswith("RES:R042")
            }
        lines.append(json.dumps(record))
    return "\n".join(lines)


def test_missing_channel_reported_per_entry(tmp_path):
    full = parse_catalog(default_catalog_text())
    store = ChannelStore()
    full.create_channels(store)
    archive = ArchiveStore(tmp_path / "data")
    engine = TuneEngine(store, archive, full)
    for name, value in full.golden.items():
        store.write(name, value)
    tune_id = engine.archive_tune()
    archive.close()

    reduced = parse_catalog(reduced_catalog_text())
    new_store = ChannelStore()
    reduced.create_channels(new_store)
    archive = ArchiveStore(tmp_path / "data")
    try:
        engine = TuneEngine(new_store, archive, reduced)
        report = engine.restore_tune(tune_id, IDENTITY, mode="commit")
        missing = [e for e in report.entries if not e.applied]
        assert [e.channel for e in missing] == ["RES:R042:amplitude"]
        assert missing[0].note == "channel no longer exists"
        applied = [e for e in report.entries if e.applied]
        assert len(applied) == len(report.entries) - 1
        for entry in applied:
            assert new_store.read(entry.channel).value == entry.archived_value
    finally:
        archive.close()
