"""Catalog parsing, validation, and channel derivation."""

import json

import pytest

from tunevault.catalog import (
    default_catalog_text,
    load_catalog,
    parse_catalog,
    write_default_catalog,
)
from tunevault.channeldb import ChannelStore, ValueKind
from tunevault.errors import (
    DuplicateAddress,
    LimitOrderError,
    ParseError,
    UnknownDevice,
    UnknownPreset,
)


@pytest.fixture(scope="module")
def catalog():
    return parse_catalog(default_catalog_text())


MINIMAL = """
{"type": "device", "device_id": "MAG:D01", "class": "dipole_magnet", "scaling_law": "magnetic", "camac_address": {"crate": 1, "slot": 1}, "channels": ["MAG:D01:field", "MAG:D01:field_rb"], "limits": {"MAG:D01:field": [0.0, 2.0]}, "slew_per_s": 0.5, "noise_sigma": 0.0}
{"type": "golden_tune", "values": {"MAG:D01:field": 1.0}}
{"type": "beam", "mass_amu": 40.0, "charge_state": 12, "energy_mev_u": 7.0}
"""


def test_default_catalog_counts(catalog):
    assert catalog.count_class("resonator") == 64
    assert catalog.count_injectors() == 3
    assert catalog.target_lines() == ["T1", "T2", "T3"]
    assert catalog.count_class("beam_monitor") >= 3


def test_catalog_creates_channels(catalog):
    store = ChannelStore()
    catalog.create_channels(store)
    assert len(store.read_pattern("RES:*:amplitude")) == 64
    assert len(store.read_pattern("RES:*:amplitude_rb")) == 64
    rec = store.read("SLIT:L1:position")
    assert rec.kind is ValueKind.INT64
    assert rec.critical is True
    rec = store.read("CRYO:S1:temperature_k")
    assert rec.role == "readback"
    assert rec.critical is False
    assert rec.units == "K"


def test_golden_values_inside_limits(catalog):
    for name, value in catalog.golden.items():
        lo, hi = catalog.limits_for_channel(name)
        assert lo <= value <= hi


def test_golden_covers_exactly_the_scaling_setpoints(catalog):
    assert set(catalog.golden) == set(catalog.scaling_setpoints())
    # steppers are geometry: never scaled, never in the golden tune
    assert "SLIT:L1:position" not in catalog.golden
    assert catalog.law_for_channel("SLIT:L1:position") == "none"


def test_law_per_class(catalog):
    assert catalog.law_for_channel("RES:R011:amplitude") == "rf_amplitude"
    assert catalog.law_for_channel("MAG:D01:field") == "magnetic"
    assert catalog.law_for_channel("MAG:Q01:gradient") == "magnetic"
    assert catalog.law_for_channel("DEF:E01:voltage") == "electrostatic"
    assert catalog.law_for_channel("INJ:ECR1:voltage") == "electrostatic"
    # readbacks are never scaled
    assert catalog.law_for_channel("RES:R011:amplitude_rb") == "none"


def test_readback_mapping(catalog):
    assert catalog.readback_of("RES:R011:amplitude") == "RES:R011:amplitude_rb"
    assert catalog.readback_of("BMON:T1:current_enA") is None


def test_camac_addresses_unique(catalog):
    seen = set()
    for dev in catalog.devices.values():
        addr = (dev.camac_address.crate, dev.camac_address.slot)
        assert addr not in seen
        assert 1 <= addr[0] <= 62 and 1 <= addr[1] <= 23
        seen.add(addr)


def test_preset_lookup(catalog):
    steps = catalog.lookup_preset("SLIT:L1", "out")
    assert isinstance(steps, int)
    with pytest.raises(UnknownPreset):
        catalog.lookup_preset("SLIT:L1", "nonexistent")
    with pytest.raises(UnknownDevice):
        catalog.lookup_preset("NO:device", "out")


def test_load_catalog_from_file(tmp_path):
    path = write_default_catalog(tmp_path / "catalog.src")
    store = ChannelStore()
    catalog = load_catalog(path, store)
    assert catalog.count_class("resonator") == 64
    assert len(store) == len(catalog.channel_specs)


# -- parse failures ----------------------------------------------------------------

def test_empty_catalog_rejected():
    with pytest.raises(ParseError):
        parse_catalog("")
    with pytest.raises(ParseError):
        parse_catalog("\n# only a comment\n")


def test_duplicate_address_rejected():
    lines = MINIMAL.strip().splitlines()
    device = json.loads(lines[0])
    device["device_id"] = "MAG:D02"
    device["channels"] = ["MAG:D02:field", "MAG:D02:field_rb"]
    device["limits"] = {"MAG:D02:field": [0.0, 2.0]}  # same crate/slot as D01
    with pytest.raises(DuplicateAddress):
        parse_catalog(lines[0] + "\n" + json.dumps(device) + "\n" + "\n".join(lines[1:]))


def test_limit_order_rejected():
    text = MINIMAL.replace("[0.0, 2.0]", "[2.0, 0.0]")
    with pytest.raises(LimitOrderError):
        parse_catalog(text)


def test_law_class_consistency_enforced():
    text = MINIMAL.replace('"scaling_law": "magnetic"', '"scaling_law": "rf_amplitude"')
    with pytest.raises(ParseError):
        parse_catalog(text)


def test_unknown_class_rejected():
    text = MINIMAL.replace('"class": "dipole_magnet"', '"class": "warp_coil"')
    with pytest.raises(ParseError):
        parse_catalog(text)


def test_crate_range_enforced():
    text = MINIMAL.replace('{"crate": 1, "slot": 1}', '{"crate": 63, "slot": 1}')
    with pytest.raises(ParseError):
        parse_catalog(text)
    text = MINIMAL.replace('{"crate": 1, "slot": 1}', '{"crate": 1, "slot": 24}')
    with pytest.raises(ParseError):
        parse_catalog(text)


def test_missing_beam_or_golden_rejected():
    lines = MINIMAL.strip().splitlines()
    with pytest.raises(ParseError):
        parse_catalog("\n".join(l for l in lines if '"beam"' not in l))
    with pytest.raises(ParseError):
        parse_catalog("\n".join(l for l in lines if "golden" not in l))


def test_golden_coverage_enforced():
    text = MINIMAL.replace('{"MAG:D01:field": 1.0}', "{}")
    with pytest.raises(ParseError):
        parse_catalog(text)
    text = MINIMAL.replace(
        '{"MAG:D01:field": 1.0}', '{"MAG:D01:field": 1.0, "NO:such": 1.0}'
    )
    with pytest.raises(ParseError):
        parse_catalog(text)
    text = MINIMAL.replace('{"MAG:D01:field": 1.0}', '{"MAG:D01:field": 99.0}')
    with pytest.raises(ParseError):
        parse_catalog(text)


def test_malformed_json_line_rejected():
    with pytest.raises(ParseError):
        parse_catalog(MINIMAL + "\n{not json}\n")


def test_preset_must_reference_stepper():
    preset = json.dumps({
        "type": "stepper_preset", "device_id": "MAG:D01",
        "preset_name": "out", "position_steps": 100,
    })
    with pytest.raises(ParseError):
        parse_catalog(MINIMAL + preset + "\n")


def test_channels_must_belong_to_device():
    text = MINIMAL.replace('"MAG:D01:field_rb"', '"OTHER:dev:field_rb"')
    with pytest.raises(ParseError):
        parse_catalog(text)
