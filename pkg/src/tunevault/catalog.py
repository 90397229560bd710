"""Beamline device catalog: descriptors, presets, golden tune, beam.

The catalog source file (``catalog.src``) uses the same record grammar as
the archive table logs: one JSON object per line, UTF-8, dispatched on a
``type`` field:

    {"type": "device", "device_id": ..., "class": ..., "scaling_law": ...,
     "camac_address": {"crate": C, "slot": S}, "channels": [...],
     "limits": {"<channel>": [min, max]}, "slew_per_s": ..., "noise_sigma": ...}
    {"type": "stepper_preset", "device_id": ..., "preset_name": ..., "position_steps": ...}
    {"type": "golden_tune", "values": {"<channel>": <float>, ...}}
    {"type": "beam", "mass_amu": ..., "charge_state": ..., "energy_mev_u": ...}

Channel roles and kinds are derived, not stored: a channel listed in a
device's ``limits`` map is a setpoint (critical, archived), everything else
is a readback (not archived). Stepper channels are int64, all other device
channels float64. The one exception is cryo sensors, whose temperature
channel stays a readback while its limits pair carries (operating base,
alarm threshold).

Validation enforces the descriptor invariants: unique (crate, slot) pairs,
scaling law consistent with device class, limits ordered min < max, and a
golden tune covering exactly the scaling-relevant setpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .channeldb import ChannelStore, ROLE_READBACK, ROLE_SETPOINT, ValueKind, valid_name
from .errors import (
    DuplicateAddress,
    LimitOrderError,
    ParseError,
    UnknownDevice,
    UnknownPreset,
)
from .scaling import BeamParameters

CRATE_RANGE = range(1, 63)  # CAMAC standard addressing
SLOT_RANGE = range(1, 24)

DEVICE_CLASSES = (
    "resonator",
    "dipole_magnet",
    "quadrupole_magnet",
    "electrostatic_deflector",
    "stepper_insertion",
    "beam_monitor",
    "cryo_sensor",
)

LAW_FOR_CLASS = {
    "resonator": "rf_amplitude",
    "dipole_magnet": "magnetic",
    "quadrupole_magnet": "magnetic",
    "electrostatic_deflector": "electrostatic",
    "stepper_insertion": "none",
    "beam_monitor": "none",
    "cryo_sensor": "none",
}

# Engineering units by channel suffix (last name segment).
UNITS_FOR_SUFFIX = {
    "amplitude": "arb",
    "amplitude_rb": "arb",
    "field": "T",
    "field_rb": "T",
    "gradient": "T/m",
    "gradient_rb": "T/m",
    "voltage": "kV",
    "voltage_rb": "kV",
    "position": "steps",
    "position_rb": "steps",
    "current_enA": "enA",
    "transmission": "ratio",
    "temperature_k": "K",
}

TRANSMISSION_WIDTH_FRACTION = 0.05  # per-channel width = 5% of setpoint span

INJECTOR_PREFIX = "INJ:"


@dataclass(frozen=True)
class CamacAddress:
    crate: int
    slot: int


@dataclass(frozen=True)
class DeviceDescriptor:
    device_id: str
    device_class: str
    scaling_law: str
    camac_address: CamacAddress
    channels: tuple[str, ...]
    limits: dict[str, tuple[float, float]]
    slew_per_s: float
    noise_sigma: float


@dataclass(frozen=True)
class StepperPreset:
    device_id: str
    preset_name: str
    position_steps: int


@dataclass(frozen=True)
class ChannelSpec:
    """Derived per-channel creation info."""

    name: str
    device_id: str
    kind: ValueKind
    units: str
    role: str
    critical: bool
    scaling_law: str
    limits: tuple[float, float] | None


@dataclass
class Catalog:
    devices: dict[str, DeviceDescriptor]
    presets: dict[tuple[str, str], StepperPreset]
    golden: dict[str, float]
    beam: BeamParameters
    channel_specs: dict[str, ChannelSpec] = field(default_factory=dict)

    def __post_init__(self):
        if not self.channel_specs:
            self.channel_specs = {
                spec.name: spec
                for dev in self.devices.values()
                for spec in _derive_channel_specs(dev)
            }

    # -- summary ----------------------------------------------------------

    def count_class(self, device_class: str) -> int:
        return sum(1 for d in self.devices.values() if d.device_class == device_class)

    def count_injectors(self) -> int:
        return sum(1 for d in self.devices if d.startswith(INJECTOR_PREFIX))

    def target_lines(self) -> list[str]:
        return sorted(
            d.device_id.split(":", 1)[1]
            for d in self.devices.values()
            if d.device_class == "beam_monitor"
        )

    def summary(self) -> dict:
        return {
            "devices": len(self.devices),
            "channels": len(self.channel_specs),
            "by_class": {c: self.count_class(c) for c in DEVICE_CLASSES},
            "injectors": self.count_injectors(),
            "target_lines": self.target_lines(),
            "beam": self.beam.to_dict(),
        }

    # -- lookups ----------------------------------------------------------

    def scaling_setpoints(self) -> list[str]:
        """Setpoint channels whose law is not ``none``, sorted by name."""
        return sorted(
            s.name
            for s in self.channel_specs.values()
            if s.role == ROLE_SETPOINT and s.scaling_law != "none"
        )

    def law_for_channel(self, name: str) -> str:
        spec = self.channel_specs.get(name)
        return spec.scaling_law if spec else "none"

    def limits_for_channel(self, name: str) -> tuple[float, float] | None:
        spec = self.channel_specs.get(name)
        if spec is None or spec.role != ROLE_SETPOINT:
            return None
        return spec.limits

    def readback_of(self, setpoint: str) -> str | None:
        candidate = setpoint + "_rb"
        return candidate if candidate in self.channel_specs else None

    def lookup_preset(self, device_id: str, preset_name: str) -> int:
        if device_id not in self.devices:
            raise UnknownDevice(device_id)
        preset = self.presets.get((device_id, preset_name))
        if preset is None:
            raise UnknownPreset(f"{device_id}/{preset_name}")
        return preset.position_steps

    def create_channels(self, store: ChannelStore) -> None:
        for spec in self.channel_specs.values():
            store.create_channel(
                spec.name,
                spec.kind,
                units=spec.units,
                role=spec.role,
                critical=spec.critical,
            )


def _derive_channel_specs(dev: DeviceDescriptor) -> list[ChannelSpec]:
    specs = []
    for name in dev.channels:
        is_setpoint = name in dev.limits and dev.device_class != "cryo_sensor"
        kind = ValueKind.INT64 if dev.device_class == "stepper_insertion" else ValueKind.FLOAT64
        suffix = name.rsplit(":", 1)[1]
        specs.append(
            ChannelSpec(
                name=name,
                device_id=dev.device_id,
                kind=kind,
                units=UNITS_FOR_SUFFIX.get(suffix, ""),
                role=ROLE_SETPOINT if is_setpoint else ROLE_READBACK,
                critical=is_setpoint,
                scaling_law=dev.scaling_law if is_setpoint else "none",
                limits=dev.limits.get(name) if is_setpoint else None,
            )
        )
    return specs


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_catalog(text: str, source: str = "<catalog>") -> Catalog:
    devices: dict[str, DeviceDescriptor] = {}
    presets: dict[tuple[str, str], StepperPreset] = {}
    golden: dict[str, float] | None = None
    beam: BeamParameters | None = None
    addresses: dict[tuple[int, int], str] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source}:{lineno}: bad record: {exc}") from exc
        if not isinstance(record, dict) or "type" not in record:
            raise ParseError(f"{source}:{lineno}: record must be an object with a 'type'")
        rtype = record["type"]
        if rtype == "device":
            dev = _parse_device(record, f"{source}:{lineno}")
            if dev.device_id in devices:
                raise ParseError(f"{source}:{lineno}: duplicate device {dev.device_id}")
            key = (dev.camac_address.crate, dev.camac_address.slot)
            if key in addresses:
                raise DuplicateAddress(
                    f"{source}:{lineno}: crate {key[0]} slot {key[1]} already used by {addresses[key]}"
                )
            addresses[key] = dev.device_id
            devices[dev.device_id] = dev
        elif rtype == "stepper_preset":
            preset = _parse_preset(record, f"{source}:{lineno}")
            if (preset.device_id, preset.preset_name) in presets:
                raise ParseError(f"{source}:{lineno}: duplicate preset {preset.preset_name}")
            presets[(preset.device_id, preset.preset_name)] = preset
        elif rtype == "golden_tune":
            if golden is not None:
                raise ParseError(f"{source}:{lineno}: more than one golden_tune record")
            values = record.get("values")
            if not isinstance(values, dict):
                raise ParseError(f"{source}:{lineno}: golden_tune needs a 'values' map")
            golden = {}
            for name, value in values.items():
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ParseError(f"{source}:{lineno}: golden value for {name} not numeric")
                golden[name] = float(value)
        elif rtype == "beam":
            if beam is not None:
                raise ParseError(f"{source}:{lineno}: more than one beam record")
            try:
                beam = BeamParameters.from_dict(
                    {k: v for k, v in record.items() if k != "type"}
                )
            except Exception as exc:
                raise ParseError(f"{source}:{lineno}: bad beam record: {exc}") from exc
        else:
            raise ParseError(f"{source}:{lineno}: unknown record type {rtype!r}")

    if not devices:
        raise ParseError(f"{source}: no device records")
    if beam is None:
        raise ParseError(f"{source}: missing beam record")
    if golden is None:
        raise ParseError(f"{source}: missing golden_tune record")

    catalog = Catalog(devices=devices, presets=presets, golden=golden, beam=beam)
    _validate(catalog, source)
    return catalog


def load_catalog(path: str | Path, store: ChannelStore | None = None) -> Catalog:
    """Parse a catalog file and (optionally) create its channels."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read catalog {path}: {exc}") from exc
    catalog = parse_catalog(text, source=str(path))
    if store is not None:
        catalog.create_channels(store)
    return catalog


def _parse_device(record: dict, where: str) -> DeviceDescriptor:
    required = {
        "device_id",
        "class",
        "scaling_law",
        "camac_address",
        "channels",
        "limits",
        "slew_per_s",
        "noise_sigma",
    }
    missing = required - set(record)
    if missing:
        raise ParseError(f"{where}: device record missing {sorted(missing)}")
    device_id = record["device_id"]
    device_class = record["class"]
    law = record["scaling_law"]
    if device_class not in DEVICE_CLASSES:
        raise ParseError(f"{where}: unknown device class {device_class!r}")
    if law != LAW_FOR_CLASS[device_class]:
        raise ParseError(
            f"{where}: class {device_class} requires scaling_law "
            f"{LAW_FOR_CLASS[device_class]!r}, got {law!r}"
        )
    addr = record["camac_address"]
    if not isinstance(addr, dict) or set(addr) != {"crate", "slot"}:
        raise ParseError(f"{where}: camac_address must be {{crate, slot}}")
    crate, slot = addr["crate"], addr["slot"]
    if crate not in CRATE_RANGE or slot not in SLOT_RANGE:
        raise ParseError(
            f"{where}: camac address out of range (crate 1..62, slot 1..23): {crate}/{slot}"
        )
    channels = record["channels"]
    if not isinstance(channels, list) or not channels:
        raise ParseError(f"{where}: device {device_id} lists no channels")
    for name in channels:
        if not isinstance(name, str) or not valid_name(name):
            raise ParseError(f"{where}: malformed channel name {name!r}")
        if not name.startswith(device_id + ":"):
            raise ParseError(f"{where}: channel {name} not under device {device_id}")
    if len(set(channels)) != len(channels):
        raise ParseError(f"{where}: duplicate channel names on {device_id}")
    limits_raw = record["limits"]
    if not isinstance(limits_raw, dict):
        raise ParseError(f"{where}: limits must be a map channel -> [min, max]")
    limits: dict[str, tuple[float, float]] = {}
    for name, pair in limits_raw.items():
        if name not in channels:
            raise ParseError(f"{where}: limits for unknown channel {name}")
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ParseError(f"{where}: limits for {name} must be [min, max]")
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise LimitOrderError(f"{where}: {name} limits not ordered: min={lo} max={hi}")
        limits[name] = (lo, hi)
    return DeviceDescriptor(
        device_id=device_id,
        device_class=device_class,
        scaling_law=law,
        camac_address=CamacAddress(crate=crate, slot=slot),
        channels=tuple(channels),
        limits=limits,
        slew_per_s=float(record["slew_per_s"]),
        noise_sigma=float(record["noise_sigma"]),
    )


def _parse_preset(record: dict, where: str) -> StepperPreset:
    missing = {"device_id", "preset_name", "position_steps"} - set(record)
    if missing:
        raise ParseError(f"{where}: stepper_preset missing {sorted(missing)}")
    steps = record["position_steps"]
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ParseError(f"{where}: position_steps must be an integer")
    return StepperPreset(
        device_id=record["device_id"],
        preset_name=record["preset_name"],
        position_steps=steps,
    )


def _validate(catalog: Catalog, source: str) -> None:
    seen_channels: dict[str, str] = {}
    for dev in catalog.devices.values():
        for name in dev.channels:
            if name in seen_channels:
                raise ParseError(
                    f"{source}: channel {name} owned by both {seen_channels[name]} "
                    f"and {dev.device_id}"
                )
            seen_channels[name] = dev.device_id
    for (device_id, preset_name), preset in catalog.presets.items():
        dev = catalog.devices.get(device_id)
        if dev is None:
            raise ParseError(f"{source}: preset {preset_name} for unknown device {device_id}")
        if dev.device_class != "stepper_insertion":
            raise ParseError(
                f"{source}: preset {preset_name} on non-stepper device {device_id}"
            )
    scaling = set(catalog.scaling_setpoints())
    missing = scaling - set(catalog.golden)
    if missing:
        raise ParseError(
            f"{source}: golden_tune missing scaling setpoints: {sorted(missing)[:5]}..."
            if len(missing) > 5
            else f"{source}: golden_tune missing scaling setpoints: {sorted(missing)}"
        )
    extra = set(catalog.golden) - scaling
    if extra:
        raise ParseError(f"{source}: golden_tune covers unknown setpoints: {sorted(extra)[:5]}")
    for name, value in catalog.golden.items():
        lo, hi = catalog.channel_specs[name].limits
        if not lo <= value <= hi:
            raise ParseError(f"{source}: golden value for {name} outside limits [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# Default catalog
# ---------------------------------------------------------------------------

def _scatter(i: int, lo: float, hi: float) -> float:
    """Deterministic low-discrepancy spread over [lo, hi]."""
    frac = (i * 0.6180339887498949) % 1.0
    return round(lo + (hi - lo) * frac, 6)


def default_catalog_text() -> str:
    """The facility used for tests and fresh deployments: 64 resonators in
    8 sections, 3 injector platforms, magnets, deflectors, insertion
    steppers, one beam monitor per target line, and cryo sensors."""
    records: list[dict] = []
    golden: dict[str, float] = {}
    address_counter = 0

    def next_address() -> dict:
        nonlocal address_counter
        addr = {"crate": 1 + address_counter // 23, "slot": 1 + address_counter % 23}
        address_counter += 1
        return addr

    def device(device_id, device_class, channels, limits, slew, noise):
        records.append(
            {
                "type": "device",
                "device_id": device_id,
                "class": device_class,
                "scaling_law": LAW_FOR_CLASS[device_class],
                "camac_address": next_address(),
                "channels": channels,
                "limits": limits,
                "slew_per_s": slew,
                "noise_sigma": noise,
            }
        )

    # 64 superconducting resonators: sections 1..8, positions 1..8.
    index = 0
    for section in range(1, 9):
        for position in range(1, 9):
            dev_id = f"RES:R0{section}{position}"
            sp = f"{dev_id}:amplitude"
            device(
                dev_id,
                "resonator",
                [sp, f"{dev_id}:amplitude_rb"],
                {sp: [0.0, 1.0]},
                slew=0.5,
                noise=0.0005,
            )
            golden[sp] = _scatter(index, 0.35, 0.85)
            index += 1

    # 3 ion source injector platforms.
    for i, name in enumerate(("ECR1", "ECR2", "TANDEM")):
        dev_id = f"INJ:{name}"
        sp = f"{dev_id}:voltage"
        device(
            dev_id,
            "electrostatic_deflector",
            [sp, f"{dev_id}:voltage_rb"],
            {sp: [0.0, 350.0]},
            slew=60.0,
            noise=0.175,
        )
        golden[sp] = _scatter(i, 180.0, 320.0)

    # Bending dipoles and focusing quadrupoles.
    for i in range(1, 9):
        dev_id = f"MAG:D{i:02d}"
        sp = f"{dev_id}:field"
        device(dev_id, "dipole_magnet", [sp, f"{dev_id}:field_rb"], {sp: [0.0, 2.0]}, 0.5, 0.001)
        golden[sp] = _scatter(i, 0.5, 1.6)
    for i in range(1, 17):
        dev_id = f"MAG:Q{i:02d}"
        sp = f"{dev_id}:gradient"
        device(
            dev_id, "quadrupole_magnet", [sp, f"{dev_id}:gradient_rb"], {sp: [0.0, 25.0]}, 5.0, 0.0125
        )
        golden[sp] = _scatter(i, 4.0, 20.0)

    # Electrostatic beamline deflectors.
    for i in range(1, 5):
        dev_id = f"DEF:E{i:02d}"
        sp = f"{dev_id}:voltage"
        device(
            dev_id,
            "electrostatic_deflector",
            [sp, f"{dev_id}:voltage_rb"],
            {sp: [0.0, 300.0]},
            60.0,
            0.15,
        )
        golden[sp] = _scatter(i, 80.0, 240.0)

    # Insertion devices (slits, stripper foil) with named operating positions.
    stepper_presets = {
        "SLIT:L1": {"out": 5000, "in": 120000, "half": 62000},
        "SLIT:L2": {"out": 5000, "in": 118000, "half": 60000},
        "SLIT:L3": {"out": 4000, "in": 121000, "half": 61000},
        "FOIL:F1": {"out": 2000, "in": 90000},
    }
    for dev_id, preset_map in stepper_presets.items():
        sp = f"{dev_id}:position"
        device(
            dev_id,
            "stepper_insertion",
            [sp, f"{dev_id}:position_rb"],
            {sp: [0, 200000]},
            40000.0,
            0.0,
        )
        for preset_name, steps in preset_map.items():
            records.append(
                {
                    "type": "stepper_preset",
                    "device_id": dev_id,
                    "preset_name": preset_name,
                    "position_steps": steps,
                }
            )

    # One beam monitor per target line.
    for line in ("T1", "T2", "T3"):
        dev_id = f"BMON:{line}"
        device(
            dev_id,
            "beam_monitor",
            [f"{dev_id}:current_enA", f"{dev_id}:transmission"],
            {},
            0.0,
            0.5,
        )

    # Cryo sensors; limits carry (operating base, alarm threshold).
    for i in range(1, 5):
        dev_id = f"CRYO:S{i}"
        ch = f"{dev_id}:temperature_k"
        device(dev_id, "cryo_sensor", [ch], {ch: [4.2, 4.6]}, 0.0, 0.02)

    records.append({"type": "golden_tune", "values": golden})
    records.append(
        {"type": "beam", "mass_amu": 40.0, "charge_state": 12, "energy_mev_u": 7.0}
    )
    return "\n".join(json.dumps(r) for r in records) + "\n"


def write_default_catalog(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(default_catalog_text(), encoding="utf-8")
    return path
