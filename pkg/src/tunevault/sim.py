"""Simulated beamline: readbacks slew toward setpoints, beam current and
transmission respond to mistuning, cryo sensors random-walk and alarm.

The transmission model is T = exp(-sum_i ((x_i - g_i) / w_i)^2) where x_i
are the readbacks of the scaling-relevant setpoints, g_i the golden values,
and w_i = 5% of each setpoint's limit span. It is maximal (1.0, noise
aside) exactly when the machine sits on the golden tune, and it degrades
smoothly with mistune distance, so a scaled restore visibly brings the
beam back once readbacks settle.

All randomness comes from one seeded generator, drawn in a fixed order
(sorted device ids, then channel order), and only where noise_sigma > 0,
so a noise-free device behaves bit-exactly and any run is reproducible
from (seed, setpoint timeline).
"""

from __future__ import annotations

import math
import random
import time

from .archive import ArchiveStore
from .catalog import Catalog, TRANSMISSION_WIDTH_FRACTION
from .channeldb import ChannelStore, ValueKind
from .errors import StorageFailure

CRYO_PULL_PER_S = 0.1  # relaxation rate toward base temperature
CRYO_CLEAR_MARGIN_K = 0.1  # alarm clears below threshold minus this
BEAM_CURRENT_FULL_ENA = 100.0  # current at transmission 1.0
MEASUREMENT_PERIOD_S = 1.0


class SimEngine:
    def __init__(
        self,
        catalog: Catalog,
        store: ChannelStore,
        archive: ArchiveStore | None = None,
        seed: int = 0,
        nominal_tick_s: float = 0.2,
        clock=time.time,
    ):
        self.catalog = catalog
        self.store = store
        self.archive = archive
        self.clock = clock
        self.rng = random.Random(seed)
        self.active_line = catalog.target_lines()[0] if catalog.target_lines() else None
        self.dropped_rows = 0
        self._measure_accum = 0.0
        self._in_alarm: dict[str, bool] = {}
        self._widths: dict[str, float] = {}
        for name in catalog.scaling_setpoints():
            lo, hi = catalog.limits_for_channel(name)
            self._widths[name] = TRANSMISSION_WIDTH_FRACTION * (hi - lo)
        if nominal_tick_s > 0:
            stale_ms = int(5 * nominal_tick_s * 1000)
            for spec in catalog.channel_specs.values():
                if spec.role == "readback":
                    store.set_stale_after(spec.name, stale_ms)

    # -- operating points ---------------------------------------------------

    def apply_golden_tune(self, settle: bool = True) -> None:
        """Drive every scaling setpoint to its golden value.

        With settle=True the readbacks, beam monitors, and cryo sensors are
        snapped to their equilibrium values instead of slewing there.
        """
        for name in sorted(self.catalog.golden):
            self.store.write(name, self.catalog.golden[name])
        if settle:
            self.settle()

    def settle(self) -> None:
        """Snap all readbacks to their setpoints, noise-free."""
        for dev in self._devices():
            for sp in dev.limits:
                if dev.device_class == "cryo_sensor":
                    continue
                rb = self.catalog.readback_of(sp)
                if rb:
                    self.store.write(rb, self.store.read(sp).value)
        for dev in self._devices():
            if dev.device_class == "cryo_sensor":
                ch = dev.channels[0]
                base = dev.limits[ch][0]
                self.store.write(ch, base)
                self._in_alarm[ch] = False
        self._update_beam_monitors(noise=False)

    def set_active_line(self, line: str) -> None:
        if line not in self.catalog.target_lines():
            raise ValueError(f"unknown target line {line!r}")
        self.active_line = line

    # -- simulation step ------------------------------------------------------

    def tick(self, dt_s: float) -> None:
        if dt_s <= 0:
            raise ValueError("dt_s must be > 0")
        for dev in self._devices():
            if dev.device_class == "cryo_sensor":
                self._tick_cryo(dev, dt_s)
            elif dev.device_class == "beam_monitor":
                continue  # handled after all readbacks move
            else:
                self._tick_readbacks(dev, dt_s)
        self._update_beam_monitors(noise=True)
        self._measure_accum += dt_s
        if self._measure_accum >= MEASUREMENT_PERIOD_S:
            self._measure_accum = 0.0
            self._record_measurement()

    def _devices(self):
        return [self.catalog.devices[k] for k in sorted(self.catalog.devices)]

    def _tick_readbacks(self, dev, dt_s: float) -> None:
        for sp in sorted(dev.limits):
            rb = self.catalog.readback_of(sp)
            if rb is None:
                continue
            target = self.store.read(sp).value
            current = self.store.read(rb).value
            max_move = dev.slew_per_s * dt_s
            delta = max(-max_move, min(max_move, target - current))
            value = current + delta
            if dev.noise_sigma > 0:
                value += self.rng.gauss(0.0, dev.noise_sigma)
            lo, hi = dev.limits[sp]
            value = max(lo, min(hi, value))
            if self.store.kind_of(rb) is ValueKind.INT64:
                moved = value - current
                step = int(round(moved))
                if step == 0 and moved != 0:
                    step = 1 if moved > 0 else -1
                value = int(max(lo, min(hi, current + step)))
            self.store.write(rb, value)

    def _tick_cryo(self, dev, dt_s: float) -> None:
        ch = dev.channels[0]
        base, threshold = dev.limits[ch]
        temp = self.store.read(ch).value
        temp += CRYO_PULL_PER_S * (base - temp) * dt_s
        if dev.noise_sigma > 0:
            temp += self.rng.gauss(0.0, dev.noise_sigma)
        in_alarm = self._in_alarm.get(ch, False)
        if temp > threshold and not in_alarm:
            self._in_alarm[ch] = True
            self.store.write(ch, temp, quality="alarm")
            self._insert_row(
                "cryo_alarms",
                {
                    "raised_at": self._now_ms(),
                    "sensor": ch,
                    "temperature_k": temp,
                    "threshold_k": threshold,
                },
            )
        elif in_alarm and temp < threshold - CRYO_CLEAR_MARGIN_K:
            self._in_alarm[ch] = False
            self.store.write(ch, temp, quality="ok")
        else:
            self.store.write(ch, temp, quality="alarm" if self._in_alarm.get(ch) else "ok")

    # -- beam model -----------------------------------------------------------

    def transmission(self) -> float:
        """Model transmission from the current readbacks."""
        total = 0.0
        for sp, width in self._widths.items():
            rb = self.catalog.readback_of(sp) or sp
            x = self.store.read(rb).value
            g = self.catalog.golden[sp]
            total += ((x - g) / width) ** 2
        return math.exp(-total)

    def _update_beam_monitors(self, noise: bool) -> None:
        t = self.transmission()
        for dev in self._devices():
            if dev.device_class != "beam_monitor":
                continue
            line = dev.device_id.split(":", 1)[1]
            active = line == self.active_line
            trans = t if active else 0.0
            current = trans * BEAM_CURRENT_FULL_ENA
            if active and noise and dev.noise_sigma > 0:
                current = max(0.0, current + self.rng.gauss(0.0, dev.noise_sigma))
            self.store.write(f"{dev.device_id}:transmission", trans)
            self.store.write(f"{dev.device_id}:current_enA", current)

    def _record_measurement(self) -> None:
        if self.active_line is None:
            return
        monitor = f"BMON:{self.active_line}"
        if monitor not in self.catalog.devices:
            return
        self._insert_row(
            "beam_measurement",
            {
                "taken_at": self._now_ms(),
                "target_line": self.active_line,
                "current_enA": self.store.read(f"{monitor}:current_enA").value,
                "transmission": self.store.read(f"{monitor}:transmission").value,
            },
        )

    # -- presets ---------------------------------------------------------------

    def lookup_preset(self, device_id: str, preset_name: str) -> int:
        return self.catalog.lookup_preset(device_id, preset_name)

    # -- helpers ----------------------------------------------------------------

    def _insert_row(self, table: str, row: dict) -> None:
        if self.archive is None:
            return
        try:
            self.archive.insert(table, row)
        except StorageFailure:
            self.dropped_rows += 1

    def _now_ms(self) -> int:
        return int(self.clock() * 1000)
