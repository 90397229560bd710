"""Tune archive and scaled restore.

A tune is the consistent set of all critical setpoints, stored with the
beam it was established for. Restoring onto a new beam multiplies each
archived value by the factor of its scaling law (magnetic, electrostatic,
rf_amplitude, or none), clamps the result into device limits, and either
reports the diff (dry_run) or writes it to the live store (commit).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from .archive import ArchiveStore
from .catalog import Catalog
from .channeldb import ChannelStore, ValueKind
from .errors import RestoreBusy, UnknownChannel
from .scaling import BeamParameters, ScaleFactorSet, beta_exceeds_limit, scale_factors

MODES = ("dry_run", "commit")


@dataclass(frozen=True)
class RestoreEntry:
    channel: str
    scaling_law: str
    archived_value: float
    factor: float
    proposed_value: float
    clamped: bool
    applied: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "scaling_law": self.scaling_law,
            "archived_value": self.archived_value,
            "factor": self.factor,
            "proposed_value": self.proposed_value,
            "clamped": self.clamped,
            "applied": self.applied,
            "note": self.note,
        }


@dataclass(frozen=True)
class RestoreReport:
    tune_id: int
    old_beam: BeamParameters
    new_beam: BeamParameters
    mode: str
    factors: ScaleFactorSet
    beta_warning: bool
    entries: tuple[RestoreEntry, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "tune_id": self.tune_id,
            "old_beam": self.old_beam.to_dict(),
            "new_beam": self.new_beam.to_dict(),
            "mode": self.mode,
            "factors": self.factors.to_dict(),
            "beta_warning": self.beta_warning,
            "n_clamped": sum(1 for e in self.entries if e.clamped),
            "n_applied": sum(1 for e in self.entries if e.applied),
            "entries": [e.to_dict() for e in self.entries],
        }


class TuneEngine:
    def __init__(
        self,
        channels: ChannelStore,
        archive: ArchiveStore,
        catalog: Catalog,
        beam: BeamParameters | None = None,
        clock=time.time,
    ):
        self.channels = channels
        self.archive = archive
        self.catalog = catalog
        self.clock = clock
        self._beam = beam if beam is not None else catalog.beam
        self._beam_lock = threading.Lock()
        self._commit_lock = threading.Lock()

    @property
    def beam(self) -> BeamParameters:
        with self._beam_lock:
            return self._beam

    def set_beam(self, beam: BeamParameters) -> None:
        with self._beam_lock:
            self._beam = beam

    # -- archive ---------------------------------------------------------------

    def archive_tune(self, label: str | None = None, provenance: str = "manual") -> int:
        """Capture a consistent cut of every critical setpoint as a tune."""
        beam = self.beam
        now_ms = int(self.clock() * 1000)
        if not label:
            label = f"{provenance}-{now_ms}"
        snap = self.channels.snapshot("critical_only")
        values = []
        for channel in sorted(snap.entries):
            value = snap.entries[channel].value
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                continue  # non-numeric channels cannot be scaled back
            values.append((channel, self.catalog.law_for_channel(channel), float(value)))
        return self.archive.persist_tune(label, provenance, beam, values, now_ms)

    # -- restore -----------------------------------------------------------------

    def restore_tune(self, tune_id: int, new_beam: BeamParameters, mode: str) -> RestoreReport:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        row, value_rows = self.archive.load_tune(tune_id)
        old_beam = BeamParameters(
            mass_amu=row["mass_amu"],
            charge_state=row["charge_state"],
            energy_mev_u=row["energy_mev_u"],
        )
        factors = scale_factors(old_beam, new_beam)
        warning = beta_exceeds_limit(new_beam)

        proposals = []
        for vrow in value_rows:
            channel = vrow["channel"]
            law = vrow["scaling_law"]
            archived = vrow["value_float"]
            factor = factors.for_law(law)
            proposed = archived * factor
            clamped = False
            limits = self.catalog.limits_for_channel(channel)
            if limits is not None:
                lo, hi = limits
                if proposed < lo:
                    proposed, clamped = lo, True
                elif proposed > hi:
                    proposed, clamped = hi, True
            if channel in self.channels and self.channels.kind_of(channel) is ValueKind.INT64:
                proposed = float(int(round(proposed)))
            proposals.append((channel, law, archived, factor, proposed, clamped))

        if mode == "dry_run":
            entries = tuple(
                RestoreEntry(ch, law, a, f, p, clamped, applied=False)
                for ch, law, a, f, p, clamped in proposals
            )
            return RestoreReport(tune_id, old_beam, new_beam, mode, factors, warning, entries)

        if not self._commit_lock.acquire(blocking=False):
            raise RestoreBusy("another commit-mode restore is in flight")
        try:
            entries = []
            for ch, law, archived, factor, proposed, clamped in proposals:
                try:
                    if ch in self.channels and self.channels.kind_of(ch) is ValueKind.INT64:
                        self.channels.write(ch, int(proposed))
                    else:
                        self.channels.write(ch, proposed)
                    entries.append(
                        RestoreEntry(ch, law, archived, factor, proposed, clamped, applied=True)
                    )
                except UnknownChannel:
                    entries.append(
                        RestoreEntry(
                            ch, law, archived, factor, proposed, clamped,
                            applied=False, note="channel no longer exists",
                        )
                    )
                except Exception as exc:
                    entries.append(
                        RestoreEntry(
                            ch, law, archived, factor, proposed, clamped,
                            applied=False, note=f"write failed: {exc}",
                        )
                    )
            self.set_beam(new_beam)
            return RestoreReport(
                tune_id, old_beam, new_beam, mode, factors, warning, tuple(entries)
            )
        finally:
            self._commit_lock.release()
