"""In-memory real-time database of named channels.

Channels are typed scalar process variables with hierarchical names like
``RES:R011:amplitude``. The store provides:

  * create/read/write with per-channel monotone ``seq`` counters and a
    store-wide monotone ``global_version`` stamped at every write,
  * glob reads (``*`` matches within one name segment, ``**`` spans
    segments),
  * ordered publish/subscribe: per matched channel, deltas arrive in seq
    order with no gaps from the subscription point; a consumer that falls
    more than ``max_queue`` deltas behind is disconnected with
    SubscriberOverflow instead of silently losing deltas,
  * consistent point-in-time snapshots.

Concurrency: one store lock guards all mutation, subscription bookkeeping
and snapshot capture. ``write_many`` applies a multi-channel update as one
indivisible batch, so a snapshot can never observe half of it (the cut
property the archiver and tune capture rely on). At desk scale (~10^3
channels) copying entries under the lock is cheap.

Durability is out of scope here; the archive store owns it.
"""

from __future__ import annotations

import re
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Iterator

from .errors import (
    DuplicateName,
    MalformedName,
    MalformedPattern,
    SubscriberOverflow,
    SubscriptionClosed,
    TypeMismatch,
    UnknownChannel,
)

NAME_RE = re.compile(r"[A-Z0-9]+(?::[A-Za-z0-9_]+){1,3}")
_PATTERN_SEGMENT_RE = re.compile(r"[A-Za-z0-9_*]+")

QUALITY_OK = "ok"
QUALITY_STALE = "stale"
QUALITY_ALARM = "alarm"

ROLE_SETPOINT = "setpoint"
ROLE_READBACK = "readback"

DEFAULT_SUBSCRIBER_QUEUE = 4096

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


class ValueKind(str, Enum):
    """Tag of a channel's scalar value; fixed at creation."""

    FLOAT64 = "float64"
    INT64 = "int64"
    ENUM = "enum"


@dataclass(frozen=True)
class ChannelRecord:
    """Immutable view of one channel at a point in time."""

    name: str
    kind: ValueKind
    value: float | int | str
    units: str
    role: str
    critical: bool
    quality: str
    seq: int
    updated_at: int
    global_version: int


@dataclass(frozen=True)
class SnapshotEntry:
    value: float | int | str
    seq: int
    updated_at: int


@dataclass(frozen=True)
class StoreSnapshot:
    """Consistent cut: entries reflect a prefix of the write history."""

    version: int
    entries: dict[str, SnapshotEntry]


def valid_name(name: str) -> bool:
    return bool(NAME_RE.fullmatch(name))


def compile_pattern(pattern: str) -> re.Pattern[str]:
    """Translate a channel glob into an anchored regex.

    ``*`` matches any run of characters within one ``:``-separated segment;
    a segment consisting of exactly ``**`` matches one or more whole
    segments.
    """
    if not pattern:
        raise MalformedPattern("empty pattern")
    pieces = []
    for segment in pattern.split(":"):
        if segment == "**":
            pieces.append(r"[^:]+(?::[^:]+)*")
            continue
        if not _PATTERN_SEGMENT_RE.fullmatch(segment):
            raise MalformedPattern(f"bad pattern segment {segment!r} in {pattern!r}")
        pieces.append("".join("[^:]*" if ch == "*" else re.escape(ch) for ch in segment))
    return re.compile(":".join(pieces) + r"\Z")


class _OverflowMark:
    pass


_OVERFLOW = _OverflowMark()


class Subscription:
    """Ordered delta stream for channels matching a glob.

    Deltas queue up to ``max_queue``; past that the subscription is marked
    overflowed: queued deltas still drain in order, then ``get`` raises
    SubscriberOverflow and the subscription is dead. Iteration stops cleanly
    on ``close()``.
    """

    def __init__(self, store: "ChannelStore", pattern: str, max_queue: int):
        self._store = store
        self.pattern = pattern
        self._regex = compile_pattern(pattern)
        self._max_queue = max_queue
        self._queue: deque = deque()
        self._cond = threading.Condition()
        self._overflowed = False
        self._closed = False
        self._match_cache: dict[str, bool] = {}

    def _matches(self, name: str) -> bool:
        hit = self._match_cache.get(name)
        if hit is None:
            hit = bool(self._regex.match(name))
            self._match_cache[name] = hit
        return hit

    def _publish(self, record: ChannelRecord) -> bool:
        """Called by the store under its lock. Returns False once dead."""
        with self._cond:
            if self._closed or self._overflowed:
                return False
            if len(self._queue) >= self._max_queue:
                self._overflowed = True
                self._queue.append(_OVERFLOW)
                self._cond.notify_all()
                return False
            self._queue.append(record)
            self._cond.notify_all()
            return True

    def get(self, timeout: float | None = None) -> ChannelRecord | None:
        """Next delta in order; None on timeout.

        Raises SubscriberOverflow once the queued backlog has drained past
        the overflow point, SubscriptionClosed after close().
        """
        with self._cond:
            if not self._queue and not self._cond.wait_for(
                lambda: self._queue or self._closed, timeout=timeout
            ):
                return None
            if not self._queue:
                raise SubscriptionClosed(self.pattern)
            item = self._queue.popleft()
        if item is _OVERFLOW:
            self.close()
            raise SubscriberOverflow(
                f"subscriber for {self.pattern!r} exceeded {self._max_queue} queued deltas"
            )
        return item

    def __iter__(self) -> Iterator[ChannelRecord]:
        while True:
            try:
                item = self.get()
            except SubscriptionClosed:
                return
            if item is not None:
                yield item

    def close(self) -> None:
        self._store._unsubscribe(self)
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class _Channel:
    __slots__ = (
        "name",
        "kind",
        "value",
        "units",
        "role",
        "critical",
        "quality",
        "seq",
        "updated_at",
        "global_version",
        "enum_choices",
        "stale_after_ms",
    )

    def __init__(self, name, kind, units, role, critical, enum_choices, created_at):
        self.name = name
        self.kind = kind
        self.units = units
        self.role = role
        self.critical = critical
        self.enum_choices = enum_choices
        self.quality = QUALITY_OK
        self.seq = 0
        self.updated_at = created_at
        self.global_version = 0
        self.stale_after_ms: int | None = None
        if kind is ValueKind.FLOAT64:
            self.value: float | int | str = 0.0
        elif kind is ValueKind.INT64:
            self.value = 0
        else:
            self.value = enum_choices[0]

    def record(self, now_ms: int) -> ChannelRecord:
        quality = self.quality
        if (
            quality == QUALITY_OK
            and self.stale_after_ms is not None
            and now_ms - self.updated_at > self.stale_after_ms
        ):
            quality = QUALITY_STALE
        return ChannelRecord(
            name=self.name,
            kind=self.kind,
            value=self.value,
            units=self.units,
            role=self.role,
            critical=self.critical,
            quality=quality,
            seq=self.seq,
            updated_at=self.updated_at,
            global_version=self.global_version,
        )


class ChannelStore:
    """The live store. Safe for concurrent readers, writers and snapshots."""

    def __init__(
        self,
        default_queue: int = DEFAULT_SUBSCRIBER_QUEUE,
        clock: Callable[[], float] = time.time,
    ):
        self._lock = threading.RLock()
        self._channels: dict[str, _Channel] = {}
        self._global_version = 0
        self._subs: list[Subscription] = []
        self._default_queue = default_queue
        self._clock = clock

    def _now_ms(self) -> int:
        return int(self._clock() * 1000)

    # -- lifecycle ------------------------------------------------------

    def create_channel(
        self,
        name: str,
        kind: ValueKind | str,
        units: str = "",
        role: str = ROLE_SETPOINT,
        critical: bool = False,
        enum_choices: Iterable[str] = (),
    ) -> ChannelRecord:
        kind = ValueKind(kind)
        choices = tuple(enum_choices)
        if kind is ValueKind.ENUM:
            if not choices:
                raise ValueError("enum channel requires a declared choice set")
            if len(set(choices)) != len(choices):
                raise ValueError("enum choices must be unique")
        elif choices:
            raise ValueError("enum_choices only apply to enum channels")
        if role not in (ROLE_SETPOINT, ROLE_READBACK):
            raise ValueError(f"bad role {role!r}")
        if not valid_name(name):
            raise MalformedName(name)
        with self._lock:
            if name in self._channels:
                raise DuplicateName(name)
            ch = _Channel(name, kind, units, role, critical, choices, self._now_ms())
            self._channels[name] = ch
            return ch.record(ch.updated_at)

    def set_stale_after(self, name: str, stale_after_ms: int | None) -> None:
        """Readbacks older than this read back as quality=stale."""
        with self._lock:
            self._require(name).stale_after_ms = stale_after_ms

    # -- reads ------------------------------------------------------------

    def read(self, name: str) -> ChannelRecord:
        with self._lock:
            return self._require(name).record(self._now_ms())

    def read_pattern(self, pattern: str) -> list[ChannelRecord]:
        regex = compile_pattern(pattern)
        with self._lock:
            now = self._now_ms()
            return [
                self._channels[name].record(now)
                for name in sorted(self._channels)
                if regex.match(name)
            ]

    def kind_of(self, name: str) -> ValueKind:
        with self._lock:
            return self._require(name).kind

    def enum_choices(self, name: str) -> tuple[str, ...]:
        with self._lock:
            return self._require(name).enum_choices

    def version(self) -> int:
        with self._lock:
            return self._global_version

    def __contains__(self, name: str) -> bool:
        with self._lock:
            return name in self._channels

    def __len__(self) -> int:
        with self._lock:
            return len(self._channels)

    # -- writes -----------------------------------------------------------

    def write(self, name: str, value, quality: str = QUALITY_OK) -> tuple[int, int]:
        """Returns (seq, global_version) of the applied write."""
        with self._lock:
            ch = self._require(name)
            coerced = _coerce(ch, value)
            return self._apply(ch, coerced, quality)

    def write_many(self, updates: Iterable[tuple[str, object]]) -> list[tuple[int, int]]:
        """Apply several writes as one indivisible batch.

        Validation is all-or-nothing: if any channel is unknown or any value
        mismatches its tag, nothing is written. Snapshots never observe a
        partially applied batch.
        """
        items = list(updates)
        with self._lock:
            coerced = [(self._require(n), _coerce(self._require(n), v)) for n, v in items]
            return [self._apply(ch, value, QUALITY_OK) for ch, value in coerced]

    def _apply(self, ch: _Channel, value, quality: str) -> tuple[int, int]:
        if quality not in (QUALITY_OK, QUALITY_ALARM):
            raise ValueError(f"bad quality {quality!r}")
        self._global_version += 1
        ch.seq += 1
        ch.value = value
        ch.quality = quality
        ch.updated_at = self._now_ms()
        ch.global_version = self._global_version
        record = ch.record(ch.updated_at)
        dead = [sub for sub in self._subs if sub._matches(ch.name) and not sub._publish(record)]
        for sub in dead:
            self._subs.remove(sub)
        return ch.seq, ch.global_version

    # -- pub/sub ----------------------------------------------------------

    def subscribe(self, pattern: str, max_queue: int | None = None) -> Subscription:
        sub = Subscription(self, pattern, max_queue or self._default_queue)
        with self._lock:
            self._subs.append(sub)
        return sub

    def _unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    # -- snapshots ----------------------------------------------------------

    def snapshot(self, selection: str = "all") -> StoreSnapshot:
        """Consistent cut of the store; ``critical_only`` filters by flag."""
        if selection not in ("all", "critical_only"):
            raise ValueError(f"bad snapshot selection {selection!r}")
        with self._lock:
            entries = {
                name: SnapshotEntry(ch.value, ch.seq, ch.updated_at)
                for name, ch in self._channels.items()
                if selection == "all" or ch.critical
            }
            return StoreSnapshot(version=self._global_version, entries=entries)

    def _require(self, name: str) -> _Channel:
        ch = self._channels.get(name)
        if ch is None:
            raise UnknownChannel(name)
        return ch


def _coerce(ch: _Channel, value):
    """Validate a write value against the channel tag. Ints widen to float
    for float64 channels (lossless at these magnitudes); nothing narrows."""
    if ch.kind is ValueKind.FLOAT64:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"{ch.name} expects float64, got {type(value).__name__}")
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise TypeMismatch(f"{ch.name} rejects non-finite float")
        return value
    if ch.kind is ValueKind.INT64:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"{ch.name} expects int64, got {type(value).__name__}")
        if not _INT64_MIN <= value <= _INT64_MAX:
            raise TypeMismatch(f"{ch.name} value out of int64 range")
        return value
    if not isinstance(value, str):
        raise TypeMismatch(f"{ch.name} expects one of {ch.enum_choices}")
    if value not in ch.enum_choices:
        raise TypeMismatch(f"{ch.name} rejects {value!r}; choices are {ch.enum_choices}")
    return value
