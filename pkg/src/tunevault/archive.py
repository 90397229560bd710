"""Durable whitelisted-table store backed by append-only record logs.

Layout under ``data_dir``::

    LOCK                    single-writer advisory lock
    tables/<name>.log       one JSON object per line, UTF-8, newline-terminated
    tables/<name>.idx       sidecar offset index (rebuilt if missing or stale)

Index file format: first line is a JSON header
``{"log_bytes": N, "next_id": M}``, then one ``id offset`` line per live row
(child tables append the parent id: ``id offset parent``). The index lets a
reopened store resolve a row id to a byte offset without parsing the log, so
by-id loads touch only the lines they need.

Write protocol for multi-row families (snapshot, tune): children are
appended and fsynced first, then the parent row is appended and fsynced as
the commit point. On reopen, children whose parent row is absent are
orphans left by a crash; they are dropped from the index and never served.
Parent ids are allocated above any id referenced from the child log, so an
orphan's dangling parent id is never reused by a later commit.

Floats are serialized as shortest round-trip decimals; timestamps are UTC
milliseconds since the epoch, stored as integers.
"""

from __future__ import annotations

import io
import json
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    SchemaMismatch,
    StorageFailure,
    UnknownSnapshot,
    UnknownTable,
    UnknownTune,
)

try:
    import fcntl
except ImportError:  # non-POSIX fallback, lock degrades to exclusive create
    fcntl = None

COLUMN_TYPES = ("text", "int", "float", "timestamp", "bool")


@dataclass(frozen=True)
class TableSchema:
    table: str
    columns: tuple[tuple[str, str], ...]
    nullable: frozenset[str] = frozenset()

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def type_of(self, column: str) -> str | None:
        for name, ctype in self.columns:
            if name == column:
                return ctype
        return None

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "columns": [{"name": n, "type": t} for n, t in self.columns],
        }


def _schema(table: str, *columns: tuple[str, str], nullable: tuple[str, ...] = ()) -> TableSchema:
    return TableSchema(table=table, columns=tuple(columns), nullable=frozenset(nullable))


TABLES: dict[str, TableSchema] = {
    s.table: s
    for s in (
        _schema(
            "resonators",
            ("id", "int"),
            ("device_id", "text"),
            ("crate", "int"),
            ("slot", "int"),
            ("nominal_amplitude", "float"),
            ("status", "text"),
        ),
        _schema(
            "beam_measurement",
            ("id", "int"),
            ("taken_at", "timestamp"),
            ("target_line", "text"),
            ("current_enA", "float"),
            ("transmission", "float"),
        ),
        _schema(
            "cryo_alarms",
            ("id", "int"),
            ("raised_at", "timestamp"),
            ("sensor", "text"),
            ("temperature_k", "float"),
            ("threshold_k", "float"),
        ),
        _schema(
            "camac_crates",
            ("id", "int"),
            ("crate", "int"),
            ("description", "text"),
            ("powered", "bool"),
        ),
        _schema(
            "camac_modules",
            ("id", "int"),
            ("crate", "int"),
            ("slot", "int"),
            ("device_id", "text"),
            ("module_type", "text"),
        ),
        _schema(
            "stepper_presets",
            ("id", "int"),
            ("device_id", "text"),
            ("preset_name", "text"),
            ("position_steps", "int"),
        ),
        _schema(
            "snapshots",
            ("id", "int"),
            ("taken_at", "timestamp"),
            ("trigger", "text"),
            ("store_version", "int"),
            ("n_values", "int"),
        ),
        _schema(
            "snapshot_values",
            ("id", "int"),
            ("snapshot_id", "int"),
            ("channel", "text"),
            ("value_float", "float"),
            ("value_int", "int"),
            ("value_text", "text"),
            ("seq", "int"),
            nullable=("value_float", "value_int", "value_text"),
        ),
        _schema(
            "tunes",
            ("id", "int"),
            ("label", "text"),
            ("created_at", "timestamp"),
            ("provenance", "text"),
            ("mass_amu", "float"),
            ("charge_state", "int"),
            ("energy_mev_u", "float"),
        ),
        _schema(
            "tune_values",
            ("id", "int"),
            ("tune_id", "int"),
            ("channel", "text"),
            ("scaling_law", "text"),
            ("value_float", "float"),
        ),
    )
}

# child table -> (parent table, foreign key column)
FAMILY: dict[str, tuple[str, str]] = {
    "snapshot_values": ("snapshots", "snapshot_id"),
    "tune_values": ("tunes", "tune_id"),
}
FAMILY_BY_PARENT = {parent: (child, fk) for child, (parent, fk) in FAMILY.items()}


class _Table:
    """In-memory bookkeeping for one table log."""

    def __init__(self, schema: TableSchema, log_path: Path, idx_path: Path):
        self.schema = schema
        self.log_path = log_path
        self.idx_path = idx_path
        self.offsets: dict[int, int] = {}
        self.order: list[int] = []
        self.children: dict[int, list[int]] = {}
        self.parents: dict[int, int] = {}
        self.rows: dict[int, dict] = {}
        self.fully_loaded = False
        self.next_id = 1
        self.log_bytes = 0
        self.append_fh: io.BufferedWriter | None = None
        self.read_fh: io.BufferedReader | None = None


class ArchiveStore:
    """Append-only table store with crash recovery and by-id indexes.

    `crash_hook`, when set, is called with a stage label at the injection
    points of the family-commit protocol; a raising hook aborts the commit
    mid-flight, which is how the recovery tests simulate power loss.
    """

    def __init__(self, data_dir: str | Path, crash_hook=None):
        self.data_dir = Path(data_dir)
        self.crash_hook = crash_hook
        self.stats = {
            "lines_parsed": 0,
            "index_rebuilds": 0,
            "tail_scans": 0,
            "orphans_dropped": 0,
            "torn_lines_truncated": 0,
        }
        self._lock = threading.RLock()
        self._closed = False
        self._tables: dict[str, _Table] = {}
        tables_dir = self.data_dir / "tables"
        try:
            tables_dir.mkdir(parents=True, exist_ok=True)
            self._lock_fh = open(self.data_dir / "LOCK", "a+")
            if fcntl is not None:
                try:
                    fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
                except OSError as exc:
                    self._lock_fh.close()
                    raise StorageFailure(f"{self.data_dir} is locked by another writer") from exc
        except OSError as exc:
            raise StorageFailure(f"cannot open archive at {self.data_dir}: {exc}") from exc
        for name, schema in TABLES.items():
            self._tables[name] = _Table(
                schema, tables_dir / f"{name}.log", tables_dir / f"{name}.idx"
            )
        self._recover()

    # -- lifecycle ----------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            for table in self._tables.values():
                self._write_index(table)
                if table.append_fh:
                    table.append_fh.close()
                    table.append_fh = None
                if table.read_fh:
                    table.read_fh.close()
                    table.read_fh = None
            if fcntl is not None:
                fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_UN)
            self._lock_fh.close()
            self._closed = True

    def abandon(self) -> None:
        """Drop file handles without writing indexes (test crash path)."""
        with self._lock:
            if self._closed:
                return
            for table in self._tables.values():
                if table.append_fh:
                    table.append_fh.close()
                    table.append_fh = None
                if table.read_fh:
                    table.read_fh.close()
                    table.read_fh = None
            if fcntl is not None:
                fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_UN)
            self._lock_fh.close()
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- recovery -----------------------------------------------------------

    def _recover(self) -> None:
        for name, table in self._tables.items():
            if not self._load_index(table):
                self._rebuild_index(table)
        # Orphan pass: a child row is live only if its parent committed.
        for child_name, (parent_name, _fk) in FAMILY.items():
            child = self._tables[child_name]
            parent = self._tables[parent_name]
            live_parents = set(parent.offsets)
            # Taken before dropping, so an orphan's dangling parent id is
            # never handed out again and later adopted.
            max_fk = max(child.parents.values(), default=0)
            dropped = 0
            for cid in list(child.order):
                pid = child.parents.get(cid)
                if pid is None or pid not in live_parents:
                    child.offsets.pop(cid, None)
                    child.parents.pop(cid, None)
                    dropped += 1
            if dropped:
                child.order = [cid for cid in child.order if cid in child.offsets]
                self.stats["orphans_dropped"] += dropped
            child.children = {}
            for cid in child.order:
                child.children.setdefault(child.parents[cid], []).append(cid)
            parent.next_id = max(parent.next_id, max_fk + 1)

    def _load_index(self, table: _Table) -> bool:
        try:
            raw = table.idx_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return False
        except OSError:
            return False
        try:
            log_size = table.log_path.stat().st_size
        except FileNotFoundError:
            log_size = 0
        lines = raw.splitlines()
        if not lines:
            return False
        try:
            header = json.loads(lines[0])
            log_bytes = int(header["log_bytes"])
            next_id = int(header["next_id"])
            entries = []
            for line in lines[1:]:
                parts = line.split()
                if len(parts) == 2:
                    entries.append((int(parts[0]), int(parts[1]), None))
                elif len(parts) == 3:
                    entries.append((int(parts[0]), int(parts[1]), int(parts[2])))
                else:
                    return False
        except (KeyError, ValueError, json.JSONDecodeError):
            return False
        if log_bytes > log_size:
            return False  # index claims more than the log holds: stale
        table.offsets = {rid: off for rid, off, _ in entries}
        table.order = [rid for rid, _, _ in entries]
        table.parents = {rid: pid for rid, off, pid in entries if pid is not None}
        table.next_id = next_id
        table.log_bytes = log_bytes
        if log_bytes < log_size:
            self._scan_log(table, start=log_bytes)
            self.stats["tail_scans"] += 1
        return True

    def _rebuild_index(self, table: _Table) -> None:
        table.offsets = {}
        table.order = []
        table.parents = {}
        table.next_id = 1
        table.log_bytes = 0
        if table.log_path.exists():
            self._scan_log(table, start=0)
            self.stats["index_rebuilds"] += 1
        self._write_index(table)

    def _scan_log(self, table: _Table, start: int) -> None:
        """Parse log lines from `start`, truncating a torn tail in place."""
        fk_col = FAMILY.get(table.schema.table, (None, None))[1]
        try:
            with open(table.log_path, "rb") as fh:
                fh.seek(start)
                offset = start
                good_end = start
                while True:
                    line = fh.readline()
                    if not line:
                        break
                    if not line.endswith(b"\n"):
                        break  # torn tail, no newline
                    try:
                        row = json.loads(line)
                        rid = int(row["id"])
                    except (ValueError, KeyError, json.JSONDecodeError):
                        break  # torn or corrupt line ends the valid prefix
                    self.stats["lines_parsed"] += 1
                    if rid not in table.offsets:
                        table.offsets[rid] = offset
                        table.order.append(rid)
                        if fk_col is not None and fk_col in row:
                            table.parents[rid] = int(row[fk_col])
                    table.next_id = max(table.next_id, rid + 1)
                    offset += len(line)
                    good_end = offset
            size = table.log_path.stat().st_size
            if good_end < size:
                with open(table.log_path, "r+b") as fh:
                    fh.truncate(good_end)
                    fh.flush()
                    os.fsync(fh.fileno())
                self.stats["torn_lines_truncated"] += 1
            table.log_bytes = good_end
        except OSError as exc:
            raise StorageFailure(f"cannot recover {table.log_path}: {exc}") from exc

    def _write_index(self, table: _Table) -> None:
        header = {"log_bytes": table.log_bytes, "next_id": table.next_id}
        parts = [json.dumps(header, separators=(",", ":"))]
        for rid in table.order:
            pid = table.parents.get(rid)
            if pid is None:
                parts.append(f"{rid} {table.offsets[rid]}")
            else:
                parts.append(f"{rid} {table.offsets[rid]} {pid}")
        tmp = table.idx_path.with_suffix(".idx.tmp")
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("\n".join(parts) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, table.idx_path)
        except OSError as exc:
            raise StorageFailure(f"cannot write index {table.idx_path}: {exc}") from exc

    # -- validation ---------------------------------------------------------

    def _table(self, name: str) -> _Table:
        table = self._tables.get(name)
        if table is None:
            raise UnknownTable(name)
        return table

    def _validate_row(self, schema: TableSchema, row: dict) -> dict:
        out = {}
        unknown = set(row) - {n for n, _ in schema.columns}
        if unknown:
            raise SchemaMismatch(f"{schema.table}: unknown columns {sorted(unknown)}")
        for name, ctype in schema.columns:
            if name == "id":
                continue
            value = row.get(name)
            if value is None:
                if name not in schema.nullable:
                    raise SchemaMismatch(f"{schema.table}: {name} may not be null")
                out[name] = None
                continue
            out[name] = _check_value(schema.table, name, ctype, value)
        if schema.table == "snapshot_values":
            set_count = sum(
                out[c] is not None for c in ("value_float", "value_int", "value_text")
            )
            if set_count != 1:
                raise SchemaMismatch(
                    "snapshot_values: exactly one of value_float/value_int/value_text"
                )
        return out

    # -- appenders ----------------------------------------------------------

    def _append_fh(self, table: _Table) -> io.BufferedWriter:
        if table.append_fh is None:
            table.append_fh = open(table.log_path, "ab")
        return table.append_fh

    def _encode(self, schema: TableSchema, rid: int, row: dict) -> bytes:
        ordered = {"id": rid}
        for name, _ in schema.columns:
            if name != "id":
                ordered[name] = row[name]
        text = json.dumps(ordered, separators=(",", ":"), allow_nan=False)
        return text.encode("utf-8") + b"\n"

    def _append_line(self, table: _Table, data: bytes) -> int:
        fh = self._append_fh(table)
        try:
            fh.write(data)
        except OSError as exc:
            raise StorageFailure(f"append to {table.log_path} failed: {exc}") from exc
        offset = table.log_bytes
        table.log_bytes += len(data)
        return offset

    def _fsync(self, table: _Table) -> None:
        fh = table.append_fh
        if fh is None:
            return
        try:
            fh.flush()
            os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"fsync of {table.log_path} failed: {exc}") from exc

    def _commit_row(self, table: _Table, rid: int, offset: int, row: dict, fk: int | None):
        table.offsets[rid] = offset
        table.order.append(rid)
        if fk is not None:
            table.parents[rid] = fk
            table.children.setdefault(fk, []).append(rid)
        if table.fully_loaded:
            table.rows[rid] = dict(row, id=rid)

    # -- public API ----------------------------------------------------------

    def schema(self, name: str) -> TableSchema:
        schema = TABLES.get(name)
        if schema is None:
            raise UnknownTable(name)
        return schema

    def table_names(self) -> list[str]:
        return list(TABLES)

    def insert(self, name: str, row: dict) -> int:
        with self._lock:
            table = self._table(name)
            clean = self._validate_row(table.schema, row)
            fk = None
            if name in FAMILY:
                parent_name, fk_col = FAMILY[name]
                fk = clean[fk_col]
                if fk not in self._tables[parent_name].offsets:
                    raise SchemaMismatch(
                        f"{name}: {fk_col}={fk} refers to a missing {parent_name} row"
                    )
            rid = table.next_id
            table.next_id += 1
            offset = self._append_line(table, self._encode(table.schema, rid, clean))
            self._fsync(table)
            self._commit_row(table, rid, offset, clean, fk)
            return rid

    def insert_family(self, parent_name: str, parent_row: dict, child_rows: list[dict]) -> int:
        """Atomically persist a parent row plus its children.

        Children are appended and fsynced before the parent row, which acts
        as the commit record; recovery drops children with no parent.
        """
        with self._lock:
            if parent_name not in FAMILY_BY_PARENT:
                raise UnknownTable(parent_name)
            child_name, fk_col = FAMILY_BY_PARENT[parent_name]
            parent = self._tables[parent_name]
            child = self._tables[child_name]
            pid = parent.next_id
            parent.next_id += 1
            staged = []
            for row in child_rows:
                row = dict(row)
                row[fk_col] = pid
                staged.append(self._validate_row(child.schema, row))
            clean_parent = self._validate_row(parent.schema, parent_row)

            written = []
            for i, row in enumerate(staged):
                if self.crash_hook:
                    self.crash_hook(f"child:{i}")
                cid = child.next_id
                child.next_id += 1
                offset = self._append_line(child, self._encode(child.schema, cid, row))
                written.append((cid, offset, row))
            self._fsync(child)
            if self.crash_hook:
                self.crash_hook("children_flushed")
            p_offset = self._append_line(parent, self._encode(parent.schema, pid, clean_parent))
            self._fsync(parent)

            for cid, offset, row in written:
                self._commit_row(child, cid, offset, row, pid)
            self._commit_row(parent, pid, p_offset, clean_parent, None)
            return pid

    def get(self, name: str, rid: int) -> dict | None:
        with self._lock:
            table = self._table(name)
            if rid not in table.offsets:
                return None
            return dict(self._row(table, rid))

    def scan(self, name: str) -> list[dict]:
        with self._lock:
            table = self._table(name)
            self._load_all(table)
            return [dict(table.rows[rid]) for rid in table.order]

    def count(self, name: str) -> int:
        with self._lock:
            return len(self._table(name).order)

    def children_of(self, child_name: str, parent_id: int) -> list[dict]:
        with self._lock:
            table = self._table(child_name)
            if child_name not in FAMILY:
                raise UnknownTable(child_name)
            return [dict(self._row(table, cid)) for cid in table.children.get(parent_id, [])]

    # -- domain helpers -------------------------------------------------------

    def persist_snapshot(self, snap, trigger: str, taken_at_ms: int) -> int:
        if trigger not in ("scheduled", "manual"):
            raise SchemaMismatch(f"snapshot trigger must be scheduled|manual, got {trigger!r}")
        children = []
        for channel in sorted(snap.entries):
            entry = snap.entries[channel]
            row = {
                "channel": channel,
                "value_float": None,
                "value_int": None,
                "value_text": None,
                "seq": entry.seq,
            }
            value = entry.value
            if isinstance(value, bool):
                raise SchemaMismatch(f"{channel}: bool values are not archivable")
            if isinstance(value, float):
                row["value_float"] = value
            elif isinstance(value, int):
                row["value_int"] = value
            elif isinstance(value, str):
                row["value_text"] = value
            else:
                raise SchemaMismatch(f"{channel}: unsupported value type {type(value).__name__}")
            children.append(row)
        parent = {
            "taken_at": taken_at_ms,
            "trigger": trigger,
            "store_version": snap.version,
            "n_values": len(children),
        }
        return self.insert_family("snapshots", parent, children)

    def persist_tune(
        self,
        label: str,
        provenance: str,
        beam,
        values: list[tuple[str, str, float]],
        created_at_ms: int,
    ) -> int:
        if provenance not in ("scheduled", "manual"):
            raise SchemaMismatch(f"tune provenance must be scheduled|manual, got {provenance!r}")
        parent = {
            "label": label,
            "created_at": created_at_ms,
            "provenance": provenance,
            "mass_amu": beam.mass_amu,
            "charge_state": beam.charge_state,
            "energy_mev_u": beam.energy_mev_u,
        }
        children = [
            {"channel": channel, "scaling_law": law, "value_float": value}
            for channel, law, value in values
        ]
        return self.insert_family("tunes", parent, children)

    def load_tune(self, tune_id: int) -> tuple[dict, list[dict]]:
        with self._lock:
            row = self.get("tunes", tune_id)
            if row is None:
                raise UnknownTune(str(tune_id))
            return row, self.children_of("tune_values", tune_id)

    def load_snapshot(self, snapshot_id: int) -> tuple[dict, list[dict]]:
        with self._lock:
            row = self.get("snapshots", snapshot_id)
            if row is None:
                raise UnknownSnapshot(str(snapshot_id))
            return row, self.children_of("snapshot_values", snapshot_id)

    # -- row loading ----------------------------------------------------------

    def _read_fh(self, table: _Table) -> io.BufferedReader:
        if table.read_fh is None:
            table.read_fh = open(table.log_path, "rb")
        return table.read_fh

    def _row(self, table: _Table, rid: int) -> dict:
        row = table.rows.get(rid)
        if row is not None:
            return row
        fh = self._read_fh(table)
        fh.seek(table.offsets[rid])
        # The appender buffers until fsync; committed rows are always flushed.
        line = fh.readline()
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StorageFailure(f"{table.log_path}: corrupt row {rid}: {exc}") from exc
        self.stats["lines_parsed"] += 1
        table.rows[rid] = row
        return row

    def _load_all(self, table: _Table) -> None:
        if table.fully_loaded:
            return
        missing = [rid for rid in table.order if rid not in table.rows]
        for rid in missing:
            self._row(table, rid)
        table.fully_loaded = True


def _check_value(table: str, column: str, ctype: str, value):
    if ctype == "text":
        if not isinstance(value, str):
            raise SchemaMismatch(f"{table}.{column}: expected text, got {type(value).__name__}")
        return value
    if ctype in ("int", "timestamp"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaMismatch(f"{table}.{column}: expected {ctype}, got {type(value).__name__}")
        return value
    if ctype == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaMismatch(f"{table}.{column}: expected float, got {type(value).__name__}")
        value = float(value)
        if not math.isfinite(value):
            raise SchemaMismatch(f"{table}.{column}: non-finite float")
        return value
    if ctype == "bool":
        if not isinstance(value, bool):
            raise SchemaMismatch(f"{table}.{column}: expected bool, got {type(value).__name__}")
        return value
    raise SchemaMismatch(f"{table}.{column}: unknown column type {ctype}")
