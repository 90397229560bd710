"""Structured queries over the whitelisted archive tables.

A query is data, never a string: table name, AND-combined filters, an
optional sort, and pagination. Literals are type-checked against the
column before execution, so there is nothing to escape and nothing to
inject; adversarial text in a `contains` literal is just text.

Null semantics: a null cell never satisfies an ordering or `contains`
filter; `eq`/`neq` compare against the literal directly (a null cell is
unequal to every literal). Sorting places nulls first ascending, last
descending, and is stable with insertion-order ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .archive import ArchiveStore, TableSchema
from .errors import BadOperator, InvalidLimit, TypeMismatch, UnknownColumn, UnknownTable

OPERATORS = ("eq", "neq", "lt", "le", "gt", "ge", "contains")
ORDERING_OPS = frozenset(("lt", "le", "gt", "ge"))
DIRECTIONS = ("asc", "desc")

MAX_LIMIT = 1000
DEFAULT_LIMIT = 100


@dataclass(frozen=True)
class QueryFilter:
    column: str
    op: str
    literal: object

    def to_dict(self) -> dict:
        return {"column": self.column, "op": self.op, "literal": self.literal}


@dataclass(frozen=True)
class QuerySpec:
    table: str
    filters: tuple[QueryFilter, ...] = ()
    sort: tuple[str, str] | None = None
    limit: int = DEFAULT_LIMIT
    offset: int = 0

    def __post_init__(self):
        if not isinstance(self.limit, int) or isinstance(self.limit, bool):
            raise InvalidLimit(f"limit must be an integer, got {self.limit!r}")
        if not 1 <= self.limit <= MAX_LIMIT:
            raise InvalidLimit(f"limit must be in 1..{MAX_LIMIT}, got {self.limit}")
        if not isinstance(self.offset, int) or isinstance(self.offset, bool):
            raise InvalidLimit(f"offset must be an integer, got {self.offset!r}")
        if self.offset < 0:
            raise InvalidLimit(f"offset must be >= 0, got {self.offset}")
        for f in self.filters:
            if f.op not in OPERATORS:
                raise BadOperator(f"unknown operator {f.op!r}")
        if self.sort is not None and self.sort[1] not in DIRECTIONS:
            raise BadOperator(f"sort direction must be asc|desc, got {self.sort[1]!r}")

    @classmethod
    def from_dict(cls, body: dict) -> "QuerySpec":
        if not isinstance(body, dict):
            raise BadOperator("query body must be an object")
        unknown = set(body) - {"table", "filters", "sort", "limit", "offset"}
        if unknown:
            raise BadOperator(f"unknown query fields {sorted(unknown)}")
        table = body.get("table")
        if not isinstance(table, str):
            raise UnknownTable(str(table))
        raw_filters = body.get("filters", [])
        if not isinstance(raw_filters, list):
            raise BadOperator("filters must be a list")
        filters = []
        for item in raw_filters:
            if isinstance(item, dict):
                extra = set(item) - {"column", "op", "literal"}
                if extra or not {"column", "op", "literal"} <= set(item):
                    raise BadOperator(f"filter must have column/op/literal, got {sorted(item)}")
                column, op, literal = item["column"], item["op"], item["literal"]
            elif isinstance(item, list) and len(item) == 3:
                column, op, literal = item
            else:
                raise BadOperator(f"malformed filter {item!r}")
            if not isinstance(column, str) or not isinstance(op, str):
                raise BadOperator(f"malformed filter {item!r}")
            filters.append(QueryFilter(column=column, op=op, literal=literal))
        sort = None
        raw_sort = body.get("sort")
        if raw_sort is not None:
            if isinstance(raw_sort, dict) and isinstance(raw_sort.get("column"), str):
                sort = (raw_sort["column"], raw_sort.get("direction", "asc"))
            elif isinstance(raw_sort, str):
                column, _, direction = raw_sort.partition(":")
                sort = (column, direction or "asc")
            else:
                raise BadOperator(f"malformed sort {raw_sort!r}")
        return cls(
            table=table,
            filters=tuple(filters),
            sort=sort,
            limit=body.get("limit", DEFAULT_LIMIT),
            offset=body.get("offset", 0),
        )

    def to_dict(self) -> dict:
        out: dict = {"table": self.table, "limit": self.limit, "offset": self.offset}
        if self.filters:
            out["filters"] = [f.to_dict() for f in self.filters]
        if self.sort:
            out["sort"] = {"column": self.sort[0], "direction": self.sort[1]}
        return out


@dataclass(frozen=True)
class QueryResult:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    total_matching: int

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "total_matching": self.total_matching,
        }


class QueryEngine:
    def __init__(self, archive: ArchiveStore):
        self.archive = archive

    def describe(self, table: str) -> TableSchema:
        return self.archive.schema(table)

    def tables(self) -> list[TableSchema]:
        return [self.archive.schema(name) for name in self.archive.table_names()]

    def execute(self, spec: QuerySpec) -> QueryResult:
        schema = self.archive.schema(spec.table)
        predicates = [self._compile_filter(schema, f) for f in spec.filters]
        sort_col = None
        if spec.sort is not None:
            sort_col, direction = spec.sort
            if schema.type_of(sort_col) is None:
                raise UnknownColumn(f"{spec.table}.{sort_col}")

        matched = []
        for row in self.archive.scan(spec.table):
            if all(pred(row) for pred in predicates):
                matched.append(row)
        if sort_col is not None:
            matched.sort(key=lambda row: _sort_key(row.get(sort_col)), reverse=direction == "desc")
        total = len(matched)
        page = matched[spec.offset : spec.offset + spec.limit]
        columns = tuple(schema.column_names())
        rows = tuple(tuple(row.get(c) for c in columns) for row in page)
        return QueryResult(columns=columns, rows=rows, total_matching=total)

    def _compile_filter(self, schema: TableSchema, f: QueryFilter):
        ctype = schema.type_of(f.column)
        if ctype is None:
            raise UnknownColumn(f"{schema.table}.{f.column}")
        literal = _check_literal(schema.table, f.column, ctype, f.op, f.literal)
        column, op = f.column, f.op
        if op == "eq":
            return lambda row: row.get(column) == literal
        if op == "neq":
            return lambda row: row.get(column) != literal
        if op == "contains":
            return lambda row: row.get(column) is not None and literal in row[column]
        if op in ORDERING_OPS:
            def ordered(row, op=op):
                value = row.get(column)
                if value is None:
                    return False
                if op == "lt":
                    return value < literal
                if op == "le":
                    return value <= literal
                if op == "gt":
                    return value > literal
                return value >= literal

            return ordered
        raise BadOperator(f"unknown operator {op!r}")


def _sort_key(value):
    # Nulls group before every real value; equal keys keep insertion order.
    if value is None:
        return (0, 0)
    if isinstance(value, bool):
        return (1, int(value))
    return (1, value)


def _check_literal(table: str, column: str, ctype: str, op: str, literal):
    where = f"{table}.{column}"
    if literal is None:
        raise TypeMismatch(f"{where}: literal may not be null")
    if op == "contains":
        if ctype != "text":
            raise BadOperator(f"{where}: contains requires a text column")
        if not isinstance(literal, str):
            raise TypeMismatch(f"{where}: contains literal must be text")
        return literal
    if ctype == "text":
        if not isinstance(literal, str):
            raise TypeMismatch(f"{where}: expected text literal, got {type(literal).__name__}")
        return literal
    if ctype in ("int", "timestamp"):
        if isinstance(literal, bool) or not isinstance(literal, int):
            raise TypeMismatch(f"{where}: expected {ctype} literal, got {type(literal).__name__}")
        return literal
    if ctype == "float":
        if isinstance(literal, bool) or not isinstance(literal, (int, float)):
            raise TypeMismatch(f"{where}: expected float literal, got {type(literal).__name__}")
        return float(literal)
    if ctype == "bool":
        if not isinstance(literal, bool):
            raise TypeMismatch(f"{where}: expected bool literal, got {type(literal).__name__}")
        if op in ORDERING_OPS:
            raise BadOperator(f"{where}: ordering operators not defined on bool")
        return literal
    raise TypeMismatch(f"{where}: unsupported column type {ctype}")
