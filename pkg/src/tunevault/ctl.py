"""`tunevaultctl`: headless client covering every API route.

Exit codes: 0 success, 1 API or connection error (the machine code is
printed), 2 usage error. `--porcelain` writes the raw HTTP body bytes to
stdout unmodified; the default output is a human-readable table.
"""

from __future__ import annotations

import json
import re
import sys

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8080"

# Parity map consumed by the route-coverage test: every API route must be
# reachable through some subcommand.
ROUTE_COVERAGE = {
    ("GET", "/api/tables"): "tables",
    ("GET", "/api/tables/{name}"): "tables NAME",
    ("POST", "/api/query"): "query",
    ("GET", "/api/channels"): "channels",
    ("GET", "/api/channels/stream"): "watch",
    ("GET", "/api/channels/{name}"): "channel",
    ("PUT", "/api/channels/{name}"): "set",
    ("GET", "/api/tunes"): "tunes",
    ("POST", "/api/tunes"): "archive-tune",
    ("GET", "/api/tunes/{tune_id}"): "tunes ID",
    ("POST", "/api/tunes/{tune_id}/restore"): "restore",
    ("GET", "/api/snapshots"): "snapshots",
    ("POST", "/api/snapshots"): "snapshot",
    ("GET", "/api/snapshots/{snapshot_id}"): "snapshots ID",
    ("GET", "/api/docs"): "docs",
    ("GET", "/api/docs/{page}"): "docs PAGE",
    ("GET", "/api/beam"): "beam",
    ("GET", "/api/health"): "health",
}


def format_table(headers: list[str], rows: list[list]) -> str:
    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, bool):
            return "yes" if v else "no"
        return str(v)

    text_rows = [[cell(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in text_rows:
        for i, v in enumerate(row):
            widths[i] = max(widths[i], len(v))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in text_rows:
        lines.append("  ".join(v.ljust(widths[i]) for i, v in enumerate(row)).rstrip())
    return "\n".join(lines)


class Api:
    def __init__(self, url: str, porcelain: bool):
        self.url = url.rstrip("/")
        self.porcelain = porcelain
        self.client = httpx.Client(timeout=httpx.Timeout(30.0))

    def request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            return self.client.request(method, self.url + path, **kwargs)
        except httpx.TransportError as exc:
            print(f"CONNECT_FAILED: {exc}", file=sys.stderr)
            raise SystemExit(1)

    def emit(self, resp: httpx.Response, render=None) -> None:
        """Terminal output step shared by all subcommands."""
        if self.porcelain:
            sys.stdout.buffer.write(resp.content)
            sys.stdout.buffer.flush()
            raise SystemExit(0 if resp.is_success else 1)
        if not resp.is_success:
            try:
                body = resp.json()
                print(f"{body['code']}: {body['message']}", file=sys.stderr)
            except (ValueError, KeyError):
                print(f"HTTP_{resp.status_code}: {resp.text}", file=sys.stderr)
            raise SystemExit(1)
        body = resp.json()
        if render is None:
            print(json.dumps(body, indent=2, sort_keys=True))
        else:
            render(body)


pass_api = click.make_pass_decorator(Api)


@click.group()
@click.option("--url", envvar="TUNEVAULT_URL", default=DEFAULT_URL, show_default=True,
              help="Server base URL (or set TUNEVAULT_URL).")
@click.option("--porcelain", is_flag=True,
              help="Emit the raw HTTP body bytes instead of a table.")
@click.pass_context
def main(ctx, url, porcelain):
    ctx.obj = Api(url, porcelain)


# -- archive tables ------------------------------------------------------------


@main.command()
@click.argument("name", required=False)
@pass_api
def tables(api: Api, name):
    """List archive tables, or show one table's schema."""
    if name is None:
        resp = api.request("GET", "/api/tables")

        def render(body):
            rows = [[s["table"], ", ".join(c["name"] for c in s["columns"])] for s in body]
            print(format_table(["table", "columns"], rows))

        api.emit(resp, render)
    else:
        resp = api.request("GET", f"/api/tables/{name}")

        def render(body):
            rows = [[c["name"], c["type"]] for c in body["columns"]]
            print(format_table(["column", "type"], rows))

        api.emit(resp, render)


def _split_where(raw: str) -> list[str]:
    parts = re.split(r"(?<!\\),", raw)
    return [p.replace("\\,", ",") for p in parts]


def _type_literal(literal: str, ctype: str | None):
    """Best-effort literal typing from the table schema; unknown or
    unparseable literals pass through as text so the server can report
    the mismatch."""
    if ctype in ("int", "timestamp"):
        try:
            return int(literal)
        except ValueError:
            return literal
    if ctype == "float":
        try:
            return float(literal)
        except ValueError:
            return literal
    if ctype == "bool":
        if literal in ("true", "false"):
            return literal == "true"
        return literal
    return literal


@main.command()
@click.option("--table", "table_name", required=True)
@click.option("--where", "wheres", multiple=True, metavar="COL,OP,LITERAL",
              help="AND filter; repeatable. Escape literal commas as \\,.")
@click.option("--sort", "sort_key", default=None, metavar="COL[:desc]")
@click.option("--limit", type=int, default=None)
@click.option("--offset", type=int, default=None)
@pass_api
def query(api: Api, table_name, wheres, sort_key, limit, offset):
    """Filter, sort, and paginate an archive table."""
    col_types: dict[str, str] = {}
    schema_resp = api.request("GET", f"/api/tables/{table_name}")
    if schema_resp.is_success:
        col_types = {c["name"]: c["type"] for c in schema_resp.json()["columns"]}
    spec: dict = {"table": table_name}
    filters = []
    for raw in wheres:
        parts = _split_where(raw)
        if len(parts) != 3:
            raise click.UsageError(f"--where must be COL,OP,LITERAL, got {raw!r}")
        column, op, literal = parts
        filters.append(
            {"column": column, "op": op, "literal": _type_literal(literal, col_types.get(column))}
        )
    if filters:
        spec["filters"] = filters
    if sort_key:
        column, _, direction = sort_key.partition(":")
        spec["sort"] = {"column": column, "direction": direction or "asc"}
    if limit is not None:
        spec["limit"] = limit
    if offset is not None:
        spec["offset"] = offset
    resp = api.request("POST", "/api/query", json=spec)

    def render(body):
        print(format_table(body["columns"], body["rows"]))
        print(f"({len(body['rows'])} of {body['total_matching']} matching rows)")

    api.emit(resp, render)


# -- live channels ----------------------------------------------------------------


CHANNEL_COLUMNS = ["name", "value", "units", "role", "quality", "seq"]


def _channel_row(rec: dict) -> list:
    return [rec[c] for c in CHANNEL_COLUMNS]


@main.command()
@click.option("--pattern", default="**", show_default=True)
@pass_api
def channels(api: Api, pattern):
    """List channels matching a glob pattern."""
    resp = api.request("GET", "/api/channels", params={"pattern": pattern})

    def render(body):
        print(format_table(CHANNEL_COLUMNS, [_channel_row(r) for r in body]))

    api.emit(resp, render)


@main.command()
@click.argument("name")
@pass_api
def channel(api: Api, name):
    """Show one channel record."""
    resp = api.request("GET", f"/api/channels/{name}")
    api.emit(resp)


@main.command("set")
@click.argument("name")
@click.argument("value")
@pass_api
def set_channel(api: Api, name, value):
    """Write a channel value (number or enum string)."""
    parsed: object
    try:
        parsed = int(value)
    except ValueError:
        try:
            parsed = float(value)
        except ValueError:
            parsed = value
    resp = api.request("PUT", f"/api/channels/{name}", json={"value": parsed})

    def render(body):
        print(f"{body['name']} = {body['value']} (seq {body['seq']}, "
              f"version {body['global_version']})")

    api.emit(resp, render)


@main.command()
@click.option("--pattern", default="**", show_default=True)
@click.option("--count", type=int, default=None,
              help="Exit after this many events (default: stream forever).")
@pass_api
def watch(api: Api, pattern, count):
    """Stream live channel updates (server-sent events)."""
    url = f"{api.url}/api/channels/stream"
    seen = 0
    try:
        with httpx.Client(timeout=httpx.Timeout(30.0, read=None)) as client:
            with client.stream("GET", url, params={"pattern": pattern}) as resp:
                if resp.status_code != 200:
                    resp.read()
                    api.emit(resp)
                    return
                for line in resp.iter_lines():
                    if api.porcelain:
                        if line or seen:
                            sys.stdout.write(line + "\n")
                            sys.stdout.flush()
                    if not line.startswith("data: "):
                        continue
                    rec = json.loads(line[len("data: "):])
                    seen += 1
                    if not api.porcelain:
                        print(f"{rec['name']} = {rec['value']} "
                              f"[{rec['quality']}] seq={rec['seq']}")
                        sys.stdout.flush()
                    if count is not None and seen >= count:
                        return
    except httpx.TransportError as exc:
        print(f"CONNECT_FAILED: {exc}", file=sys.stderr)
        raise SystemExit(1)


# -- snapshots ------------------------------------------------------------------------


@main.command()
@pass_api
def snapshot(api: Api):
    """Trigger a manual snapshot of all critical channels."""
    resp = api.request("POST", "/api/snapshots")
    api.emit(resp, lambda body: print(f"snapshot {body['id']} stored"))


@main.command()
@click.argument("snapshot_id", required=False, type=int)
@pass_api
def snapshots(api: Api, snapshot_id):
    """List snapshots, or show one with its values."""
    if snapshot_id is None:
        resp = api.request("GET", "/api/snapshots")

        def render(body):
            cols = ["id", "taken_at", "trigger", "store_version", "n_values"]
            print(format_table(cols, [[r[c] for c in cols] for r in body]))

        api.emit(resp, render)
    else:
        resp = api.request("GET", f"/api/snapshots/{snapshot_id}")

        def render(body):
            print(f"snapshot {body['id']}  trigger={body['trigger']}  "
                  f"taken_at={body['taken_at']}  n_values={body['n_values']}")
            cols = ["channel", "value_float", "value_int", "value_text", "seq"]
            print(format_table(cols, [[v[c] for c in cols] for v in body["values"]]))

        api.emit(resp, render)


# -- tunes ---------------------------------------------------------------------------


@main.command("archive-tune")
@click.option("--label", default=None, help="Label for the stored tune.")
@pass_api
def archive_tune(api: Api, label):
    """Archive the current machine configuration as a tune."""
    body = {"label": label} if label else {}
    resp = api.request("POST", "/api/tunes", json=body)
    api.emit(resp, lambda b: print(f"tune {b['id']} archived"))


@main.command()
@click.argument("tune_id", required=False, type=int)
@pass_api
def tunes(api: Api, tune_id):
    """List archived tunes, or show one with its values."""
    if tune_id is None:
        resp = api.request("GET", "/api/tunes")

        def render(body):
            cols = ["id", "label", "created_at", "provenance",
                    "mass_amu", "charge_state", "energy_mev_u", "n_values"]
            print(format_table(cols, [[r[c] for c in cols] for r in body]))

        api.emit(resp, render)
    else:
        resp = api.request("GET", f"/api/tunes/{tune_id}")

        def render(body):
            print(f"tune {body['id']}  label={body['label']}  "
                  f"beam={body['mass_amu']}u q={body['charge_state']}+ "
                  f"{body['energy_mev_u']} MeV/u")
            cols = ["channel", "scaling_law", "value_float"]
            print(format_table(cols, [[v[c] for c in cols] for v in body["values"]]))

        api.emit(resp, render)


@main.command()
@click.option("--tune", "tune_id", required=True, type=int)
@click.option("--mass", required=True, type=float, help="New beam mass (u).")
@click.option("--charge", required=True, type=int, help="New beam charge state.")
@click.option("--energy", required=True, type=float, help="New beam energy (MeV/u).")
@click.option("--dry-run", is_flag=True, help="Report the diff without writing.")
@pass_api
def restore(api: Api, tune_id, mass, charge, energy, dry_run):
    """Restore a tune scaled to a new beam."""
    body = {
        "beam": {"mass_amu": mass, "charge_state": charge, "energy_mev_u": energy},
        "mode": "dry_run" if dry_run else "commit",
    }
    resp = api.request("POST", f"/api/tunes/{tune_id}/restore", json=body)

    def render(report):
        f = report["factors"]
        print(f"restore tune {report['tune_id']} -> "
              f"{report['new_beam']['mass_amu']}u "
              f"q={report['new_beam']['charge_state']}+ "
              f"{report['new_beam']['energy_mev_u']} MeV/u  ({report['mode']})")
        print(f"factors: magnetic={f['magnetic']} electrostatic={f['electrostatic']} "
              f"rf_amplitude={f['rf_amplitude']}")
        if report["beta_warning"]:
            print("WARNING: new beam exceeds the beta=0.2 machine limit")
        cols = ["channel", "scaling_law", "archived_value", "factor",
                "proposed_value", "clamped", "applied"]
        print(format_table(cols, [[e[c] for c in cols] for e in report["entries"]]))
        print(f"({report['n_applied']} applied, {report['n_clamped']} clamped)")

    api.emit(resp, render)


# -- misc -----------------------------------------------------------------------------


@main.command()
@click.argument("device")
@pass_api
def presets(api: Api, device):
    """List stored stepper presets for a device."""
    spec = {
        "table": "stepper_presets",
        "filters": [{"column": "device_id", "op": "eq", "literal": device}],
        "sort": {"column": "preset_name", "direction": "asc"},
    }
    resp = api.request("POST", "/api/query", json=spec)

    def render(body):
        print(format_table(body["columns"], body["rows"]))

    api.emit(resp, render)


@main.command()
@click.argument("page", required=False)
@pass_api
def docs(api: Api, page):
    """List documentation pages, or print one."""
    if page is None:
        resp = api.request("GET", "/api/docs")
        api.emit(resp, lambda body: print("\n".join(body)))
    else:
        resp = api.request("GET", f"/api/docs/{page}")

        def render(body):
            print(body["title"])
            print("=" * len(body["title"]))
            print(body["body"])

        api.emit(resp, render)


@main.command()
@pass_api
def beam(api: Api):
    """Show the current beam and its kinematics."""
    resp = api.request("GET", "/api/beam")

    def render(body):
        b = body["beam"]
        print(f"beam: {b['mass_amu']}u  q={b['charge_state']}+  "
              f"{b['energy_mev_u']} MeV/u")
        print(f"gamma={body['gamma']} beta={body['beta']} "
              f"pc={body['pc_total_mev']} MeV rigidity={body['rigidity_tm']} T*m")

    api.emit(resp, render)


@main.command()
@pass_api
def health(api: Api):
    """Service liveness and counters."""
    resp = api.request("GET", "/api/health")

    def render(body):
        print(f"status={body['status']} store_version={body['store_version']} "
              f"snapshots={body['snapshot_count']} skipped_ticks={body['skipped_ticks']}")

    api.emit(resp, render)


if __name__ == "__main__":
    main()
