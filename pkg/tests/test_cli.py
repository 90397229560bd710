"""Command-line client: route parity, porcelain byte parity, rendering."""

import json
import threading
import time

import httpx
import pytest
from click.testing import CliRunner
from fastapi.routing import APIRoute

from tunevault import ctl
from tunevault.server import build_api

runner = CliRunner()


def run(live_server, *args, porcelain=False, expect_exit=0):
    argv = ["--url", live_server.base_url]
    if porcelain:
        argv.append("--porcelain")
    argv.extend(args)
    result = runner.invoke(ctl.main, argv)
    if result.exception and not isinstance(result.exception, SystemExit):
        raise result.exception
    assert result.exit_code == expect_exit, result.output + result.stderr
    return result


# -- parity with the API surface -----------------------------------------------------

def test_every_api_route_has_a_subcommand(facility):
    app = build_api(facility)
    served = set()
    for route in app.routes:
        if not isinstance(route, APIRoute) or not route.path.startswith("/api"):
            continue
        for method in route.methods - {"HEAD", "OPTIONS"}:
            served.add((method, route.path))
    assert served == set(ctl.ROUTE_COVERAGE)


@pytest.mark.parametrize(
    "path,args",
    [
        ("/api/health", ["health"]),
        ("/api/beam", ["beam"]),
        ("/api/tables", ["tables"]),
        ("/api/tables/resonators", ["tables", "resonators"]),
        ("/api/channels?pattern=CRYO:**", ["channels", "--pattern", "CRYO:**"]),
        ("/api/channels/MAG:D01:field", ["channel", "MAG:D01:field"]),
        ("/api/docs", ["docs"]),
        ("/api/docs/operators", ["docs", "operators"]),
        ("/api/tunes", ["tunes"]),
        ("/api/snapshots", ["snapshots"]),
    ],
)
def test_porcelain_matches_raw_body_bytes(live_server, client, path, args):
    result = run(live_server, *args, porcelain=True)
    assert result.stdout_bytes == client.get(path).content


def test_porcelain_error_passthrough(live_server, client):
    result = run(live_server, "tables", "nope", porcelain=True, expect_exit=1)
    assert result.stdout_bytes == client.get("/api/tables/nope").content


# -- query ----------------------------------------------------------------------------

def seed_rows(facility):
    for i, sensor in enumerate(["CRYO:S1:temperature_k", "a,b", "CRYO:S2:temperature_k"]):
        facility.archive.insert(
            "cryo_alarms",
            {
                "raised_at": 1_700_000_000_000 + i,
                "sensor": sensor,
                "temperature_k": 4.7 + i / 10,
                "threshold_k": 4.6,
            },
        )


def test_query_matches_direct_post(live_server, client, facility):
    seed_rows(facility)
    result = run(
        live_server,
        "query", "--table", "cryo_alarms",
        "--where", "temperature_k,ge,4.75",
        "--sort", "raised_at:desc",
        "--limit", "10",
        porcelain=True,
    )
    direct = client.post(
        "/api/query",
        json={
            "table": "cryo_alarms",
            "filters": [{"column": "temperature_k", "op": "ge", "literal": 4.75}],
            "sort": {"column": "raised_at", "direction": "desc"},
            "limit": 10,
        },
    )
    assert result.stdout_bytes == direct.content
    assert json.loads(result.stdout_bytes)["total_matching"] == 2


def test_query_renders_table_and_footer(live_server, facility):
    seed_rows(facility)
    result = run(live_server, "query", "--table", "cryo_alarms", "--limit", "2")
    lines = result.output.splitlines()
    assert lines[0].split() == ["id", "raised_at", "sensor", "temperature_k", "threshold_k"]
    assert set(lines[1]) == {"-", " "}
    assert lines[-1] == "(2 of 3 matching rows)"


def test_query_escaped_comma_literal(live_server, facility):
    seed_rows(facility)
    result = run(
        live_server,
        "query", "--table", "cryo_alarms", "--where", "sensor,eq,a\\,b",
        porcelain=True,
    )
    body = json.loads(result.stdout_bytes)
    assert body["total_matching"] == 1
    sensor_idx = body["columns"].index("sensor")
    assert body["rows"][0][sensor_idx] == "a,b"


def test_query_types_literals_from_schema(live_server, facility):
    seed_rows(facility)
    # raised_at is a timestamp: the literal must go out as an int, not text
    result = run(
        live_server,
        "query", "--table", "cryo_alarms",
        "--where", "raised_at,le,1700000000001",
        porcelain=True,
    )
    assert json.loads(result.stdout_bytes)["total_matching"] == 2


def test_query_unknown_table_exits_1(live_server):
    result = run(live_server, "query", "--table", "nope", expect_exit=1)
    assert result.stderr.startswith("UNKNOWN_TABLE:")


def test_query_malformed_where_is_usage_error(live_server):
    result = run(live_server, "query", "--table", "tunes", "--where", "a,b", expect_exit=2)
    assert "COL,OP,LITERAL" in result.stderr


# -- channels -------------------------------------------------------------------------

def test_set_then_channel(live_server):
    result = run(live_server, "set", "MAG:D04:field", "1.5")
    assert "MAG:D04:field = 1.5" in result.output

    result = run(live_server, "channel", "MAG:D04:field")
    body = json.loads(result.output)
    assert body["value"] == 1.5

    result = run(live_server, "set", "SLIT:L1:position", "1200")
    assert "SLIT:L1:position = 1200" in result.output


def test_set_rejects_bad_values_via_server(live_server):
    result = run(live_server, "set", "MAG:D04:field", "9.9", expect_exit=1)
    assert result.stderr.startswith("LIMIT_EXCEEDED:")
    result = run(live_server, "set", "MAG:D04:field", "sideways", expect_exit=1)
    assert result.stderr.startswith("TYPE_MISMATCH:")
    result = run(live_server, "set", "NO:chan", "1", expect_exit=1)
    assert result.stderr.startswith("UNKNOWN_CHANNEL:")


def test_channels_table_lists_names(live_server):
    result = run(live_server, "channels", "--pattern", "BMON:T1:*")
    assert "BMON:T1:current_enA" in result.output
    assert "BMON:T1:transmission" in result.output


def test_watch_follows_live_writes(live_server):
    stop = threading.Event()

    def writer():
        with httpx.Client(base_url=live_server.base_url, timeout=5.0) as c:
            value = 0.1
            while not stop.is_set():
                c.put("/api/channels/MAG:D06:field", json={"value": round(value, 3)})
                value = (value + 0.05) % 1.9
                time.sleep(0.05)

    thread = threading.Thread(target=writer, daemon=True)
    thread.start()
    try:
        result = run(
            live_server, "watch", "--pattern", "MAG:D06:*", "--count", "3"
        )
    finally:
        stop.set()
        thread.join(5)
    lines = [l for l in result.output.splitlines() if l]
    assert len(lines) == 3
    assert all(l.startswith("MAG:D06:field = ") for l in lines)
    seqs = [int(l.rsplit("seq=", 1)[1]) for l in lines]
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == 3


def test_watch_porcelain_passes_raw_sse_lines(live_server):
    stop = threading.Event()

    def writer():
        with httpx.Client(base_url=live_server.base_url, timeout=5.0) as c:
            while not stop.is_set():
                c.put("/api/channels/MAG:D07:field", json={"value": 0.25})
                time.sleep(0.05)

    thread = threading.Thread(target=writer, daemon=True)
    thread.start()
    try:
        result = run(
            live_server, "watch", "--pattern", "MAG:D07:*", "--count", "1",
            porcelain=True,
        )
    finally:
        stop.set()
        thread.join(5)
    data_lines = [l for l in result.output.splitlines() if l.startswith("data: ")]
    assert data_lines
    record = json.loads(data_lines[0][len("data: "):])
    assert record["name"] == "MAG:D07:field"


# -- snapshots / tunes -------------------------------------------------------------------

def test_snapshot_then_listing(live_server):
    result = run(live_server, "snapshot")
    assert result.output.strip() == "snapshot 1 stored"
    result = run(live_server, "snapshots")
    assert "manual" in result.output
    result = run(live_server, "snapshots", "1")
    assert "snapshot 1" in result.output
    assert "SLIT:L1:position" in result.output


def test_archive_tune_then_restore_dry_run(live_server):
    result = run(live_server, "archive-tune", "--label", "cli-test")
    assert result.output.strip() == "tune 1 archived"

    result = run(live_server, "tunes")
    assert "cli-test" in result.output

    result = run(live_server, "tunes", "1")
    assert "tune 1" in result.output
    assert "RES:R011:amplitude" in result.output

    result = run(
        live_server,
        "restore", "--tune", "1", "--mass", "40", "--charge", "12",
        "--energy", "7", "--dry-run",
    )
    assert "factors: magnetic=1.0 electrostatic=1.0 rf_amplitude=1.0" in result.output
    assert "WARNING" not in result.output
    assert "(0 applied, 0 clamped)" in result.output


def test_restore_commit_prints_applied_and_warning(live_server):
    run(live_server, "archive-tune")
    result = run(
        live_server,
        "restore", "--tune", "1", "--mass", "40", "--charge", "12", "--energy", "25",
    )
    assert "WARNING: new beam exceeds the beta=0.2 machine limit" in result.output
    assert "(99 applied," in result.output  # large energy step clamps many channels


def test_restore_unknown_tune(live_server):
    result = run(
        live_server,
        "restore", "--tune", "42", "--mass", "40", "--charge", "12", "--energy", "7",
        expect_exit=1,
    )
    assert result.stderr.startswith("UNKNOWN_TUNE:")


def test_presets_lists_catalog_values(live_server, facility):
    result = run(live_server, "presets", "SLIT:L1")
    lines = result.output.splitlines()
    assert any("half" in l for l in lines)
    names = [l.split()[2] for l in lines[2:]]
    assert names == sorted(names)
    steps = facility.catalog.lookup_preset("SLIT:L1", "half")
    assert any(str(steps) in l for l in lines)


# -- transport and env ----------------------------------------------------------------------

def test_dead_port_reports_connect_failed():
    result = runner.invoke(
        ctl.main, ["--url", "http://127.0.0.1:9", "health"]
    )
    assert result.exit_code == 1
    assert result.stderr.startswith("CONNECT_FAILED:")


def test_url_from_environment(live_server):
    result = runner.invoke(
        ctl.main, ["health"], env={"TUNEVAULT_URL": live_server.base_url}
    )
    assert result.exit_code == 0
    assert result.output.startswith("status=ok")


def test_unknown_subcommand_is_usage_error(live_server):
    result = runner.invoke(ctl.main, ["--url", live_server.base_url, "frobnicate"])
    assert result.exit_code == 2


# -- table renderer ---------------------------------------------------------------------------

def test_format_table_cells():
    text = ctl.format_table(
        ["name", "ok", "note"],
        [["a", True, None], ["bb", False, "x"]],
    )
    lines = text.splitlines()
    assert lines[0] == "name  ok   note"
    assert lines[1] == "----  ---  ----"
    assert lines[2] == "a     yes"
    assert lines[3] == "bb    no   x"
