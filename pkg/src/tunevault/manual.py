"""Built-in documentation pages served at /api/docs/{page}."""

from __future__ import annotations

from .errors import UnknownPage

PAGES: dict[str, dict] = {
    "index": {
        "page": "index",
        "title": "Documentation",
        "body": (
            "Available pages: operators (day-to-day console and CLI usage), "
            "administrators (deployment, configuration, data layout).\n\n"
            "The service keeps the live channel database in memory, archives "
            "critical values and whole machine tunes on a schedule, and "
            "serves structured queries over the archive tables."
        ),
    },
    "operators": {
        "page": "operators",
        "title": "Operators' Guide",
        "body": (
            "Live channels: the monitor view (or `tunevaultctl channels`) "
            "shows current values; glob patterns use `*` within a name "
            "segment and `**` across segments. Setpoints accept writes; "
            "values outside device limits are rejected at the API edge.\n\n"
            "Snapshots of all critical channels are taken automatically on "
            "the scan schedule; trigger one manually with `tunevaultctl "
            "snapshot`.\n\n"
            "Tunes: `tunevaultctl archive-tune --label <name>` stores the "
            "complete setpoint configuration with the current beam. To move "
            "to a new beam, run a dry-run restore first:\n"
            "  tunevaultctl restore --tune <id> --mass <u> --charge <q> "
            "--energy <MeV/u> --dry-run\n"
            "inspect the per-channel diff (scaled value, clamp flags, beta "
            "warning above 0.2c), then repeat without --dry-run to commit. "
            "Committed values are written to the live database and the beam "
            "transmission should recover as readbacks settle.\n\n"
            "Queries: the query view (or `tunevaultctl query --table <t> "
            "--where col,op,literal`) filters, sorts, and paginates any "
            "archive table. Operators: eq, neq, lt, le, gt, ge, contains."
        ),
    },
    "administrators": {
        "page": "administrators",
        "title": "Administrators' Guide",
        "body": (
            "Start the daemon with `tunevaultd --config <file>`; see the "
            "sample config for keys (port, bind, data_dir, schedules, "
            "simulator seed). The server binds loopback by default and has "
            "no authentication; deploy only on an isolated network.\n\n"
            "Data directory layout: catalog.src defines devices, presets, "
            "the golden tune, and the default beam; tables/<name>.log hold "
            "one JSON record per line with a sidecar .idx offset index. "
            "Logs are append-only; indexes are rebuilt automatically if "
            "missing or stale. Back up the data directory by copying it "
            "while the daemon is stopped.\n\n"
            "Schedules: scan_interval_s snapshots critical channels; "
            "tune_interval_s archives full tunes (production: 14400 s, a "
            "4-hour cycle). Late ticks are skipped, never queued; the "
            "skipped count is visible at /api/health."
        ),
    },
}


def get_page(page: str) -> dict:
    body = PAGES.get(page)
    if body is None:
        raise UnknownPage(page)
    return body


def page_names() -> list[str]:
    return list(PAGES)
