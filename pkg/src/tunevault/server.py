"""HTTP edge: the operator API plus static UI assets.

All bodies are JSON with compact separators; every error body is
``{"code": <stable machine code>, "message": <human text>}``. Path lookups
that miss return 404, body validation failures 400, type conflicts and a
busy restore path 409, and setpoint writes outside device limits 422
(limits are enforced here, at the edge, not inside the channel store).
Byte-level examples live in docs/wire-format.md.
"""

from __future__ import annotations

import json
import typing

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from .app import Facility
from .channeldb import ChannelRecord
from .errors import (
    InvalidBeam,
    LimitExceeded,
    ParseError,
    SubscriberOverflow,
    SubscriptionClosed,
    TuneVaultError,
    UnknownChannel,
)
from .manual import get_page, page_names
from .query import QuerySpec
from .scaling import BeamParameters, kinematics
from .tunes import MODES

STATUS_FOR_CODE = {
    "UNKNOWN_CHANNEL": 404,
    "UNKNOWN_TABLE": 404,
    "UNKNOWN_TUNE": 404,
    "UNKNOWN_SNAPSHOT": 404,
    "UNKNOWN_PAGE": 404,
    "UNKNOWN_DEVICE": 404,
    "UNKNOWN_PRESET": 404,
    "TYPE_MISMATCH": 409,
    "RESTORE_BUSY": 409,
    "LIMIT_EXCEEDED": 422,
}

SSE_POLL_S = 0.5
SSE_KEEPALIVE_POLLS = 30  # comment ping after ~15 s idle


class CompactJSONResponse(JSONResponse):
    def render(self, content: typing.Any) -> bytes:
        return json.dumps(
            content, separators=(",", ":"), allow_nan=False, ensure_ascii=False
        ).encode("utf-8")


def _ok(content, status_code: int = 200) -> CompactJSONResponse:
    return CompactJSONResponse(content, status_code=status_code)


def _err(exc: TuneVaultError, status: int | None = None) -> CompactJSONResponse:
    code = exc.code
    return CompactJSONResponse(
        {"code": code, "message": str(exc)},
        status_code=status if status is not None else STATUS_FOR_CODE.get(code, 400),
    )


def _record_dict(rec: ChannelRecord) -> dict:
    return {
        "name": rec.name,
        "kind": rec.kind.value,
        "value": rec.value,
        "units": rec.units,
        "role": rec.role,
        "critical": rec.critical,
        "quality": rec.quality,
        "seq": rec.seq,
        "updated_at": rec.updated_at,
        "global_version": rec.global_version,
    }


async def _read_json(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        body = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ParseError("request body must be a JSON object")
    return body


def _parse_beam(body: dict) -> BeamParameters:
    raw = body.get("beam")
    if not isinstance(raw, dict):
        raise InvalidBeam("body must carry a beam object (mass_amu, charge_state, energy_mev_u)")
    return BeamParameters.from_dict(raw)


def build_api(facility: Facility) -> FastAPI:
    app = FastAPI(title="tunevault", docs_url=None, redoc_url=None, openapi_url=None)
    channels = facility.channels
    archive = facility.archive
    catalog = facility.catalog

    # Framework-generated errors must match the {code, message} contract too.

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return CompactJSONResponse(
            {"code": "PARSE_ERROR", "message": "invalid request parameters"},
            status_code=400,
        )

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        code = {404: "NOT_FOUND", 405: "METHOD_NOT_ALLOWED"}.get(
            exc.status_code, f"HTTP_{exc.status_code}"
        )
        return CompactJSONResponse(
            {"code": code, "message": str(exc.detail)}, status_code=exc.status_code
        )

    # -- tables / query -----------------------------------------------------

    @app.get("/api/tables")
    def list_tables():
        return _ok([s.to_dict() for s in facility.query.tables()])

    @app.get("/api/tables/{name}")
    def get_table(name: str):
        try:
            return _ok(facility.query.describe(name).to_dict())
        except TuneVaultError as exc:
            return _err(exc)

    @app.post("/api/query")
    async def run_query(request: Request):
        try:
            body = await _read_json(request)
            spec = QuerySpec.from_dict(body)
            result = facility.query.execute(spec)
        except TuneVaultError as exc:
            return _err(exc, status=400)
        return _ok(result.to_dict())

    # -- live channels --------------------------------------------------------

    @app.get("/api/channels")
    def list_channels(pattern: str = "**"):
        try:
            records = channels.read_pattern(pattern)
        except TuneVaultError as exc:
            return _err(exc)
        return _ok([_record_dict(r) for r in records])

    @app.get("/api/channels/stream")
    def stream_channels(pattern: str = "**"):
        try:
            sub = channels.subscribe(pattern)
        except TuneVaultError as exc:
            return _err(exc)

        def events():
            try:
                yield ": subscribed\n\n"
                idle = 0
                while True:
                    try:
                        rec = sub.get(timeout=SSE_POLL_S)
                    except SubscriberOverflow as exc:
                        payload = {"code": exc.code, "message": str(exc)}
                        yield "event: overflow\ndata: " + json.dumps(
                            payload, separators=(",", ":")
                        ) + "\n\n"
                        return
                    except SubscriptionClosed:
                        return
                    if rec is None:
                        idle += 1
                        if idle >= SSE_KEEPALIVE_POLLS:
                            idle = 0
                            yield ": keepalive\n\n"
                        continue
                    idle = 0
                    yield "data: " + json.dumps(
                        _record_dict(rec), separators=(",", ":")
                    ) + "\n\n"
            finally:
                sub.close()

        return StreamingResponse(events(), media_type="text/event-stream")

    @app.get("/api/channels/{name}")
    def get_channel(name: str):
        try:
            return _ok(_record_dict(channels.read(name)))
        except TuneVaultError as exc:
            return _err(exc)

    @app.put("/api/channels/{name}")
    async def put_channel(name: str, request: Request):
        try:
            body = await _read_json(request)
        except TuneVaultError as exc:
            return _err(exc)
        if "value" not in body:
            return _err(ParseError("body must carry a value field"))
        value = body["value"]
        try:
            if name not in channels:
                raise UnknownChannel(name)
            limits = catalog.limits_for_channel(name)
            if (
                limits is not None
                and isinstance(value, (int, float))
                and not isinstance(value, bool)
                and not limits[0] <= value <= limits[1]
            ):
                raise LimitExceeded(
                    f"{name}: value {value} outside limits [{limits[0]}, {limits[1]}]"
                )
            seq, version = channels.write(name, value)
        except TuneVaultError as exc:
            return _err(exc)
        return _ok(
            {
                "name": name,
                "value": channels.read(name).value,
                "seq": seq,
                "global_version": version,
            }
        )

    # -- tunes ------------------------------------------------------------------

    @app.get("/api/tunes")
    def list_tunes():
        rows = archive.scan("tunes")
        for row in rows:
            row["n_values"] = len(archive.children_of("tune_values", row["id"]))
        return _ok(rows)

    @app.post("/api/tunes")
    async def create_tune(request: Request):
        try:
            body = await _read_json(request)
            label = body.get("label")
            if label is not None and not isinstance(label, str):
                raise ParseError("label must be a string")
            tune_id = facility.scanner.trigger_now("tune", label=label)
        except TuneVaultError as exc:
            return _err(exc)
        return _ok({"id": tune_id})

    @app.get("/api/tunes/{tune_id}")
    def get_tune(tune_id: int):
        try:
            row, values = archive.load_tune(tune_id)
        except TuneVaultError as exc:
            return _err(exc)
        row["n_values"] = len(values)
        row["values"] = values
        return _ok(row)

    @app.post("/api/tunes/{tune_id}/restore")
    async def restore_tune(tune_id: int, request: Request):
        try:
            body = await _read_json(request)
            beam = _parse_beam(body)
            mode = body.get("mode", "dry_run")
            if mode not in MODES:
                raise ParseError(f"mode must be one of {list(MODES)}, got {mode!r}")
            report = facility.tunes.restore_tune(tune_id, beam, mode)
        except TuneVaultError as exc:
            return _err(exc)
        return _ok(report.to_dict())

    # -- snapshots -----------------------------------------------------------------

    @app.get("/api/snapshots")
    def list_snapshots():
        return _ok(archive.scan("snapshots"))

    @app.post("/api/snapshots")
    def create_snapshot():
        try:
            snapshot_id = facility.scanner.trigger_now("snapshot")
        except TuneVaultError as exc:
            return _err(exc)
        return _ok({"id": snapshot_id})

    @app.get("/api/snapshots/{snapshot_id}")
    def get_snapshot(snapshot_id: int):
        try:
            row, values = archive.load_snapshot(snapshot_id)
        except TuneVaultError as exc:
            return _err(exc)
        row["values"] = values
        return _ok(row)

    # -- docs / beam / health ---------------------------------------------------------

    @app.get("/api/docs")
    def list_docs():
        return _ok(page_names())

    @app.get("/api/docs/{page}")
    def get_doc(page: str):
        try:
            return _ok(get_page(page))
        except TuneVaultError as exc:
            return _err(exc)

    @app.get("/api/beam")
    def get_beam():
        beam = facility.tunes.beam
        kin = kinematics(beam)
        return _ok(
            {
                "beam": beam.to_dict(),
                "gamma": kin.gamma,
                "beta": kin.beta,
                "pc_total_mev": kin.pc_total_mev,
                "rigidity_tm": kin.rigidity_tm,
            }
        )

    @app.get("/api/health")
    def health():
        return _ok(
            {
                "status": "ok",
                "store_version": channels.version(),
                "snapshot_count": archive.count("snapshots"),
                "skipped_ticks": facility.scanner.skipped_ticks(),
            }
        )

    _mount_ui(app, facility)
    return app


def _mount_ui(app: FastAPI, facility: Facility) -> None:
    ui_dir = facility.config.ui_dir
    if ui_dir:
        from pathlib import Path

        if Path(ui_dir).is_dir():
            app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
            return

    @app.get("/")
    def root():
        return HTMLResponse(
            "<!doctype html><title>tunevault</title>"
            "<h1>tunevault</h1><p>API is up. No UI assets configured; "
            "set <code>ui_dir</code> in the config to serve the console.</p>"
        )
