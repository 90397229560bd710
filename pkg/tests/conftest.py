"""Shared fixtures: a quiet facility and a live HTTP server."""

from __future__ import annotations

import threading
import time

import httpx
import pytest
import uvicorn

from tunevault.app import Facility
from tunevault.config import Config
from tunevault.server import build_api


@pytest.fixture
def facility(tmp_path):
    """Full stack with the background ticker and schedules effectively off."""
    cfg = Config(
        data_dir=str(tmp_path / "data"),
        sim_tick_ms=0,
        seed=7,
        scan_interval_s=3600,
        tune_interval_s=3600,
    )
    fac = Facility.from_config(cfg)
    yield fac
    fac.stop()


class LiveServer:
    def __init__(self, facility: Facility):
        self.facility = facility
        app = build_api(facility)
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        self.base_url = f"http://127.0.0.1:{port}"

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture
def live_server(facility):
    server = LiveServer(facility)
    yield server
    server.stop()


@pytest.fixture
def client(live_server):
    with httpx.Client(base_url=live_server.base_url, timeout=10.0) as c:
        yield c
