"""`tunevaultd`: run the full stack behind one HTTP server."""

from __future__ import annotations

import logging

import click
import uvicorn

from .app import Facility
from .config import load_config
from .server import build_api


@click.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file (or set TUNEVAULT_CONFIG).")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Override the configured data directory.")
@click.option("--seed", type=int, default=None, help="Override the simulator seed.")
def main(config_path, port, data_dir, seed):
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    cfg = load_config(config_path, overrides={"port": port, "data_dir": data_dir, "seed": seed})
    facility = Facility.from_config(cfg)
    app = build_api(facility)
    facility.start()
    try:
        uvicorn.run(app, host=cfg.bind, port=cfg.port, log_level="info")
    finally:
        facility.stop()


if __name__ == "__main__":
    main()
