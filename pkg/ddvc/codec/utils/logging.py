"""Logging setup for ddvc.

Every module logs through the shared "ddvc" logger in key=value form.
`run_log` mirrors those records into a run directory while a command runs.
"""

from __future__ import annotations

import contextlib
import logging
from pathlib import Path
from typing import Iterator

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
QUIET_LOGGERS = ("matplotlib", "PIL")


def configure_logging(debug: bool = False) -> None:
    """Configure the root logger once; DEBUG when `debug` is set, else INFO.

    Repeated calls keep the first configuration (basicConfig semantics).
    """
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
    )
    # Font and plugin discovery logs at DEBUG.
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


@contextlib.contextmanager
def run_log(run_dir: str | Path, name: str = "ddvc", filename: str = "run.log") -> Iterator[Path]:
    """Copy records of logger `name` into `run_dir/filename` for the duration of the block."""
    path = Path(run_dir) / filename
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    target = logging.getLogger(name)
    previous_level = target.level
    if target.getEffectiveLevel() > logging.INFO:
        target.setLevel(logging.INFO)
    target.addHandler(handler)
    try:
        yield path
    finally:
        target.removeHandler(handler)
        target.setLevel(previous_level)
        handler.close()
