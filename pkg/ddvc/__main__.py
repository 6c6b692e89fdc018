"""
Entry point for running ddvc:

    uv run ddvc <command> [options]
    uv run python -m ddvc <command> [options]

Configuration is loaded from (highest precedence first):
1. Command-line flags
2. Environment variables (DDVC_* prefix, also read from .env)
3. The file given with --config
4. config/local.toml (if it exists)
5. config/default.toml (default settings)

See .env.example for available environment variable overrides.
"""

from __future__ import annotations

import sys
import threading

from dotenv import load_dotenv

from ddvc.codec.commands import dispatch
from ddvc.codec.utils.logging import get_logger
from ddvc.runtime import (
    configure_threads as _configure_threads,
    install_signal_handlers as _install_signal_handlers,
    restore_signal_handlers as _restore_signal_handlers,
)


logger = get_logger("ddvc")


def main(argv: list[str] | None = None) -> int:
    """Run one ddvc subcommand and return its exit code."""
    load_dotenv()
    _configure_threads()
    stop_event = threading.Event()
    previous_signal_handlers = _install_signal_handlers(stop_event)
    try:
        return dispatch(argv, stop_event=stop_event)
    finally:
        stop_event.set()
        _restore_signal_handlers(previous_signal_handlers)


if __name__ == "__main__":
    sys.exit(main())
