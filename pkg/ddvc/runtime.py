"""Runtime helpers for process-level configuration and shutdown handling."""

from __future__ import annotations

import os
import signal
import threading

import torch

from ddvc.codec.utils.logging import get_logger

logger = get_logger("ddvc")


def configure_threads() -> int | None:
    """Cap torch worker threads from DDVC_THREADS.

    Returns the applied count, or None when the variable is unset, empty or 0.
    """
    raw = os.getenv("DDVC_THREADS", "").strip()
    if not raw:
        return None
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"event=threads_ignored value={raw!r}")
        return None
    if threads <= 0:
        return None
    torch.set_num_threads(threads)
    logger.debug(f"event=threads_configured threads={threads}")
    return threads


def install_signal_handlers(stop_event: threading.Event) -> dict[int, signal.Handlers]:
    """Install SIGINT/SIGTERM handlers that request graceful shutdown.

    Returns previous handlers so callers can restore them after exit.
    """
    previous_handlers: dict[int, signal.Handlers] = {}

    def _on_signal(signum, _frame) -> None:
        signal_name = signal.Signals(signum).name
        logger.info(f"event=shutdown_requested signal={signal_name}")
        stop_event.set()

    for signum in (signal.SIGINT, signal.SIGTERM):
        previous_handlers[signum] = signal.getsignal(signum)
        signal.signal(signum, _on_signal)

    return previous_handlers


def restore_signal_handlers(previous_handlers: dict[int, signal.Handlers]) -> None:
    """Restore previously installed signal handlers."""
    for signum, handler in previous_handlers.items():
        signal.signal(signum, handler)
