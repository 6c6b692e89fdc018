"""Background batch prefetcher so data loading overlaps optimisation."""

from __future__ import annotations

import queue
import threading
from typing import Any, Iterable, Iterator

from ddvc.codec.errors import ParameterError
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

_DONE = object()


class _Failure:
    def __init__(self, error: BaseException):
        self.error = error


class BatchPrefetcher:
    """Background worker that fills a bounded queue with batches from `batches`."""

    def __init__(self, batches: Iterable[Any], depth: int = 2, poll_seconds: float = 0.1):
        """Initialize the prefetcher.

        Args:
            batches: Iterable producing batches; consumed on the worker thread.
            depth: Maximum number of batches held ahead of the consumer.
            poll_seconds: How often a blocked worker re-checks for stop.
        """
        if depth <= 0:
            raise ParameterError(f"prefetch depth must be positive, got {depth}")
        self.batches = batches
        self.poll_seconds = poll_seconds
        self._queue: queue.Queue = queue.Queue(maxsize=depth)
        self._stop_event = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> BatchPrefetcher:
        """Start the background loading thread."""
        if self._thread and self._thread.is_alive():
            return self

        self._thread = threading.Thread(target=self._run, daemon=True, name="batch-prefetcher")
        self._thread.start()
        logger.debug(f"event=prefetch_started depth={self._queue.maxsize}")
        return self

    def stop(self) -> None:
        """Request worker stop and wait briefly for shutdown."""
        self._stop_event.set()
        if self._thread:
            self._thread.join(timeout=1.0)

    def _put(self, item: Any) -> bool:
        while not self._stop_event.is_set():
            try:
                self._queue.put(item, timeout=self.poll_seconds)
                return True
            except queue.Full:
                continue
        return False

    def _run(self) -> None:
        """Worker loop that loads batches until exhausted or stopped."""
        try:
            for batch in self.batches:
                if not self._put(batch):
                    return
        except Exception as exc:
            logger.exception("Batch prefetcher failed")
            self._put(_Failure(exc))
            return
        self._put(_DONE)

    def __iter__(self) -> Iterator[Any]:
        self.start()
        try:
            while True:
                item = self._queue.get()
                if item is _DONE:
                    return
                if isinstance(item, _Failure):
                    raise item.error
                yield item
        finally:
            self.stop()

    def __enter__(self) -> BatchPrefetcher:
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
