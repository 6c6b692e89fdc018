import threading
import unittest

from ddvc.codec.errors import ParameterError
from ddvc.codec.training.prefetch import BatchPrefetcher


class TestBatchPrefetcher(unittest.TestCase):
    def test_preserves_order(self):
        # Verifies batches come out in the order the source produced them.
        self.assertEqual(list(BatchPrefetcher(range(25), depth=3)), list(range(25)))

    def test_empty_source(self):
        # Verifies an empty source ends iteration immediately.
        self.assertEqual(list(BatchPrefetcher([])), [])

    def test_worker_exception_reraised(self):
        # Verifies an error raised while loading reaches the consumer after earlier batches.
        def batches():
            yield 1
            yield 2
            raise RuntimeError("disk gone")

        seen = []
        with self.assertRaises(RuntimeError) as ctx:
            for batch in BatchPrefetcher(batches()):
                seen.append(batch)
        self.assertEqual(seen, [1, 2])
        self.assertIn("disk gone", str(ctx.exception))

    def test_early_break_stops_worker(self):
        # Verifies abandoning iteration stops the background thread.
        prefetcher = BatchPrefetcher(range(1000), depth=1, poll_seconds=0.01)
        for batch in prefetcher:
            if batch == 2:
                break
        self.assertFalse(prefetcher._thread.is_alive())

    def test_start_is_idempotent(self):
        # Verifies starting twice keeps a single worker thread.
        gate = threading.Event()

        def batches():
            gate.wait(timeout=1.0)
            yield 0

        prefetcher = BatchPrefetcher(batches())
        with prefetcher:
            first = prefetcher._thread
            prefetcher.start()
            self.assertIs(prefetcher._thread, first)
            gate.set()

    def test_invalid_depth(self):
        # Verifies a non-positive depth is refused.
        with self.assertRaises(ParameterError):
            BatchPrefetcher(range(3), depth=0)
