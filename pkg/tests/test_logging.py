import logging
import tempfile
import unittest
from pathlib import Path

from ddvc.codec.utils.logging import get_logger, run_log


class TestRunLog(unittest.TestCase):
    def test_records_are_mirrored_to_file(self):
        # Verifies records logged inside the block reach run.log and later ones do not.
        logger = get_logger("ddvc.test_run_log")
        with tempfile.TemporaryDirectory() as tmp:
            with run_log(tmp, name="ddvc.test_run_log") as path:
                logger.info("event=inside step=1")
            logger.info("event=outside")
            text = path.read_text(encoding="utf-8")
        self.assertEqual(path.name, "run.log")
        self.assertIn("event=inside step=1", text)
        self.assertNotIn("event=outside", text)

    def test_handler_and_level_restored(self):
        # Verifies the file handler is removed and the logger level restored on exit.
        logger = get_logger("ddvc.test_run_log_restore")
        logger.setLevel(logging.WARNING)
        with tempfile.TemporaryDirectory() as tmp:
            with run_log(Path(tmp) / "nested", name="ddvc.test_run_log_restore"):
                self.assertEqual(logger.level, logging.INFO)
                self.assertEqual(len(logger.handlers), 1)
        self.assertEqual(logger.handlers, [])
        self.assertEqual(logger.level, logging.WARNING)
