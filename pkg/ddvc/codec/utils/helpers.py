"""Helper functions for ddvc: project paths and run-directory bookkeeping."""

from __future__ import annotations

import os
import platform
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any


def get_project_root() -> Path:
    """Return absolute project root path."""
    return Path(__file__).resolve().parents[3]


def get_runs_root() -> Path:
    """Return writable root for run directories.

    Uses DDVC_RUNS_ROOT when provided, otherwise defaults to project_root/workspace/runs.
    """
    runs_root = os.getenv("DDVC_RUNS_ROOT", "").strip()
    if runs_root:
        return Path(runs_root)
    return get_project_root() / "workspace" / "runs"


def git_describe() -> str:
    """Return `git describe --always --dirty` for the project, or "unknown"."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=get_project_root(),
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else "unknown"


def environment_fingerprint() -> dict[str, Any]:
    """Collect interpreter, library and platform versions for a run directory."""
    import numpy
    import torch

    return {
        "git": git_describe(),
        "python": sys.version.split()[0],
        "torch": torch.__version__,
        "numpy": numpy.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def prepare_output_dir(out: str | Path | None, command: str) -> Path:
    """Return the output directory of a command, creating it when needed.

    An explicit `out` is used as given; otherwise a timestamped directory
    `<runs_root>/<command>-<UTC stamp>` is created.
    """
    if out:
        path = Path(out)
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        path = get_runs_root() / f"{command}-{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path
