"""Utilities for JSON reports backed by Pydantic schemas."""

from __future__ import annotations

from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from ddvc.codec.errors import FormatError

T = TypeVar("T", bound=BaseModel)


def to_jsonable(value: Any) -> Any:
    """Convert models, paths and numpy scalars into plain JSON values."""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if hasattr(value, "item") and callable(value.item):
        return value.item()
    return value


def write_model_json(path: Path, model: BaseModel) -> Path:
    """Write a Pydantic model as indented JSON and return the path."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_model_json(path: Path, schema_class: type[T]) -> T:
    """Load and validate a JSON file against a Pydantic schema.

    Raises:
        FormatError: The file is missing, not JSON, or does not match the schema.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from exc
    try:
        return schema_class.model_validate_json(raw)
    except ValidationError as exc:
        raise FormatError(f"report {path} does not match {schema_class.__name__}: {exc}") from exc
