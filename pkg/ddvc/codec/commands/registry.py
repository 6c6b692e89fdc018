from __future__ import annotations

import argparse
import json
import sys
import threading
import typing
from typing import Any, Sequence

from pydantic import BaseModel, ValidationError

from ddvc.codec.commands.base import Command
from ddvc.codec.errors import ConfigError, ContractError, DDVCError, FormatError, ParameterError
from ddvc.codec.utils.json_utils import to_jsonable
from ddvc.codec.utils.logging import configure_logging, get_logger


logger = get_logger("ddvc")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Command line could not be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> typing.NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _is_list(annotation: Any) -> bool:
    if typing.get_origin(annotation) is list:
        return True
    return any(typing.get_origin(arg) is list for arg in typing.get_args(annotation))


def _is_bool(annotation: Any) -> bool:
    return annotation is bool or (bool in typing.get_args(annotation) and len(typing.get_args(annotation)) <= 2)


class CommandBox:
    """Registry and execution wrapper for subcommands."""

    def __init__(self, commands: list[Command] | None = None) -> None:
        self._commands: dict[str, Command] = {}
        if commands:
            for command in commands:
                self.register(command)

    def register(self, command: Command) -> None:
        """Register a command instance by name."""
        if command.name in self._commands:
            raise ValueError(f"Command already registered: {command.name}")
        self._commands[command.name] = command

    def get_command(self, name: str) -> Command | None:
        """Fetch a command by name."""
        return self._commands.get(name)

    @property
    def names(self) -> list[str]:
        return list(self._commands)

    def build_parser(self) -> argparse.ArgumentParser:
        """One argparse sub-parser per command, with options generated from its ArgsModel fields."""
        parser = _Parser(prog="ddvc", description="Distributed deep video codec toolkit.")
        subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
        for command in self._commands.values():
            sub = subparsers.add_parser(command.name, help=command.description, description=command.description)
            for name, field in command.ArgsModel.model_fields.items():
                extra = field.json_schema_extra if isinstance(field.json_schema_extra, dict) else {}
                flags = [str(extra.get("flag") or "--" + name.replace("_", "-"))]
                if flags[0] != "--" + name.replace("_", "-"):
                    flags.append("--" + name.replace("_", "-"))
                options: dict[str, Any] = {"dest": name, "default": None, "help": field.description}
                if _is_bool(field.annotation):
                    options["action"] = "store_true"
                elif _is_list(field.annotation):
                    options["nargs"] = "+"
                sub.add_argument(*flags, **options)
        return parser

    def run_command(self, name: str, raw_args: dict[str, Any] | None) -> dict[str, Any]:
        """Validate raw arguments against the command's ArgsModel and run it.

        Raises:
            UsageError: Unknown command.
            ValidationError: Arguments do not match the ArgsModel.
        """
        command = self.get_command(name)
        if not command:
            logger.warning(f"command={name} event=not_found")
            raise UsageError(f"unknown command: {name}")

        try:
            validated: BaseModel = command.ArgsModel.model_validate(raw_args or {})
        except ValidationError:
            logger.warning(f"command={name} event=validation_failed")
            raise
        logger.debug(f"command={name} event=started")
        result = command.run(validated)
        logger.debug(f"command={name} event=finished")
        return result


def default_commandbox(stop_event: threading.Event | None = None) -> CommandBox:
    from ddvc.codec.commands.baseline import ExternBaselineCommand
    from ddvc.codec.commands.coding import DecodeCommand, EncodeCommand, InspectCommand
    from ddvc.codec.commands.dumps import SIDumpCommand, VisualizeCommand
    from ddvc.codec.commands.evaluate import BenchCommand, EvalCommand
    from ddvc.codec.commands.train import TrainCommand

    return CommandBox(
        [
            TrainCommand(stop_event),
            EncodeCommand(),
            DecodeCommand(),
            EvalCommand(),
            BenchCommand(),
            SIDumpCommand(),
            VisualizeCommand(),
            InspectCommand(),
            ExternBaselineCommand(),
        ]
    )


def _emit_error(kind: str, message: str, details: Any = None) -> None:
    payload = {"error": kind, "message": message, "details": to_jsonable(details)}
    print(json.dumps(payload, default=str), file=sys.stderr)


def dispatch(argv: Sequence[str] | None = None, stop_event: threading.Event | None = None, box: CommandBox | None = None) -> int:
    """Parse `argv`, run the subcommand and print its JSON result.

    Returns 0 on success, 1 on usage/config/parameter errors and 2 on
    data or format errors; error objects go to stderr.
    """
    box = box or default_commandbox(stop_event)
    parser = box.build_parser()
    try:
        namespace = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)

    if namespace.command is None:
        parser.print_usage(sys.stderr)
        _emit_error("usage", f"a subcommand is required: {', '.join(box.names)}")
        return EXIT_USAGE

    raw = {key: value for key, value in vars(namespace).items() if key != "command" and value is not None}
    configure_logging(bool(raw.get("debug")))
    name = namespace.command
    try:
        result = box.run_command(name, raw)
    except ValidationError as exc:
        _emit_error("invalid_arguments", f"invalid arguments for {name}", exc.errors(include_url=False))
        return EXIT_USAGE
    except (UsageError, ConfigError, ParameterError, ContractError) as exc:
        logger.error(f"command={name} event=failed error={exc}")
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_USAGE
    except FormatError as exc:
        logger.error(f"command={name} event=failed error={exc}")
        _emit_error(type(exc).__name__, str(exc), {"frame": getattr(exc, "frame", None)})
        return EXIT_DATA
    except DDVCError as exc:
        logger.exception(f"command={name} event=failed")
        _emit_error(type(exc).__name__, str(exc), getattr(exc, "diagnostics", None))
        return EXIT_USAGE

    print(json.dumps(to_jsonable(result), indent=2, default=str))
    return EXIT_OK
