from ddvc.codec.commands.base import Command
from ddvc.codec.commands.registry import CommandBox, default_commandbox, dispatch

__all__ = ["Command", "CommandBox", "default_commandbox", "dispatch"]
