from .dsl import DslError, SystemFile, load
from .main import COMMANDS, main, run
from .report import Report, emit_machine, emit_text, parse_machine

__all__ = [
    "COMMANDS",
    "DslError",
    "Report",
    "SystemFile",
    "emit_machine",
    "emit_text",
    "load",
    "main",
    "parse_machine",
    "run",
]
