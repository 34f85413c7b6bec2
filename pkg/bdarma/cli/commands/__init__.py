"""bdarma subcommands."""

from . import evaluate, fit, forecast, select, simulate, study

COMMANDS = [simulate, fit, forecast, select, evaluate, study]

__all__ = ["COMMANDS"]
