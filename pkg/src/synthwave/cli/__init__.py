"""Scenario-driven batch interface."""
from .commands import COMMANDS, run
from .report import RunReport, Table, write_report
from .scenario import Scenario, loads, parse_scenario

__all__ = ["COMMANDS", "run", "RunReport", "Table", "write_report", "Scenario", "loads",
           "parse_scenario"]
