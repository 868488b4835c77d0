"""Exception types shared by all modules.

Every error carries the name of the module that raised it so the command
line driver can report provenance and pick an exit code.
"""
from __future__ import annotations


class CapflowError(Exception):
    """Base class. ``module`` names the raising component."""

    exit_code = 3

    def __init__(self, message: str, module: str = "capflow"):
        super().__init__(message)
        self.module = module

    def __str__(self) -> str:
        return f"[{self.module}] {self.args[0]}"


class DomainError(CapflowError, ValueError):
    """Input outside the domain of an operation."""

    exit_code = 2


class DegenerateInputError(DomainError):
    """Input that makes a formula singular."""


class NumericError(CapflowError, ArithmeticError):
    """A numerical procedure failed or lost its accuracy guarantee."""

    exit_code = 3


class InvariantViolation(CapflowError, AssertionError):
    """A checked invariant did not hold."""

    exit_code = 1
