"""Exception hierarchy. Every numerical failure carries a pipeline stage label."""

from __future__ import annotations


class HorseshoeError(Exception):
    """Base class; ``stage`` names the pipeline step that failed."""

    stage = "general"

    def __init__(self, message: str, stage: str | None = None, **details):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.details = details


class ConfigError(HorseshoeError, ValueError):
    stage = "config"


class ParameterGuardError(ConfigError):
    """|k| below the large-k guard and no override given."""

    stage = "parameter"


class NoSolutionError(HorseshoeError):
    stage = "solve"


class PoleError(HorseshoeError):
    """Evaluation exactly at a pole of the singular perturbation."""

    stage = "pole"


class NonHyperbolicError(HorseshoeError):
    """Continued-fraction renormalisation of a direction broke down."""

    stage = "foliation"


class SingularRegionError(HorseshoeError):
    stage = "projection"


class NoBracketError(NoSolutionError):
    stage = "bracket"


class WindowViolationError(NoSolutionError):
    stage = "partition"


class BranchError(HorseshoeError):
    stage = "cantor"


class CoverTooLargeError(BranchError):
    pass
