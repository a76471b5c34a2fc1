"""Exception hierarchy shared by every pipeforge component.

Errors are grouped in families (repository, syntax, validation, planning,
execution) so callers such as the CLI can map whole families to exit codes.
"""

from __future__ import annotations


class PipeforgeError(Exception):
    """Base class for all pipeforge errors."""


# --------------------------------------------------------------------------
# Repository family
# --------------------------------------------------------------------------


class RepositoryError(PipeforgeError):
    """Base class for tool-repository errors."""


class LocationUnreachable(RepositoryError):
    """The repository location does not exist or cannot be resolved."""


class FetchFailure(RepositoryError):
    """A repository read failed (I/O or network)."""


class ToolNotFound(RepositoryError):
    """The repository has no tool with the requested name."""


class ConfiguratorNotFound(RepositoryError):
    """The tool exists but has no configurator with the requested name."""


class SchemaViolation(RepositoryError):
    """A descriptor or configurator file violates the repository schema.

    Messages always name the offending field and the tool it belongs to.
    """


# --------------------------------------------------------------------------
# Pipeline-text family
# --------------------------------------------------------------------------


class PipelineSyntaxError(PipeforgeError):
    """A grammatical error in a ``.pipes`` source, with its position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


class ValidationError(PipeforgeError):
    """Base class for semantic errors found while resolving a pipeline
    against a repository."""


class UnknownTool(ValidationError):
    pass


class UnknownConfigurator(ValidationError):
    pass


class UnknownCommand(ValidationError):
    pass


class UnknownArgument(ValidationError):
    pass


class MissingRequiredArgument(ValidationError):
    pass


class ConflictingBinding(ValidationError):
    """The same argument is bound both by a literal and by a chain."""


# --------------------------------------------------------------------------
# Planning family
# --------------------------------------------------------------------------


class PlanningError(PipeforgeError):
    """Base class for dependency-resolution and plan-composition errors."""


class UnresolvedChain(PlanningError):
    """A chain has no preceding producer, or the producer lacks the output."""


class CycleDetected(PlanningError):
    """The execution graph contains a cycle (defensive; chains resolve
    backward only, so this is unreachable from parsed pipelines)."""


class UnknownComposer(PlanningError):
    """A command names an argument composer that is not registered."""


class UnboundTemplateArgument(PlanningError):
    """An output template references an argument with no bound value."""


# --------------------------------------------------------------------------
# Execution family
# --------------------------------------------------------------------------


class ExecutionError(PipeforgeError):
    """Base class for environment-assembly and step-execution errors."""


class SetupFailure(ExecutionError):
    """A configurator or tool setup action failed; names tool and line."""


class CacheCorruption(ExecutionError):
    """A cache entry is marked installed but its payload is unusable."""


class StepFailure(ExecutionError):
    """A pipeline step exited nonzero or did not produce a declared output."""


class WorkspaceViolation(ExecutionError):
    """A step would write outside its workspace (e.g. into the input dir)."""


class WorkspaceOverlap(ExecutionError):
    """Two concurrently executed pipelines share a staging or output dir."""


class UnknownBuilder(ExecutionError):
    """A configurator names an execution-context builder that is not
    registered."""
