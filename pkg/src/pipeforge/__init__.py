"""pipeforge: a decentralized execution engine for declarative .pipes
pipelines.

Pipelines name their tools; tool repositories (local directories or remote
HTTP trees) carry everything else: commands, arguments, outputs, setup and
resource needs.  The planner resolves chained outputs into a dependency
graph and a deterministic execution order; the executor assembles isolated
per-step environments backed by a warm/cold tool cache and runs them
through a pluggable backend.
"""

from .dsl import parse, parse_file, serialize
from .errors import (
    ExecutionError,
    PipeforgeError,
    PipelineSyntaxError,
    PlanningError,
    RepositoryError,
    ValidationError,
)
from .executor import (
    EnvironmentState,
    RunReport,
    ToolCache,
    Workspace,
    prepare_environment,
    run,
    run_concurrent,
)
from .planner import (
    ExecutionGraph,
    ExecutionPlan,
    ResourceConfig,
    build_graph,
    compute_resources,
    make_plan,
    plan_to_json,
    to_dot,
    topological_order,
)
from .repository import RepositoryRef, open_repository
from .validation import ValidatedPipeline, validate

__version__ = "0.1.0"

__all__ = [
    "EnvironmentState",
    "ExecutionError",
    "ExecutionGraph",
    "ExecutionPlan",
    "PipeforgeError",
    "PipelineSyntaxError",
    "PlanningError",
    "RepositoryError",
    "RepositoryRef",
    "ResourceConfig",
    "RunReport",
    "ToolCache",
    "ValidatedPipeline",
    "ValidationError",
    "Workspace",
    "__version__",
    "build_graph",
    "compute_resources",
    "make_plan",
    "open_repository",
    "parse",
    "parse_file",
    "plan_to_json",
    "prepare_environment",
    "run",
    "run_concurrent",
    "serialize",
    "to_dot",
    "topological_order",
    "validate",
]
