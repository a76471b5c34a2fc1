"""Command-line entry point: check, plan, graph and run subcommands.

Exit codes: 0 success, 1 execution failure, 2 syntax or I/O error,
3 validation or planning error, 4 repository error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .backends import backend_from_name
from .dsl import PipelineNode, parse
from .errors import (
    ExecutionError,
    PipelineSyntaxError,
    PlanningError,
    RepositoryError,
    ValidationError,
    WorkspaceViolation,
)
from .executor import ToolCache, Workspace, prepare_environment, run
from .planner import (
    build_graph,
    compute_resources,
    make_plan,
    plan_to_json,
    to_dot,
    topological_order,
)
from .repository import RepositoryRef, open_repository
from .validation import ValidatedPipeline, validate

EXIT_OK = 0
EXIT_EXECUTION = 1
EXIT_SYNTAX_IO = 2
EXIT_VALIDATION = 3
EXIT_REPOSITORY = 4
EXIT_USAGE = 64

REPORT_FILENAME = "report.json"
DEFAULT_CACHE_DIR = "~/.cache/pipeforge"


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pipes", required=True, metavar="FILE",
                        help="pipeline definition (.pipes file)")
    parser.add_argument("--repo", metavar="PATH_OR_URL",
                        help="override the repository named in the pipeline")


def _add_resources(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input_dir", required=True, metavar="DIR",
                        help="directory holding the pipeline's input files")
    parser.add_argument("--out", dest="output_dir", required=True, metavar="DIR",
                        help="directory receiving terminal outputs and the report")
    parser.add_argument("--mem", "-mem", type=int, metavar="GIB",
                        help="memory to assign, in GiB (default: highest"
                             " tool requirement)")
    parser.add_argument("--cpus", "-cpus", type=int, metavar="N",
                        help="cpu cores to assign (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="pipeforge", allow_abbrev=False,
                             description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True,
                                       parser_class=_ArgumentParser)

    check = subparsers.add_parser("check", help="parse and validate a pipeline")
    _add_common(check)
    check.set_defaults(func=cmd_check)

    plan = subparsers.add_parser("plan", help="print the execution plan as JSON")
    _add_common(plan)
    _add_resources(plan)
    plan.set_defaults(func=cmd_plan)

    graph = subparsers.add_parser("graph", help="print the dependency graph as DOT")
    _add_common(graph)
    graph.set_defaults(func=cmd_graph)

    runp = subparsers.add_parser("run", help="execute a pipeline")
    _add_common(runp)
    _add_resources(runp)
    runp.add_argument("--backend", choices=["dry-run", "local", "container"],
                      default="dry-run", help="execution backend (default: dry-run)")
    runp.add_argument("--cache-dir", default=DEFAULT_CACHE_DIR, metavar="DIR",
                      help="tool cache directory")
    runp.add_argument("--staging-dir", metavar="DIR",
                      help="intermediate working directory"
                           " (default: OUT/.staging)")
    runp.set_defaults(func=cmd_run)

    return parser


# --------------------------------------------------------------------------
# Shared plumbing
# --------------------------------------------------------------------------


def _parse_pipes(path_text: str) -> PipelineNode:
    path = Path(path_text)
    text = path.read_text(encoding="utf-8")
    try:
        return parse(text)
    except PipelineSyntaxError as exc:
        # Prefix the file name onto the line:column diagnostic.
        exc.args = (f"{path}:{exc}",)
        raise


def _repository_ref(pipeline: PipelineNode, override: str | None) -> RepositoryRef:
    if override is None:
        return RepositoryRef(pipeline.repository_kind,
                             pipeline.repository_location)
    kind = "Remote" if override.startswith(("http://", "https://")) else "Local"
    return RepositoryRef(kind, override)


def _load(args: argparse.Namespace) -> ValidatedPipeline:
    pipeline = _parse_pipes(args.pipes)
    handle = open_repository(_repository_ref(pipeline, args.repo))
    return validate(pipeline, handle)


def _resource_args(args: argparse.Namespace) -> tuple[int | None, int | None]:
    memory_mib = None
    if args.mem is not None:
        if args.mem < 1:
            raise ValueError("--mem must be at least 1 GiB")
        memory_mib = args.mem * 1024
    if args.cpus is not None and args.cpus < 1:
        raise ValueError("--cpus must be at least 1")
    return memory_mib, args.cpus


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    vp = _load(args)
    chains = sum(len(b.chain_bindings) for b in vp.commands)
    print(f"ok: {len(vp.pipeline.tools)} tool blocks,"
          f" {len(vp.commands)} command blocks, {chains} chains")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    vp = _load(args)
    memory_mib, cpus = _resource_args(args)
    config = compute_resources(vp, input_path=args.input_dir,
                               output_path=args.output_dir,
                               memory_mib=memory_mib, cpu_cores=cpus)
    plan = make_plan(vp, config=config)
    sys.stdout.write(plan_to_json(plan))
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    vp = _load(args)
    sys.stdout.write(to_dot(build_graph(vp)))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    vp = _load(args)
    memory_mib, cpus = _resource_args(args)
    config = compute_resources(vp, input_path=args.input_dir,
                               output_path=args.output_dir,
                               memory_mib=memory_mib, cpu_cores=cpus)
    graph = build_graph(vp)
    plan = make_plan(vp, graph, topological_order(graph), config)

    backend = backend_from_name(args.backend)
    output_dir = Path(args.output_dir)
    staging_dir = Path(args.staging_dir) if args.staging_dir else output_dir / ".staging"
    ws = Workspace(input_dir=Path(args.input_dir), output_dir=output_dir,
                   staging_dir=staging_dir)
    if backend.performs_io and not ws.input_dir.is_dir():
        raise FileNotFoundError(f"input directory not found: {ws.input_dir}")

    cache = ToolCache(Path(args.cache_dir).expanduser())
    env = prepare_environment(plan, cache, backend)

    report = None
    violation: WorkspaceViolation | None = None
    try:
        report = run(plan, ws, env, backend)
    except WorkspaceViolation as exc:
        violation = exc
        report = getattr(exc, "report", None)

    if report is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        report_path = output_dir / REPORT_FILENAME
        report_path.write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )
        sys.stdout.write(report.to_text())

    if violation is not None:
        print(f"error: {violation}", file=sys.stderr)
        return EXIT_EXECUTION
    return EXIT_OK if report is not None and report.overall == "ok" else EXIT_EXECUTION


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        return args.func(args)
    except PipelineSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX_IO
    except (ValidationError, PlanningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RepositoryError as exc:
        print(f"repository error: {exc}", file=sys.stderr)
        return EXIT_REPOSITORY
    except ExecutionError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"pipeforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
