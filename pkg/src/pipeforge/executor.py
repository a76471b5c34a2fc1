"""Execution: workspace management, the warm/cold tool cache, environment
preparation and step-by-step plan running.

Data movement model: at run start the input directory is copied into the
staging directory; each step gets a private working directory under
``staging/.steps/`` seeded with a copy of the current staging content; on
success its declared outputs are harvested back into staging; terminal
outputs are finally copied to the output directory.  The input directory
is never written.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any

from filelock import FileLock

from .backends import Backend, step_dirname
from .errors import (
    CacheCorruption,
    SetupFailure,
    WorkspaceOverlap,
    WorkspaceViolation,
)
from .planner import ExecutionPlan, PlanStep

STEPS_DIRNAME = ".steps"
MARKER_FILE = "installed.marker"
ARTIFACT_FILE = "artifact.json"
ENV_MARKER_DIRNAME = ".env"


# --------------------------------------------------------------------------
# Workspace
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Workspace:
    """The three directories a pipeline execution touches."""

    input_dir: Path
    output_dir: Path
    staging_dir: Path

    @property
    def steps_root(self) -> Path:
        return self.staging_dir / STEPS_DIRNAME

    def step_dir(self, step: PlanStep) -> Path:
        return self.steps_root / step_dirname(step.instance_index, step.command_name)


def _resolved(path: Path) -> Path:
    return Path(path).resolve()


def _paths_overlap(a: Path, b: Path) -> bool:
    a, b = _resolved(a), _resolved(b)
    return a == b or a.is_relative_to(b) or b.is_relative_to(a)


def check_workspaces_disjoint(workspaces: list[Workspace]) -> None:
    """Raise WorkspaceOverlap if any two pipelines' write paths (staging or
    output directories, in any combination) coincide or nest."""
    kinds = ("staging_dir", "output_dir")
    for i in range(len(workspaces)):
        for j in range(i + 1, len(workspaces)):
            for left_kind in kinds:
                for right_kind in kinds:
                    left = getattr(workspaces[i], left_kind)
                    right = getattr(workspaces[j], right_kind)
                    if _paths_overlap(left, right):
                        raise WorkspaceOverlap(
                            f"pipeline {i} {left_kind.replace('_', ' ')} overlaps"
                            f" pipeline {j} {right_kind.replace('_', ' ')}:"
                            f" {left} vs {right}"
                        )


def _check_relative(path_text: str, what: str) -> PurePosixPath:
    rel = PurePosixPath(path_text)
    if rel.is_absolute() or ".." in rel.parts:
        raise WorkspaceViolation(
            f"{what} '{path_text}' must stay inside the workspace"
        )
    return rel


def directory_digest(root: Path) -> str:
    """Content hash of a directory tree: relative paths plus file bytes."""
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        rel = path.relative_to(root).as_posix()
        digest.update(rel.encode())
        digest.update(b"\0")
        if path.is_file():
            digest.update(path.read_bytes())
        digest.update(b"\1")
    return digest.hexdigest()


def _copy_entry(src: Path, dst: Path) -> None:
    dst.parent.mkdir(parents=True, exist_ok=True)
    if src.is_dir():
        shutil.copytree(src, dst, dirs_exist_ok=True)
    else:
        shutil.copy2(src, dst)


def _copy_tree_contents(src_root: Path, dst_root: Path,
                        exclude: frozenset[str] = frozenset()) -> None:
    dst_root.mkdir(parents=True, exist_ok=True)
    for entry in src_root.iterdir():
        if entry.name in exclude:
            continue
        _copy_entry(entry, dst_root / entry.name)


# --------------------------------------------------------------------------
# Tool cache
# --------------------------------------------------------------------------


class ToolCache:
    """Content cache of installed tools, shared across executions.

    Layout: ``<cacheDir>/<tool>/<version>/`` holding ``artifact.json``
    (the fetched payload) and ``installed.marker`` (written last, so a
    crash mid-install never leaves an entry that claims to be ready).
    Cross-process safety comes from a per-entry file lock.
    """

    def __init__(self, cache_dir: Path | str):
        self.cache_dir = Path(cache_dir)

    def entry_dir(self, tool: str, version: str) -> Path:
        return self.cache_dir / tool / version

    def _marker(self, tool: str, version: str) -> Path:
        return self.entry_dir(tool, version) / MARKER_FILE

    def lock(self, tool: str, version: str) -> FileLock:
        self.entry_dir(tool, version).parent.mkdir(parents=True, exist_ok=True)
        return FileLock(str(self.entry_dir(tool, version)) + ".lock")

    def is_installed(self, tool: str, version: str, uri: str) -> bool:
        marker = self._marker(tool, version)
        if not marker.is_file():
            return False
        try:
            recorded = json.loads(marker.read_text(encoding="utf-8"))
        except ValueError:
            return False
        # A different uri in the slot means a different artifact: reinstall.
        return recorded.get("uri") == uri

    def verify(self, tool: str, version: str) -> bool:
        """True iff the installed entry still has its artifact payload."""
        return (self.entry_dir(tool, version) / ARTIFACT_FILE).is_file()

    def evict(self, tool: str, version: str) -> None:
        shutil.rmtree(self.entry_dir(tool, version), ignore_errors=True)

    def store_artifact(self, tool: str, version: str, payload: dict[str, Any]) -> None:
        entry = self.entry_dir(tool, version)
        entry.mkdir(parents=True, exist_ok=True)
        (entry / ARTIFACT_FILE).write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )

    def mark_installed(self, tool: str, version: str, uri: str) -> None:
        marker = self._marker(tool, version)
        tmp = marker.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"tool": tool, "version": version, "uri": uri}) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, marker)

    def env_marker_dir(self) -> Path:
        return self.cache_dir / ENV_MARKER_DIRNAME


# --------------------------------------------------------------------------
# Environment preparation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ToolEnvironment:
    tool_name: str
    version: str
    uri: str
    state: str  # "cold" | "warm"
    configurator_setup: tuple[str, ...]
    tool_setup: tuple[str, ...]
    configurator_setup_executed: bool = False
    tool_setup_executed: bool = False


@dataclass
class EnvironmentState:
    backend_kind: str
    cache_dir: str
    tools: list[ToolEnvironment] = field(default_factory=list)

    def tool_states(self) -> dict[str, str]:
        return {t.tool_name: t.state for t in self.tools}

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "backend": self.backend_kind,
            "cacheDir": self.cache_dir,
            "tools": [
                {
                    "tool": t.tool_name,
                    "version": t.version,
                    "uri": t.uri,
                    "state": t.state,
                    "configuratorSetup": list(t.configurator_setup),
                    "toolSetup": list(t.tool_setup),
                    "configuratorSetupExecuted": t.configurator_setup_executed,
                    "toolSetupExecuted": t.tool_setup_executed,
                }
                for t in self.tools
            ],
        }


def _configurator_env_marker(cache: ToolCache, builder: str,
                             setup: tuple[str, ...]) -> Path:
    fingerprint = hashlib.sha256("\n".join(setup).encode()).hexdigest()[:16]
    return cache.env_marker_dir() / f"{builder}-{fingerprint}.marker"


def _run_setup_lines(backend: Backend, lines: tuple[str, ...], cwd: Path,
                     tool: str, stage: str) -> None:
    cwd.mkdir(parents=True, exist_ok=True)
    for line in lines:
        code = backend.run_setup_line(line, cwd)
        if code != 0:
            raise SetupFailure(
                f"tool '{tool}': {stage} setup line {line!r} exited {code}"
            )


def _install_cold(plan: ExecutionPlan, cache: ToolCache, backend: Backend,
                  step: PlanStep) -> ToolEnvironment:
    tool, version, uri = step.tool_name, step.tool_version, step.configurator.uri
    configurator = step.configurator

    ran_configurator = False
    if configurator.setup:
        marker = _configurator_env_marker(cache, configurator.builder,
                                          configurator.setup)
        if not marker.is_file():
            _run_setup_lines(backend, configurator.setup, marker.parent,
                             tool, "configurator")
            marker.write_text("ok\n", encoding="utf-8")
            ran_configurator = True

    payload = plan.vp.handle.fetch_artifact(tool, uri)
    cache.store_artifact(tool, version, payload)

    ran_tool = False
    if step.tool_setup:
        _run_setup_lines(backend, step.tool_setup, cache.entry_dir(tool, version),
                         tool, "tool")
        ran_tool = True

    cache.mark_installed(tool, version, uri)
    return ToolEnvironment(
        tool_name=tool, version=version, uri=uri, state="cold",
        configurator_setup=configurator.setup, tool_setup=step.tool_setup,
        configurator_setup_executed=ran_configurator,
        tool_setup_executed=ran_tool,
    )


def prepare_environment(plan: ExecutionPlan, cache: ToolCache,
                        backend: Backend) -> EnvironmentState:
    """Ensure every tool in the plan is installed in the cache.

    Warm tools are left untouched; cold tools run their configurator setup
    (once per backend environment), fetch their artifact, run their tool
    setup, and are marked installed only after all of that succeeds.
    Under a dry-run backend the cold/warm classification is reported but
    nothing is fetched, executed or written.
    """
    state = EnvironmentState(backend_kind=backend.kind,
                             cache_dir=str(cache.cache_dir))
    seen: set[tuple[str, str, str]] = set()
    for step in plan.steps:
        key = (step.tool_name, step.tool_version, step.configurator.uri)
        if key in seen:
            continue
        seen.add(key)
        tool, version, uri = key

        if not backend.performs_io:
            installed = (cache.is_installed(tool, version, uri)
                         and cache.verify(tool, version))
            state.tools.append(
                ToolEnvironment(
                    tool_name=tool, version=version, uri=uri,
                    state="warm" if installed else "cold",
                    configurator_setup=step.configurator.setup,
                    tool_setup=step.tool_setup,
                )
            )
            continue

        with cache.lock(tool, version):
            if cache.is_installed(tool, version, uri) and cache.verify(tool, version):
                state.tools.append(
                    ToolEnvironment(
                        tool_name=tool, version=version, uri=uri,
                        state="warm",
                        configurator_setup=step.configurator.setup,
                        tool_setup=step.tool_setup,
                    )
                )
                continue

            # Anything else in the slot (a different artifact's marker, a
            # marker without its payload, debris from a crashed install) is
            # rebuilt from scratch.
            cache.evict(tool, version)
            env = _install_cold(plan, cache, backend, step)
            if not cache.verify(tool, version):
                raise CacheCorruption(
                    f"tool '{tool}' {version}: artifact payload missing even"
                    " after reinstall"
                )
            state.tools.append(env)
    return state


# --------------------------------------------------------------------------
# Run reports
# --------------------------------------------------------------------------


@dataclass
class StepRecord:
    instance_index: int
    tool_name: str
    command_name: str
    status: str  # "ok" | "failed" | "skipped"
    exit_code: int | None
    launched: tuple[str, ...]
    wall_time_s: float
    message: str = ""


@dataclass
class RunReport:
    backend_kind: str
    steps: list[StepRecord] = field(default_factory=list)
    tool_states: dict[str, str] = field(default_factory=dict)

    @property
    def overall(self) -> str:
        return "ok" if all(s.status == "ok" for s in self.steps) else "failed"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "overall": self.overall,
            "backend": self.backend_kind,
            "toolStates": dict(sorted(self.tool_states.items())),
            "steps": [
                {
                    "instanceIndex": s.instance_index,
                    "tool": s.tool_name,
                    "command": s.command_name,
                    "status": s.status,
                    "exitCode": s.exit_code,
                    "launched": list(s.launched),
                    "wallTimeS": s.wall_time_s,
                    "message": s.message,
                }
                for s in self.steps
            ],
        }

    def to_text(self) -> str:
        lines = [f"pipeline: {self.overall} ({self.backend_kind} backend)"]
        for tool, temp in sorted(self.tool_states.items()):
            lines.append(f"  tool {tool}: {temp}")
        for s in self.steps:
            detail = f" exit={s.exit_code}" if s.exit_code is not None else ""
            suffix = f" ({s.message})" if s.message else ""
            lines.append(
                f"  step {s.instance_index} {s.tool_name}.{s.command_name}:"
                f" {s.status}{detail}{suffix}"
            )
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


def _validate_plan_paths(plan: ExecutionPlan) -> None:
    for step in plan.steps:
        for name, path in step.declared_outputs:
            _check_relative(path, f"declared output '{name}'")
        for staged in step.staged_inputs:
            _check_relative(staged.path, f"staged input '{staged.argument_name}'")


def run(plan: ExecutionPlan, ws: Workspace, env: EnvironmentState,
        backend: Backend) -> RunReport:
    """Execute the plan's steps strictly in order, fail-fast.

    Raises WorkspaceViolation if anything writes into the input directory
    (detected by content hashing around each step); the partial report is
    attached to the exception as ``report``.
    """
    report = RunReport(backend_kind=backend.kind, tool_states=env.tool_states())
    io = backend.performs_io

    if io:
        _validate_plan_paths(plan)
        if not ws.input_dir.is_dir():
            raise WorkspaceViolation(f"input directory not found: {ws.input_dir}")
        ws.staging_dir.mkdir(parents=True, exist_ok=True)
        ws.output_dir.mkdir(parents=True, exist_ok=True)
        ws.steps_root.mkdir(parents=True, exist_ok=True)
        _copy_tree_contents(ws.input_dir, ws.staging_dir,
                            exclude=frozenset({STEPS_DIRNAME}))
        input_digest = directory_digest(ws.input_dir)

    failed = False
    for step in plan.steps:
        if failed:
            report.steps.append(
                StepRecord(step.instance_index, step.tool_name, step.command_name,
                           "skipped", None, (), 0.0)
            )
            continue

        message = ""
        cwd = ws.step_dir(step)
        if io:
            missing = [
                staged.path for staged in step.staged_inputs
                if not (ws.staging_dir / staged.path).exists()
            ]
            if missing:
                report.steps.append(
                    StepRecord(step.instance_index, step.tool_name,
                               step.command_name, "failed", None, (), 0.0,
                               f"staged input missing: {', '.join(missing)}")
                )
                failed = True
                continue
            cwd.mkdir(parents=True, exist_ok=True)
            _copy_tree_contents(ws.staging_dir, cwd,
                                exclude=frozenset({STEPS_DIRNAME}))

        started = time.monotonic()
        result = backend.run_step(step, cwd, ws, plan.config)
        wall = time.monotonic() - started

        status = "ok" if result.exit_code == 0 else "failed"
        if status == "failed":
            message = result.stderr_tail.strip()
        elif io:
            for name, path in step.declared_outputs:
                if not (cwd / path).exists():
                    status = "failed"
                    message = f"declared output '{name}' missing: {path}"
                    break
            else:
                for _name, path in step.declared_outputs:
                    _copy_entry(cwd / path, ws.staging_dir / path)

        report.steps.append(
            StepRecord(step.instance_index, step.tool_name, step.command_name,
                       status, result.exit_code, result.launched, wall, message)
        )
        if status == "failed":
            failed = True

        if io and directory_digest(ws.input_dir) != input_digest:
            for remaining in plan.steps[len(report.steps):]:
                report.steps.append(
                    StepRecord(remaining.instance_index, remaining.tool_name,
                               remaining.command_name, "skipped", None, (), 0.0)
                )
            error = WorkspaceViolation(
                f"step {step.instance_index}"
                f" ({step.tool_name}.{step.command_name}) modified the input"
                " directory"
            )
            error.report = report
            raise error

    if io and report.overall == "ok":
        for step in plan.steps:
            if not step.terminal:
                continue
            for _name, path in step.declared_outputs:
                _copy_entry(ws.staging_dir / path, ws.output_dir / path)

    return report


def run_concurrent(pipelines: list[tuple[ExecutionPlan, Workspace]],
                   cache: ToolCache, backend: Backend) -> list[RunReport]:
    """Run several pipelines at once, each in its own executor thread.

    Workspaces must be pairwise disjoint; the shared cache serializes
    installs per tool entry, so overlapping tool sets are safe.
    """
    check_workspaces_disjoint([ws for _plan, ws in pipelines])
    if not pipelines:
        return []

    def one(plan: ExecutionPlan, ws: Workspace) -> RunReport:
        env = prepare_environment(plan, cache, backend)
        return run(plan, ws, env, backend)

    with ThreadPoolExecutor(max_workers=len(pipelines)) as pool:
        futures = [pool.submit(one, plan, ws) for plan, ws in pipelines]
        return [future.result() for future in futures]
