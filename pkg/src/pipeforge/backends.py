"""Execution backends: where a plan step's process actually runs.

Three kinds.  DryRun records what would launch and touches nothing.
LocalProcess spawns the argv directly on this machine.  ContainerCommand
renders a container-runtime invocation (docker style) and shells out to
the runtime binary; tests replace the runner with a recording fake, so no
container library is needed.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable

from .errors import StepFailure, UnknownBuilder

if TYPE_CHECKING:
    from .executor import Workspace
    from .planner import PlanStep, ResourceConfig

# Container runtime binary per configurator builder kind.
BUILDER_RUNTIMES: dict[str, str] = {"Docker": "docker"}

_SETUP_SHELL = "/bin/sh"
_STDERR_TAIL_CHARS = 2000


def step_dirname(instance_index: int, command_name: str) -> str:
    """Per-step working directory name, stable across backends."""
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", command_name)
    return f"{instance_index:03d}-{safe}"


@dataclass(frozen=True)
class StepResult:
    exit_code: int
    launched: tuple[str, ...]
    stderr_tail: str = ""


class Backend:
    """Behavior contract: run one step in a working directory, run one
    setup shell line.  ``performs_io`` gates every filesystem side effect
    in the executor."""

    kind: str = "abstract"
    performs_io: bool = True

    def run_step(self, step: "PlanStep", cwd: Path, workspace: "Workspace",
                 config: "ResourceConfig") -> StepResult:
        raise NotImplementedError

    def run_setup_line(self, line: str, cwd: Path) -> int:
        raise NotImplementedError


class DryRun(Backend):
    """Pure simulation: no writes, no processes, every step reports ok."""

    kind = "dry-run"
    performs_io = False

    def run_step(self, step: "PlanStep", cwd: Path, workspace: "Workspace",
                 config: "ResourceConfig") -> StepResult:
        return StepResult(exit_code=0, launched=tuple(step.composed_argv))

    def run_setup_line(self, line: str, cwd: Path) -> int:
        raise AssertionError("dry-run never executes setup lines")


class LocalProcess(Backend):
    """Run steps as plain subprocesses.

    ``extra_env`` overlays the inherited environment; tests use it to put
    stub tools on PATH and to trigger scripted behaviors.  Memory and cpu
    limits are advisory here: recorded in the report, not enforced.
    """

    kind = "local"

    def __init__(self, extra_env: dict[str, str] | None = None):
        self.extra_env = dict(extra_env or {})

    def _env(self) -> dict[str, str]:
        env = dict(os.environ)
        env.update(self.extra_env)
        return env

    def run_step(self, step: "PlanStep", cwd: Path, workspace: "Workspace",
                 config: "ResourceConfig") -> StepResult:
        argv = list(step.composed_argv)
        try:
            proc = subprocess.run(
                argv, cwd=cwd, env=self._env(),
                capture_output=True, text=True,
            )
        except OSError as exc:
            return StepResult(exit_code=127, launched=tuple(argv),
                              stderr_tail=str(exc))
        return StepResult(
            exit_code=proc.returncode,
            launched=tuple(argv),
            stderr_tail=proc.stderr[-_STDERR_TAIL_CHARS:],
        )

    def run_setup_line(self, line: str, cwd: Path) -> int:
        proc = subprocess.run(line, shell=True, cwd=cwd, env=self._env(),
                              capture_output=True)
        return proc.returncode


Runner = Callable[[list[str], Path], int]


def _default_runner(tokens: list[str], cwd: Path) -> int:
    if shutil.which(tokens[0]) is None:
        raise StepFailure(f"container runtime '{tokens[0]}' not found on PATH")
    return subprocess.run(tokens, cwd=cwd).returncode


class ContainerCommand(Backend):
    """Run each step inside a container via an external runtime binary."""

    kind = "container"

    def __init__(self, runner: Runner | None = None):
        self.runner: Runner = runner if runner is not None else _default_runner

    def run_step(self, step: "PlanStep", cwd: Path, workspace: "Workspace",
                 config: "ResourceConfig") -> StepResult:
        tokens = render_container_invocation(step, workspace, config)
        exit_code = self.runner(tokens, cwd)
        return StepResult(exit_code=exit_code, launched=tuple(tokens))

    def run_setup_line(self, line: str, cwd: Path) -> int:
        return self.runner([_SETUP_SHELL, "-c", line], cwd)


def render_container_invocation(step: "PlanStep", workspace: "Workspace",
                                config: "ResourceConfig") -> list[str]:
    """Deterministic runtime invocation for one step.

    Template (documented in docs/backends.md): the staging directory is
    mounted at /workspace, the working directory is the step's
    subdirectory, memory and cpu limits come from the resource config, the
    image is the configurator uri, then the composed argv.
    """
    runtime = BUILDER_RUNTIMES.get(step.configurator.builder)
    if runtime is None:
        raise UnknownBuilder(
            f"no builder '{step.configurator.builder}' registered"
            f" (known: {', '.join(sorted(BUILDER_RUNTIMES))})"
        )
    workdir = f"/workspace/.steps/{step_dirname(step.instance_index, step.command_name)}"
    return [
        runtime, "run", "--rm",
        "--memory", f"{config.memory_mib}m",
        "--cpus", str(config.cpu_cores),
        "-v", f"{workspace.staging_dir}:/workspace",
        "-w", workdir,
        step.configurator.uri,
        *step.composed_argv,
    ]


def backend_from_name(name: str, *, extra_env: dict[str, str] | None = None) -> Backend:
    if name == "dry-run":
        return DryRun()
    if name == "local":
        return LocalProcess(extra_env=extra_env)
    if name == "container":
        return ContainerCommand()
    raise ValueError(f"unknown backend {name!r}")
