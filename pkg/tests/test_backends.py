import dataclasses
from pathlib import Path

import pytest

import pipeforge.backends as backends_module
from pipeforge.backends import (
    ContainerCommand,
    DryRun,
    LocalProcess,
    backend_from_name,
    render_container_invocation,
    step_dirname,
)
from pipeforge.errors import StepFailure, UnknownBuilder
from pipeforge.executor import Workspace
from pipeforge.planner import make_plan

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def velveth_step(assembly_real):
    return make_plan(assembly_real).step_for_instance(1)


@pytest.fixture
def plan(assembly_real):
    return make_plan(assembly_real)


@pytest.fixture
def ws(tmp_path):
    return Workspace(input_dir=tmp_path / "in", output_dir=tmp_path / "out",
                     staging_dir=tmp_path / "staging")


def with_argv(step, *argv):
    return dataclasses.replace(step, composed_argv=tuple(argv))


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


def test_step_dirname():
    assert step_dirname(1, "velveth") == "001-velveth"
    assert step_dirname(12, "a.b-c_d") == "012-a.b-c_d"
    assert step_dirname(0, "my cmd/x") == "000-my_cmd_x"


def test_backend_from_name():
    assert backend_from_name("dry-run").kind == "dry-run"
    assert backend_from_name("local").kind == "local"
    assert backend_from_name("container").kind == "container"
    with pytest.raises(ValueError, match="podman"):
        backend_from_name("podman")


# --------------------------------------------------------------------------
# DryRun
# --------------------------------------------------------------------------


def test_dry_run_reports_ok_without_io(velveth_step, ws, plan, tmp_path):
    backend = DryRun()
    assert backend.performs_io is False
    result = backend.run_step(velveth_step, tmp_path, ws, plan.config)
    assert result.exit_code == 0
    assert result.launched == velveth_step.composed_argv
    assert list(tmp_path.iterdir()) == []


def test_dry_run_refuses_setup_lines(tmp_path):
    with pytest.raises(AssertionError):
        DryRun().run_setup_line("echo hi", tmp_path)


# --------------------------------------------------------------------------
# LocalProcess
# --------------------------------------------------------------------------


def test_local_propagates_exit_code(velveth_step, ws, plan, tmp_path):
    step = with_argv(velveth_step, "sh", "-c", "exit 3")
    result = LocalProcess().run_step(step, tmp_path, ws, plan.config)
    assert result.exit_code == 3


def test_local_captures_stderr_tail(velveth_step, ws, plan, tmp_path):
    step = with_argv(velveth_step, "sh", "-c", "echo oops >&2; exit 1")
    result = LocalProcess().run_step(step, tmp_path, ws, plan.config)
    assert result.exit_code == 1
    assert "oops" in result.stderr_tail


def test_local_missing_binary_is_127(velveth_step, ws, plan, tmp_path):
    step = with_argv(velveth_step, "definitely-not-a-real-binary-xyz")
    result = LocalProcess().run_step(step, tmp_path, ws, plan.config)
    assert result.exit_code == 127
    assert result.stderr_tail != ""


def test_local_extra_env_overlays(velveth_step, ws, plan, tmp_path):
    step = with_argv(velveth_step, "sh", "-c", 'test "$MARKER" = hello')
    backend = LocalProcess(extra_env={"MARKER": "hello"})
    assert backend.run_step(step, tmp_path, ws, plan.config).exit_code == 0
    assert LocalProcess().run_step(step, tmp_path, ws, plan.config).exit_code != 0


def test_local_runs_in_given_cwd(velveth_step, ws, plan, tmp_path):
    step = with_argv(velveth_step, "sh", "-c", "touch made-here")
    LocalProcess().run_step(step, tmp_path, ws, plan.config)
    assert (tmp_path / "made-here").exists()


def test_local_setup_line_is_a_shell_line(tmp_path):
    code = LocalProcess().run_setup_line("echo one > out.txt && echo two >> out.txt",
                                         tmp_path)
    assert code == 0
    assert (tmp_path / "out.txt").read_text() == "one\ntwo\n"


# --------------------------------------------------------------------------
# ContainerCommand
# --------------------------------------------------------------------------


def test_render_matches_golden(velveth_step, ws, plan):
    tokens = render_container_invocation(velveth_step, ws, plan.config)
    golden = (GOLDEN / "velveth_docker_invocation.txt").read_text()
    expected = golden.replace("<staging>", str(ws.staging_dir)).splitlines()
    assert tokens == expected


def test_render_is_deterministic(velveth_step, ws, plan):
    first = render_container_invocation(velveth_step, ws, plan.config)
    second = render_container_invocation(velveth_step, ws, plan.config)
    assert first == second


def test_render_uses_resource_limits(velveth_step, ws, plan):
    config = dataclasses.replace(plan.config, memory_mib=2048, cpu_cores=4)
    tokens = render_container_invocation(velveth_step, ws, config)
    assert "2048m" in tokens
    assert "4" in tokens


def test_render_unknown_builder(velveth_step, ws, plan):
    config = dataclasses.replace(velveth_step.configurator, builder="Singularity")
    step = dataclasses.replace(velveth_step, configurator=config)
    with pytest.raises(UnknownBuilder, match="Singularity"):
        render_container_invocation(step, ws, plan.config)


def test_container_backend_calls_runner(velveth_step, ws, plan, tmp_path):
    calls = []

    def runner(tokens, cwd):
        calls.append((tokens, cwd))
        return 0

    backend = ContainerCommand(runner=runner)
    result = backend.run_step(velveth_step, tmp_path, ws, plan.config)
    assert result.exit_code == 0
    assert len(calls) == 1
    tokens, cwd = calls[0]
    assert cwd == tmp_path
    assert list(result.launched) == tokens
    assert tokens == render_container_invocation(velveth_step, ws, plan.config)


def test_container_setup_line_wraps_in_shell(tmp_path):
    calls = []
    backend = ContainerCommand(runner=lambda tokens, cwd: calls.append(tokens) or 7)
    assert backend.run_setup_line("make install", tmp_path) == 7
    assert calls == [["/bin/sh", "-c", "make install"]]


def test_missing_runtime_binary_raises(velveth_step, ws, plan, tmp_path, monkeypatch):
    monkeypatch.setitem(backends_module.BUILDER_RUNTIMES, "Docker",
                        "no-such-runtime-xyz")
    backend = ContainerCommand()
    with pytest.raises(StepFailure, match="no-such-runtime-xyz"):
        backend.run_step(velveth_step, tmp_path, ws, plan.config)
