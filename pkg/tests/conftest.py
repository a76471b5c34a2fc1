import os
import shutil
from dataclasses import dataclass
from pathlib import Path

import pytest

from pipeforge.backends import Backend, LocalProcess
from pipeforge.dsl import PipelineNode, parse_file
from pipeforge.executor import (
    EnvironmentState,
    RunReport,
    ToolCache,
    Workspace,
    prepare_environment,
    run,
)
from pipeforge.planner import ExecutionPlan, compute_resources, make_plan
from pipeforge.repository import RepositoryHandle, RepositoryRef, open_repository
from pipeforge.validation import ValidatedPipeline, validate

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture
def assembly_path() -> Path:
    return FIXTURES / "assembly.pipes"


@pytest.fixture
def assembly_ast(assembly_path) -> PipelineNode:
    return parse_file(assembly_path)


@pytest.fixture
def real_repo() -> RepositoryHandle:
    return open_repository(RepositoryRef("Local", str(FIXTURES / "repo")))


@pytest.fixture
def stub_repo() -> RepositoryHandle:
    return open_repository(RepositoryRef("Local", str(FIXTURES / "stubrepo")))


@pytest.fixture
def assembly_real(assembly_ast, real_repo) -> ValidatedPipeline:
    return validate(assembly_ast, real_repo)


@pytest.fixture
def assembly_stub(assembly_ast, stub_repo) -> ValidatedPipeline:
    return validate(assembly_ast, stub_repo)


def stub_path_env(extra: dict[str, str] | None = None) -> dict[str, str]:
    env = {"PATH": str(FIXTURES / "stubbin") + os.pathsep + os.environ.get("PATH", "")}
    env.update(extra or {})
    return env


@pytest.fixture
def input_dir(tmp_path) -> Path:
    dst = tmp_path / "input"
    shutil.copytree(FIXTURES / "input", dst)
    return dst


@dataclass
class StubRig:
    """A ready-to-run stub pipeline: plan, workspace, cache and backend."""

    vp: ValidatedPipeline
    plan: ExecutionPlan
    ws: Workspace
    cache: ToolCache
    backend: Backend

    def prepare(self) -> EnvironmentState:
        return prepare_environment(self.plan, self.cache, self.backend)

    def execute(self, env: EnvironmentState | None = None) -> RunReport:
        if env is None:
            env = self.prepare()
        return run(self.plan, self.ws, env, self.backend)


@pytest.fixture
def stub_rig(tmp_path, input_dir):
    """Factory for stub pipeline rigs sharing one tmp dir; pass extra
    environment variables to script stub behavior (STUB_FAIL and so on)."""

    def make(extra_env: dict[str, str] | None = None, *, name: str = "p",
             backend: Backend | None = None,
             cache: ToolCache | None = None) -> StubRig:
        vp = validate(parse_file(FIXTURES / "assembly.pipes"),
                      open_repository(RepositoryRef("Local", str(FIXTURES / "stubrepo"))))
        config = compute_resources(vp, input_path=str(input_dir),
                                   output_path=str(tmp_path / name / "out"))
        plan = make_plan(vp, config=config)
        ws = Workspace(
            input_dir=input_dir,
            output_dir=tmp_path / name / "out",
            staging_dir=tmp_path / name / "staging",
        )
        return StubRig(
            vp=vp,
            plan=plan,
            ws=ws,
            cache=cache if cache is not None else ToolCache(tmp_path / "cache"),
            backend=backend if backend is not None
            else LocalProcess(extra_env=stub_path_env(extra_env)),
        )

    return make
