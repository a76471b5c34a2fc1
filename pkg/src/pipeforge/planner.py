"""Planning: chain resolution, dependency graph, execution order, argv
composition and resource computation.

Chains resolve strictly backward over the textual sequence of command
blocks, so the resulting graph is acyclic by construction.  Consecutive
command blocks inside one tool block are additionally linked by a
sameToolOrder edge, which keeps multi-command tools (velveth before
velvetg) in their written order even without an explicit chain.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from typing import Any

from .composers import get_composer
from .errors import CycleDetected, UnboundTemplateArgument, UnresolvedChain
from .repository import (
    CommandDescriptor,
    RepositoryRef,
    ToolConfigurator,
    template_placeholders,
)
from .validation import BoundCommand, ValidatedPipeline

logger = logging.getLogger(__name__)

CHAIN = "chain"
SAME_TOOL_ORDER = "sameToolOrder"


# --------------------------------------------------------------------------
# Graph
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphNode:
    index: int
    tool_name: str
    command_name: str
    priority: int


@dataclass(frozen=True)
class GraphEdge:
    """Directed dependency producer -> consumer.

    Chain edges also carry the consumer argument and producer output they
    bind; ordering edges carry only their kind.
    """

    src: int
    dst: int
    kind: str  # CHAIN | SAME_TOOL_ORDER
    argument_name: str | None = None
    output_name: str | None = None


class ExecutionGraph:
    """A small multigraph over command instances.

    Parallel edges are legal (a pair of blocks may be related by both a
    chain and a sameToolOrder edge) and each counts separately toward
    in-degree.
    """

    def __init__(self) -> None:
        self.nodes: dict[int, GraphNode] = {}
        self.edges: list[GraphEdge] = []

    def add_node(self, node: GraphNode) -> None:
        if node.index in self.nodes:
            raise ValueError(f"duplicate node index {node.index}")
        self.nodes[node.index] = node

    def add_edge(self, edge: GraphEdge) -> None:
        if edge.src not in self.nodes or edge.dst not in self.nodes:
            raise ValueError(f"edge {edge.src}->{edge.dst} references a missing node")
        if edge.src == edge.dst:
            raise ValueError(f"self-edge on node {edge.src}")
        self.edges.append(edge)

    def in_degrees(self) -> dict[int, int]:
        degrees = {index: 0 for index in self.nodes}
        for edge in self.edges:
            degrees[edge.dst] += 1
        return degrees

    def successors(self, index: int) -> list[int]:
        return [e.dst for e in self.edges if e.src == index]

    def incoming_chains(self, index: int) -> list[GraphEdge]:
        return [e for e in self.edges if e.dst == index and e.kind == CHAIN]

    def has_outgoing(self, index: int) -> bool:
        return any(e.src == index for e in self.edges)


def resolve_chain_target(commands: list[BoundCommand], consumer_index: int,
                         tool_name: str | None, command_name: str | None) -> BoundCommand:
    """Find the producer block a chain refers to, searching backward only.

    With no names the producer is the immediately preceding block; with a
    command name, the nearest preceding block running that command; with
    tool and command names, the nearest preceding block of that tool
    running that command.  Anything else, including a forward reference,
    is unresolvable.
    """
    consumer = commands[consumer_index]
    at = f"line {consumer.command_node.line}"
    if command_name is None:
        if consumer_index == 0:
            raise UnresolvedChain(
                f"{at}: chain in the first command block has no previous command"
            )
        return commands[consumer_index - 1]
    for candidate in reversed(commands[:consumer_index]):
        if candidate.command_name != command_name:
            continue
        if tool_name is not None and candidate.tool_name != tool_name:
            continue
        return candidate
    wanted = command_name if tool_name is None else f"{tool_name}.{command_name}"
    raise UnresolvedChain(
        f"{at}: chain target '{wanted}' does not appear before this command"
    )


def build_graph(vp: ValidatedPipeline) -> ExecutionGraph:
    """One node per command block; sameToolOrder edges between consecutive
    blocks of a tool block; one chain edge per chain binding."""
    graph = ExecutionGraph()
    for bound in vp.commands:
        graph.add_node(
            GraphNode(
                index=bound.instance_index,
                tool_name=bound.tool_name,
                command_name=bound.command_name,
                priority=bound.command.priority,
            )
        )

    previous_in_tool: dict[int, int] = {}
    for bound in vp.commands:
        tool_key = id(bound.tool_node)
        if tool_key in previous_in_tool:
            graph.add_edge(
                GraphEdge(previous_in_tool[tool_key], bound.instance_index,
                          SAME_TOOL_ORDER)
            )
        previous_in_tool[tool_key] = bound.instance_index

    for bound in vp.commands:
        for chain in bound.chain_bindings:
            producer = resolve_chain_target(
                vp.commands, bound.instance_index,
                chain.tool_name, chain.command_name,
            )
            if producer.command.output(chain.output_name) is None:
                raise UnresolvedChain(
                    f"line {chain.line}: command '{producer.command_name}' of tool"
                    f" '{producer.tool_name}' declares no output"
                    f" '{chain.output_name}'"
                )
            graph.add_edge(
                GraphEdge(
                    src=producer.instance_index,
                    dst=bound.instance_index,
                    kind=CHAIN,
                    argument_name=chain.argument_name,
                    output_name=chain.output_name,
                )
            )
    return graph


def topological_order(graph: ExecutionGraph) -> list[int]:
    """Kahn's algorithm with a deterministic tie-break: among ready nodes,
    highest command priority first, then smallest instance index."""
    degrees = graph.in_degrees()
    ready: list[tuple[int, int]] = []
    for index, degree in degrees.items():
        if degree == 0:
            heapq.heappush(ready, (-graph.nodes[index].priority, index))
    order: list[int] = []
    while ready:
        _, index = heapq.heappop(ready)
        order.append(index)
        for successor in graph.successors(index):
            degrees[successor] -= 1
            if degrees[successor] == 0:
                heapq.heappush(ready, (-graph.nodes[successor].priority, successor))
    if len(order) != len(graph.nodes):
        stuck = sorted(set(graph.nodes) - set(order))
        raise CycleDetected(f"dependency cycle involving nodes {stuck}")
    return order


# --------------------------------------------------------------------------
# Bindings, argv and outputs
# --------------------------------------------------------------------------


def compose_arguments(bindings: list[tuple[str, str]], cd: CommandDescriptor,
                      composer: str | None = None) -> list[str]:
    """Token list for the given bindings, which must already follow the
    descriptor's declaration order.  The command token itself is not
    included."""
    return get_composer(composer or cd.argument_composer)(bindings)


def _substitute(template: str, bindings: dict[str, str], where: str) -> str:
    resolved = template
    for name in template_placeholders(template):
        if name not in bindings:
            raise UnboundTemplateArgument(
                f"{where}: output template '{template}' references unbound"
                f" argument '{name}'"
            )
        resolved = resolved.replace(f"${name}", bindings[name])
    return resolved


def resolve_outputs(node: BoundCommand, bindings: dict[str, str]) -> list[tuple[str, str]]:
    """Declared outputs as (name, path) pairs in descriptor order, with
    every ``$argName`` placeholder replaced by its bound value."""
    where = f"command '{node.command_name}' of tool '{node.tool_name}'"
    return [
        (out.name, _substitute(out.value_template, bindings, where))
        for out in node.command.outputs
    ]


# --------------------------------------------------------------------------
# Resources and plan
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResourceConfig:
    memory_mib: int
    cpu_cores: int
    input_path: str
    output_path: str

    def __post_init__(self) -> None:
        if self.memory_mib < 1:
            raise ValueError("memory_mib must be at least 1")
        if self.cpu_cores < 1:
            raise ValueError("cpu_cores must be at least 1")


def compute_resources(vp: ValidatedPipeline, *, input_path: str, output_path: str,
                      memory_mib: int | None = None,
                      cpu_cores: int | None = None) -> ResourceConfig:
    """Memory defaults to the highest requiredMemory among the used tools;
    an explicit override wins even when it undercuts that maximum (the run
    may then fail, which is the caller's risk)."""
    required = max(d.required_memory_mib for d in vp.descriptors.values())
    if memory_mib is None:
        memory_mib = required
    elif memory_mib < required:
        logger.warning(
            "memory override %d MiB is below the largest tool requirement"
            " %d MiB; execution may fail",
            memory_mib, required,
        )
    return ResourceConfig(
        memory_mib=memory_mib,
        cpu_cores=cpu_cores if cpu_cores is not None else 1,
        input_path=input_path,
        output_path=output_path,
    )


@dataclass(frozen=True)
class StagedInput:
    argument_name: str
    producer_instance: int
    output_name: str
    path: str


@dataclass(frozen=True)
class PlanStep:
    instance_index: int
    tool_name: str
    command_name: str
    configuration_name: str
    composed_argv: tuple[str, ...]
    configurator: ToolConfigurator
    tool_setup: tuple[str, ...]
    tool_version: str
    staged_inputs: tuple[StagedInput, ...]
    declared_outputs: tuple[tuple[str, str], ...]
    terminal: bool


@dataclass
class ExecutionPlan:
    steps: list[PlanStep]
    config: ResourceConfig
    repository: RepositoryRef
    graph: ExecutionGraph = field(repr=False)
    vp: ValidatedPipeline = field(repr=False)

    def step_for_instance(self, instance_index: int) -> PlanStep:
        for step in self.steps:
            if step.instance_index == instance_index:
                return step
        raise KeyError(instance_index)


def make_plan(vp: ValidatedPipeline, graph: ExecutionGraph | None = None,
              order: list[int] | None = None,
              config: ResourceConfig | None = None) -> ExecutionPlan:
    """Assemble the executable plan: steps in topological order, each with
    its composed argv, staged inputs and resolved declared outputs."""
    if graph is None:
        graph = build_graph(vp)
    if order is None:
        order = topological_order(graph)
    if config is None:
        config = compute_resources(vp, input_path="input", output_path="output")

    by_index = {b.instance_index: b for b in vp.commands}

    # Bindings resolve in textual order; chains only look backward, so every
    # producer's outputs are known before its consumers bind them.
    bindings: dict[int, dict[str, str]] = {}
    outputs: dict[int, list[tuple[str, str]]] = {}
    staged: dict[int, list[StagedInput]] = {}
    for bound in vp.commands:
        index = bound.instance_index
        values = dict(bound.literal_bindings)
        staged[index] = []
        for edge in graph.incoming_chains(index):
            produced = dict(outputs[edge.src])
            path = produced[edge.output_name]
            values[edge.argument_name] = path
            staged[index].append(
                StagedInput(
                    argument_name=edge.argument_name,
                    producer_instance=edge.src,
                    output_name=edge.output_name,
                    path=path,
                )
            )
        bindings[index] = values
        outputs[index] = resolve_outputs(bound, values)

    steps: list[PlanStep] = []
    for index in order:
        bound = by_index[index]
        ordered = [
            (arg.name, bindings[index][arg.name])
            for arg in bound.command.arguments
            if arg.name in bindings[index]
        ]
        argv = [bound.command.command]
        argv.extend(compose_arguments(ordered, bound.command))
        steps.append(
            PlanStep(
                instance_index=index,
                tool_name=bound.tool_name,
                command_name=bound.command_name,
                configuration_name=bound.tool_node.configuration_name,
                composed_argv=tuple(argv),
                configurator=bound.configurator,
                tool_setup=bound.descriptor.setup,
                tool_version=bound.descriptor.version,
                staged_inputs=tuple(staged[index]),
                declared_outputs=tuple(outputs[index]),
                terminal=not graph.has_outgoing(index),
            )
        )

    return ExecutionPlan(
        steps=steps,
        config=config,
        repository=RepositoryRef(
            vp.pipeline.repository_kind, vp.pipeline.repository_location
        ),
        graph=graph,
        vp=vp,
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def _edge_sort_key(edge: GraphEdge) -> tuple:
    return (edge.src, edge.dst, edge.kind, edge.argument_name or "")


def plan_to_json_dict(plan: ExecutionPlan) -> dict[str, Any]:
    steps = []
    for position, step in enumerate(plan.steps):
        steps.append({
            "index": position,
            "instanceIndex": step.instance_index,
            "tool": step.tool_name,
            "command": step.command_name,
            "configuration": step.configuration_name,
            "builder": step.configurator.builder,
            "uri": step.configurator.uri,
            "configuratorSetup": list(step.configurator.setup),
            "toolSetup": list(step.tool_setup),
            "argv": list(step.composed_argv),
            "stagedInputs": [
                {
                    "argument": si.argument_name,
                    "fromInstance": si.producer_instance,
                    "output": si.output_name,
                    "path": si.path,
                }
                for si in step.staged_inputs
            ],
            "outputs": {name: path for name, path in step.declared_outputs},
            "terminal": step.terminal,
        })
    edges = [
        {
            "from": edge.src,
            "to": edge.dst,
            "kind": edge.kind,
            **(
                {"argument": edge.argument_name, "output": edge.output_name}
                if edge.kind == CHAIN else {}
            ),
        }
        for edge in sorted(plan.graph.edges, key=_edge_sort_key)
    ]
    return {
        "repository": {
            "kind": plan.repository.kind,
            "location": plan.repository.location,
        },
        "resources": {
            "memoryMiB": plan.config.memory_mib,
            "cpuCores": plan.config.cpu_cores,
            "inputPath": plan.config.input_path,
            "outputPath": plan.config.output_path,
        },
        "steps": steps,
        "edges": edges,
    }


def plan_to_json(plan: ExecutionPlan) -> str:
    return json.dumps(plan_to_json_dict(plan), indent=2) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(graph: ExecutionGraph) -> str:
    """DOT digraph: one node per command instance, edges labeled with their
    origin (chain edges also show output -> argument)."""
    lines = ["digraph pipeline {", "    rankdir=LR;"]
    for index in sorted(graph.nodes):
        node = graph.nodes[index]
        label = _dot_escape(f"{index}: {node.tool_name}.{node.command_name}")
        lines.append(f'    n{index} [label="{label}"];')
    for edge in sorted(graph.edges, key=_edge_sort_key):
        if edge.kind == CHAIN:
            label = _dot_escape(
                f"chain: {edge.output_name} -> {edge.argument_name}"
            )
        else:
            label = SAME_TOOL_ORDER
        lines.append(f'    n{edge.src} -> n{edge.dst} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
