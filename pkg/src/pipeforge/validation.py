"""Semantic validation: bind a parsed pipeline to repository metadata.

Checks, per command block: the tool and configurator exist, the command
exists on the tool, every bound argument is declared, every required
argument is bound.  Within one block a plain argument bound twice keeps the
last value (with a warning); an argument bound both literally and by chain,
or chained twice, is an error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .dsl import ArgumentNode, ChainNode, CommandNode, PipelineNode, ToolNode
from .errors import (
    ConfiguratorNotFound,
    ConflictingBinding,
    MissingRequiredArgument,
    ToolNotFound,
    UnknownArgument,
    UnknownCommand,
    UnknownConfigurator,
    UnknownTool,
)
from .repository import (
    CommandDescriptor,
    RepositoryHandle,
    ToolConfigurator,
    ToolDescriptor,
)

logger = logging.getLogger(__name__)


@dataclass
class BoundCommand:
    """One command block tied to its descriptors and bindings.

    ``instance_index`` is the block's 0-based position in pipeline text;
    it is the stable identity used by chains, the planner and reports.
    """

    instance_index: int
    tool_node: ToolNode
    command_node: CommandNode
    descriptor: ToolDescriptor
    command: CommandDescriptor
    configurator: ToolConfigurator
    literal_bindings: dict[str, str] = field(default_factory=dict)
    chain_bindings: list[ChainNode] = field(default_factory=list)

    @property
    def tool_name(self) -> str:
        return self.tool_node.tool_name

    @property
    def command_name(self) -> str:
        return self.command_node.name


@dataclass
class ValidatedPipeline:
    pipeline: PipelineNode
    handle: RepositoryHandle
    descriptors: dict[str, ToolDescriptor]
    configurators: dict[tuple[str, str], ToolConfigurator]
    commands: list[BoundCommand]


def _at(node) -> str:
    return f"line {node.line}"


def _bind_block(instance_index: int, tool_node: ToolNode, command_node: CommandNode,
                descriptor: ToolDescriptor, configurator: ToolConfigurator) -> BoundCommand:
    command = descriptor.command(command_node.name)
    if command is None:
        known = ", ".join(c.name for c in descriptor.commands)
        raise UnknownCommand(
            f"{_at(command_node)}: tool '{descriptor.name}' has no command"
            f" '{command_node.name}' (has: {known})"
        )

    literal: dict[str, str] = {}
    chained: dict[str, ChainNode] = {}
    chains: list[ChainNode] = []
    for entry in command_node.entries:
        if isinstance(entry, ArgumentNode):
            if command.argument(entry.name) is None:
                raise UnknownArgument(
                    f"{_at(entry)}: command '{command.name}' of tool"
                    f" '{descriptor.name}' has no argument '{entry.name}'"
                )
            if entry.name in chained:
                raise ConflictingBinding(
                    f"{_at(entry)}: argument '{entry.name}' is already chained"
                    " and cannot also take a literal value"
                )
            if entry.name in literal:
                logger.warning(
                    "%s: argument '%s' bound twice in command '%s'; keeping the"
                    " later value %r",
                    _at(entry), entry.name, command.name, entry.value,
                )
            literal[entry.name] = entry.value
        else:
            if command.argument(entry.argument_name) is None:
                raise UnknownArgument(
                    f"{_at(entry)}: command '{command.name}' of tool"
                    f" '{descriptor.name}' has no argument '{entry.argument_name}'"
                )
            if entry.argument_name in literal:
                raise ConflictingBinding(
                    f"{_at(entry)}: argument '{entry.argument_name}' already has"
                    " a literal value and cannot also be chained"
                )
            if entry.argument_name in chained:
                raise ConflictingBinding(
                    f"{_at(entry)}: argument '{entry.argument_name}' is chained"
                    " more than once"
                )
            chained[entry.argument_name] = entry
            chains.append(entry)

    bound_names = set(literal) | set(chained)
    for arg in command.arguments:
        if arg.is_required and arg.name not in bound_names:
            raise MissingRequiredArgument(
                f"{_at(command_node)}: command '{command.name}' of tool"
                f" '{descriptor.name}' requires argument '{arg.name}'"
            )

    return BoundCommand(
        instance_index=instance_index,
        tool_node=tool_node,
        command_node=command_node,
        descriptor=descriptor,
        command=command,
        configurator=configurator,
        literal_bindings=literal,
        chain_bindings=chains,
    )


def validate(pipeline: PipelineNode, handle: RepositoryHandle) -> ValidatedPipeline:
    """Resolve all metadata for a pipeline, fetching each descriptor and
    each (tool, configuration) pair exactly once."""
    descriptors: dict[str, ToolDescriptor] = {}
    configurators: dict[tuple[str, str], ToolConfigurator] = {}
    commands: list[BoundCommand] = []
    instance_index = 0

    for tool_node in pipeline.tools:
        name = tool_node.tool_name
        if name not in descriptors:
            try:
                descriptors[name] = handle.get_descriptor(name)
            except ToolNotFound as exc:
                raise UnknownTool(f"{_at(tool_node)}: {exc}") from exc
        descriptor = descriptors[name]

        config_key = (name, tool_node.configuration_name)
        if config_key not in configurators:
            try:
                configurators[config_key] = handle.get_configurator(
                    name, tool_node.configuration_name
                )
            except ConfiguratorNotFound as exc:
                raise UnknownConfigurator(f"{_at(tool_node)}: {exc}") from exc
        configurator = configurators[config_key]

        for command_node in tool_node.commands:
            commands.append(
                _bind_block(instance_index, tool_node, command_node,
                            descriptor, configurator)
            )
            instance_index += 1

    return ValidatedPipeline(
        pipeline=pipeline,
        handle=handle,
        descriptors=descriptors,
        configurators=configurators,
        commands=commands,
    )
