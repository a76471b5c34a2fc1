"""Tool repositories: descriptor and configurator models plus providers.

A repository stores, per tool, one ``Descriptor.json`` and one
``<ConfigName>.json`` per configurator, in a directory named after the tool
(optionally with a ``Logo.png``).  Two providers are implemented: a local
directory tree and a remote HTTP base serving the same layout.  Every read
is recorded in a per-handle fetch log so callers can observe cold/warm
behavior.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .composers import composer_exists
from .errors import (
    ConfiguratorNotFound,
    FetchFailure,
    LocationUnreachable,
    SchemaViolation,
    ToolNotFound,
)

DESCRIPTOR_FILE = "Descriptor.json"
INDEX_FILE = "tools.json"
LOGO_FILE = "Logo.png"

VALUE_TYPES = frozenset({"string", "int", "float", "file", "directory", "flag"})
OUTPUT_KINDS = frozenset({"file", "directory"})

_REMOTE_TIMEOUT_S = 10.0


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ArgumentDescriptor:
    """One declarable argument of a command."""

    name: str
    value_type: str
    output_type: str | None = None
    is_required: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"name": self.name, "valueType": self.value_type}
        if self.output_type is not None:
            data["outputType"] = self.output_type
        data["isRequired"] = self.is_required
        data.update(sorted(self.extra.items()))
        return data


@dataclass(frozen=True)
class OutputDescriptor:
    """One declared output of a command.

    ``value_template`` may contain ``$argName`` placeholders that are
    resolved against the bound argument values of a command instance.
    """

    name: str
    output_kind: str
    value_template: str
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "outputKind": self.output_kind,
            "valueTemplate": self.value_template,
        }
        data.update(sorted(self.extra.items()))
        return data


@dataclass(frozen=True)
class CommandDescriptor:
    name: str
    command: str
    priority: int
    argument_composer: str
    arguments: tuple[ArgumentDescriptor, ...] = ()
    outputs: tuple[OutputDescriptor, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def argument(self, name: str) -> ArgumentDescriptor | None:
        for arg in self.arguments:
            if arg.name == name:
                return arg
        return None

    def output(self, name: str) -> OutputDescriptor | None:
        for out in self.outputs:
            if out.name == name:
                return out
        return None

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "command": self.command,
            "priority": self.priority,
            "argumentComposer": self.argument_composer,
            "arguments": [a.to_json_dict() for a in self.arguments],
            "outputs": [o.to_json_dict() for o in self.outputs],
        }
        data.update(sorted(self.extra.items()))
        return data


@dataclass(frozen=True)
class ToolDescriptor:
    """Everything needed to run a tool: commands, arguments, outputs,
    setup actions and the memory it needs (in MiB)."""

    name: str
    version: str
    required_memory_mib: int
    setup: tuple[str, ...] = ()
    commands: tuple[CommandDescriptor, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def command(self, name: str) -> CommandDescriptor | None:
        for cmd in self.commands:
            if cmd.name == name:
                return cmd
        return None

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "version": self.version,
            "setup": list(self.setup),
            "requiredMemory": self.required_memory_mib,
            "commands": [c.to_json_dict() for c in self.commands],
        }
        data.update(sorted(self.extra.items()))
        return data


@dataclass(frozen=True)
class ToolConfigurator:
    """How to obtain and host a tool in an execution context."""

    name: str
    builder: str
    uri: str
    setup: tuple[str, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "builder": self.builder,
            "uri": self.uri,
            "setup": list(self.setup),
        }
        data.update(sorted(self.extra.items()))
        return data


@dataclass(frozen=True)
class RepositoryRef:
    """A reference to a tool repository: a local directory or a URL base."""

    kind: str  # "Local" | "Remote"
    location: str


@dataclass(frozen=True)
class FetchRecord:
    operation: str  # "descriptor" | "configurator" | "artifact"
    tool_name: str


# --------------------------------------------------------------------------
# Schema parsing
# --------------------------------------------------------------------------


def _violate(tool: str, field_name: str, reason: str) -> SchemaViolation:
    return SchemaViolation(f"tool '{tool}': field '{field_name}': {reason}")


def _take_str(data: dict, key: str, tool: str, *, allow_empty: bool = False) -> str:
    value = data.get(key)
    if not isinstance(value, str):
        raise _violate(tool, key, "missing or not a string")
    if not value and not allow_empty:
        raise _violate(tool, key, "must be non-empty")
    return value


def _take_bool(data: dict, key: str, tool: str, default: bool = False) -> bool:
    value = data.get(key, default)
    if isinstance(value, bool):
        return value
    # Descriptor files in the wild spell booleans as "true"/"false" strings.
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise _violate(tool, key, f"expected a boolean, got {value!r}")


def _take_setup(data: dict, tool: str) -> tuple[str, ...]:
    lines = data.get("setup", [])
    if not isinstance(lines, list) or not all(isinstance(x, str) for x in lines):
        raise _violate(tool, "setup", "must be a list of shell-line strings")
    return tuple(lines)


def _extras(data: dict, known: frozenset[str]) -> dict[str, Any]:
    return {k: v for k, v in data.items() if k not in known}


_ARG_KEYS = frozenset({"name", "valueType", "outputType", "isRequired"})
_OUTPUT_KEYS = frozenset({"name", "outputKind", "valueTemplate"})
_COMMAND_KEYS = frozenset(
    {"name", "command", "priority", "argumentComposer", "arguments", "outputs"}
)
_DESCRIPTOR_KEYS = frozenset({"name", "version", "setup", "requiredMemory", "commands"})
_CONFIGURATOR_KEYS = frozenset({"name", "builder", "uri", "setup"})


def _parse_argument(data: Any, tool: str, command: str) -> ArgumentDescriptor:
    where = f"{command}.arguments"
    if not isinstance(data, dict):
        raise _violate(tool, where, "argument entry must be an object")
    name = _take_str(data, "name", tool)
    value_type = _take_str(data, "valueType", tool)
    if value_type not in VALUE_TYPES:
        raise _violate(
            tool, f"{where}[{name}].valueType",
            f"{value_type!r} is not one of {sorted(VALUE_TYPES)}",
        )
    output_type = data.get("outputType")
    if output_type is not None:
        if not isinstance(output_type, str) or not output_type:
            raise _violate(tool, f"{where}[{name}].outputType", "must be a non-empty string")
        if value_type not in ("file", "directory"):
            raise _violate(
                tool, f"{where}[{name}].outputType",
                "only file or directory arguments may name an output",
            )
    return ArgumentDescriptor(
        name=name,
        value_type=value_type,
        output_type=output_type,
        is_required=_take_bool(data, "isRequired", tool),
        extra=_extras(data, _ARG_KEYS),
    )


_TEMPLATE_PLACEHOLDER = None  # set lazily to avoid importing re at module top twice

import re  # noqa: E402  (kept close to its single use below)

_PLACEHOLDER_RE = re.compile(r"\$([A-Za-z0-9_-]+)")


def template_placeholders(template: str) -> list[str]:
    """Names referenced by ``$argName`` placeholders, in textual order."""
    return _PLACEHOLDER_RE.findall(template)


def _parse_output(data: Any, tool: str, command: str,
                  argument_names: frozenset[str]) -> OutputDescriptor:
    where = f"{command}.outputs"
    if not isinstance(data, dict):
        raise _violate(tool, where, "output entry must be an object")
    name = _take_str(data, "name", tool)
    kind = _take_str(data, "outputKind", tool)
    if kind not in OUTPUT_KINDS:
        raise _violate(
            tool, f"{where}[{name}].outputKind",
            f"{kind!r} is not one of {sorted(OUTPUT_KINDS)}",
        )
    template = _take_str(data, "valueTemplate", tool)
    for placeholder in template_placeholders(template):
        if placeholder not in argument_names:
            raise _violate(
                tool, f"{where}[{name}].valueTemplate",
                f"placeholder '${placeholder}' does not name a declared argument",
            )
    return OutputDescriptor(
        name=name,
        output_kind=kind,
        value_template=template,
        extra=_extras(data, _OUTPUT_KEYS),
    )


def _parse_command(data: Any, tool: str) -> CommandDescriptor:
    if not isinstance(data, dict):
        raise _violate(tool, "commands", "command entry must be an object")
    name = _take_str(data, "name", tool)
    command = _take_str(data, "command", tool)
    priority = data.get("priority")
    if not isinstance(priority, int) or isinstance(priority, bool):
        raise _violate(tool, f"{name}.priority", "missing or not an integer")
    composer = _take_str(data, "argumentComposer", tool)
    if not composer_exists(composer):
        raise _violate(tool, f"{name}.argumentComposer",
                       f"'{composer}' is not a registered composer")

    arguments = tuple(
        _parse_argument(entry, tool, name) for entry in data.get("arguments", [])
    )
    seen: set[str] = set()
    for arg in arguments:
        if arg.name in seen:
            raise _violate(tool, f"{name}.arguments", f"duplicate argument '{arg.name}'")
        seen.add(arg.name)

    argument_names = frozenset(a.name for a in arguments)
    outputs = tuple(
        _parse_output(entry, tool, name, argument_names)
        for entry in data.get("outputs", [])
    )
    seen.clear()
    for out in outputs:
        if out.name in seen:
            raise _violate(tool, f"{name}.outputs", f"duplicate output '{out.name}'")
        seen.add(out.name)

    return CommandDescriptor(
        name=name,
        command=command,
        priority=priority,
        argument_composer=composer,
        arguments=arguments,
        outputs=outputs,
        extra=_extras(data, _COMMAND_KEYS),
    )


def parse_descriptor(data: Any, *, source: str = "<descriptor>") -> ToolDescriptor:
    """Build a :class:`ToolDescriptor` from decoded JSON, checking every
    schema invariant.  Raises :class:`SchemaViolation` naming the offending
    field and tool."""
    if not isinstance(data, dict):
        raise SchemaViolation(f"tool '{source}': descriptor must be a JSON object")
    name = _take_str(data, "name", data.get("name") or source)
    version = _take_str(data, "version", name)
    memory = data.get("requiredMemory")
    if not isinstance(memory, int) or isinstance(memory, bool) or memory <= 0:
        raise _violate(name, "requiredMemory", f"must be a positive integer, got {memory!r}")
    commands_data = data.get("commands")
    if not isinstance(commands_data, list) or not commands_data:
        raise _violate(name, "commands", "must be a non-empty list")
    commands = tuple(_parse_command(entry, name) for entry in commands_data)
    seen: set[str] = set()
    for cmd in commands:
        if cmd.name in seen:
            raise _violate(name, "commands", f"duplicate command '{cmd.name}'")
        seen.add(cmd.name)
    return ToolDescriptor(
        name=name,
        version=version,
        required_memory_mib=memory,
        setup=_take_setup(data, name),
        commands=commands,
        extra=_extras(data, _DESCRIPTOR_KEYS),
    )


def parse_configurator(data: Any, *, tool: str,
                       expected_name: str | None = None) -> ToolConfigurator:
    if not isinstance(data, dict):
        raise SchemaViolation(f"tool '{tool}': configurator must be a JSON object")
    name = _take_str(data, "name", tool)
    if expected_name is not None and name != expected_name:
        raise _violate(tool, "name",
                       f"configurator file '{expected_name}' declares name '{name}'")
    return ToolConfigurator(
        name=name,
        builder=_take_str(data, "builder", tool),
        uri=_take_str(data, "uri", tool),
        setup=_take_setup(data, tool),
        extra=_extras(data, _CONFIGURATOR_KEYS),
    )


# --------------------------------------------------------------------------
# Providers
# --------------------------------------------------------------------------


class RepositoryHandle:
    """Read access to one repository plus its private fetch log.

    Immutable after open except for the fetch log, whose appends are
    serialized so concurrent pipeline executions may share a handle.
    """

    def __init__(self, ref: RepositoryRef):
        self.ref = ref
        self._log: list[FetchRecord] = []
        self._log_lock = threading.Lock()

    # -- instrumentation ----------------------------------------------------

    def _record(self, operation: str, tool_name: str) -> None:
        with self._log_lock:
            self._log.append(FetchRecord(operation, tool_name))

    def fetch_log(self) -> tuple[FetchRecord, ...]:
        """All descriptor/configurator/artifact fetches since open, in call
        order."""
        with self._log_lock:
            return tuple(self._log)

    def fetch_artifact(self, tool_name: str, uri: str) -> dict[str, Any]:
        """Record an artifact fetch and return its payload metadata.

        Artifacts themselves live behind the configurator ``uri`` (for a
        container builder, an image reference pulled by the runtime); the
        repository's role is to account for the fetch.
        """
        self._record("artifact", tool_name)
        return {"tool": tool_name, "uri": uri}

    # -- provider API -------------------------------------------------------

    def list_tools(self) -> list[str]:
        raise NotImplementedError

    def get_descriptor(self, tool_name: str) -> ToolDescriptor:
        raise NotImplementedError

    def get_configurator(self, tool_name: str, config_name: str) -> ToolConfigurator:
        raise NotImplementedError

    def logo_path(self, tool_name: str) -> str | None:
        raise NotImplementedError


class LocalRepository(RepositoryHandle):
    """Repository rooted at a local directory, one subdirectory per tool."""

    def __init__(self, ref: RepositoryRef):
        super().__init__(ref)
        self.root = Path(ref.location)
        if not self.root.is_dir():
            raise LocationUnreachable(f"repository directory not found: {self.root}")

    def list_tools(self) -> list[str]:
        try:
            names = [
                entry.name
                for entry in self.root.iterdir()
                if entry.is_dir() and (entry / DESCRIPTOR_FILE).is_file()
            ]
        except OSError as exc:
            raise FetchFailure(f"cannot list {self.root}: {exc}") from exc
        return sorted(names)

    def _read_json(self, path: Path, tool: str) -> Any:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise FetchFailure(f"tool '{tool}': cannot read {path}: {exc}") from exc
        try:
            return json.loads(text)
        except ValueError as exc:
            raise SchemaViolation(f"tool '{tool}': {path.name}: invalid JSON: {exc}") from exc

    def get_descriptor(self, tool_name: str) -> ToolDescriptor:
        path = self.root / tool_name / DESCRIPTOR_FILE
        if not path.is_file():
            raise ToolNotFound(f"no tool '{tool_name}' in {self.root}")
        data = self._read_json(path, tool_name)
        self._record("descriptor", tool_name)
        descriptor = parse_descriptor(data, source=tool_name)
        if descriptor.name != tool_name:
            raise _violate(tool_name, "name",
                           f"descriptor declares name '{descriptor.name}'")
        return descriptor

    def get_configurator(self, tool_name: str, config_name: str) -> ToolConfigurator:
        tool_dir = self.root / tool_name
        if not (tool_dir / DESCRIPTOR_FILE).is_file():
            raise ToolNotFound(f"no tool '{tool_name}' in {self.root}")
        path = tool_dir / f"{config_name}.json"
        if not path.is_file():
            raise ConfiguratorNotFound(
                f"tool '{tool_name}' has no configurator '{config_name}'"
            )
        data = self._read_json(path, tool_name)
        self._record("configurator", tool_name)
        return parse_configurator(data, tool=tool_name, expected_name=config_name)

    def logo_path(self, tool_name: str) -> str | None:
        path = self.root / tool_name / LOGO_FILE
        return str(path) if path.is_file() else None


class RemoteRepository(RepositoryHandle):
    """Repository behind an HTTP(S) base URL mirroring the local layout.

    Raw file hosts cannot enumerate directories, so a remote repository
    publishes a ``tools.json`` index (a JSON array of tool names) at its
    base.
    """

    def __init__(self, ref: RepositoryRef):
        super().__init__(ref)
        parsed = urllib.parse.urlparse(ref.location)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise LocationUnreachable(
                f"remote location must be an absolute http(s) URL: {ref.location!r}"
            )
        self.base = ref.location.rstrip("/")

    def _url(self, *parts: str) -> str:
        return "/".join([self.base, *(urllib.parse.quote(p) for p in parts)])

    def _get(self, url: str, tool: str) -> bytes | None:
        """GET a repository file; ``None`` on 404, FetchFailure otherwise."""
        try:
            with urllib.request.urlopen(url, timeout=_REMOTE_TIMEOUT_S) as response:
                return response.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                return None
            raise FetchFailure(f"tool '{tool}': GET {url} failed: HTTP {exc.code}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise FetchFailure(f"tool '{tool}': GET {url} failed: {exc}") from exc

    def _get_json(self, url: str, tool: str) -> Any | None:
        raw = self._get(url, tool)
        if raw is None:
            return None
        try:
            return json.loads(raw.decode("utf-8"))
        except ValueError as exc:
            raise SchemaViolation(f"tool '{tool}': {url}: invalid JSON: {exc}") from exc

    def list_tools(self) -> list[str]:
        data = self._get_json(self._url(INDEX_FILE), "<index>")
        if data is None:
            raise FetchFailure(f"remote repository has no {INDEX_FILE} index at {self.base}")
        if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
            raise SchemaViolation(f"{INDEX_FILE} must be a JSON array of tool names")
        return sorted(data)

    def get_descriptor(self, tool_name: str) -> ToolDescriptor:
        data = self._get_json(self._url(tool_name, DESCRIPTOR_FILE), tool_name)
        if data is None:
            raise ToolNotFound(f"no tool '{tool_name}' at {self.base}")
        self._record("descriptor", tool_name)
        descriptor = parse_descriptor(data, source=tool_name)
        if descriptor.name != tool_name:
            raise _violate(tool_name, "name",
                           f"descriptor declares name '{descriptor.name}'")
        return descriptor

    def get_configurator(self, tool_name: str, config_name: str) -> ToolConfigurator:
        data = self._get_json(self._url(tool_name, f"{config_name}.json"), tool_name)
        if data is None:
            raise ConfiguratorNotFound(
                f"tool '{tool_name}' has no configurator '{config_name}' at {self.base}"
            )
        self._record("configurator", tool_name)
        return parse_configurator(data, tool=tool_name, expected_name=config_name)

    def logo_path(self, tool_name: str) -> str | None:
        # Metadata only: the logo is never fetched, its URL is just derivable.
        return self._url(tool_name, LOGO_FILE)


def open_repository(ref: RepositoryRef) -> RepositoryHandle:
    """Open a repository handle; no tool data is fetched eagerly."""
    if ref.kind == "Local":
        return LocalRepository(ref)
    if ref.kind == "Remote":
        return RemoteRepository(ref)
    raise LocationUnreachable(f"unknown repository kind {ref.kind!r}")


def iter_descriptors(handle: RepositoryHandle) -> Iterator[ToolDescriptor]:
    """Convenience: all descriptors of a repository, in listed order."""
    for name in handle.list_tools():
        yield handle.get_descriptor(name)
