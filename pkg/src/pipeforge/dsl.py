"""The .pipes pipeline language: lexer, parser, AST and serializer.

Grammar (keywords are bare, case-sensitive words; every name and value is a
double-quoted string; ``//`` starts a comment running to end of line):

    pipeline ::= Pipeline repositoryType repositoryLocation { tool+ }
    tool     ::= tool toolName configurationName { command+ }
    command  ::= command commandName { (argument | chain)+ }
    argument ::= argument argumentName argumentValue
    chain    ::= chain argumentName ((toolName)? commandName)? outputName

A chain is disambiguated by counting its quoted strings: two mean
(argument, output), three mean (argument, command, output), four mean
(argument, tool, command, output).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import PipelineSyntaxError

KEYWORDS = frozenset({"Pipeline", "tool", "command", "argument", "chain"})

_REPOSITORY_KINDS = {
    "Local": "Local",
    "local": "Local",
    "Remote": "Remote",
    "remote": "Remote",
    # Hosted-forge spellings seen in published pipelines resolve to Remote.
    "Github": "Remote",
    "github": "Remote",
}


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass
class ArgumentNode:
    """``argument "name" "value"``"""

    name: str
    value: str
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class ChainNode:
    """``chain "arg" ("Tool")? ("cmd")? "output"``

    ``command_name`` and ``tool_name`` are None when the chain relies on
    positional resolution; a tool name is only ever present together with a
    command name.
    """

    argument_name: str
    output_name: str
    tool_name: str | None = None
    command_name: str | None = None
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if self.tool_name is not None and self.command_name is None:
            raise ValueError("chain cannot name a tool without a command")


@dataclass
class CommandNode:
    name: str
    entries: list[ArgumentNode | ChainNode] = field(default_factory=list)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    @property
    def arguments(self) -> list[ArgumentNode]:
        return [e for e in self.entries if isinstance(e, ArgumentNode)]

    @property
    def chains(self) -> list[ChainNode]:
        return [e for e in self.entries if isinstance(e, ChainNode)]


@dataclass
class ToolNode:
    tool_name: str
    configuration_name: str
    commands: list[CommandNode] = field(default_factory=list)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class PipelineNode:
    repository_kind: str  # normalized: "Local" | "Remote"
    repository_location: str
    tools: list[ToolNode] = field(default_factory=list)


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # "word" | "string" | "lbrace" | "rbrace" | "eof"
    value: str
    line: int
    column: int


def _describe(token: _Token) -> str:
    if token.kind == "eof":
        return "end of input"
    if token.kind == "word":
        return f"word '{token.value}'"
    if token.kind == "string":
        return f'string "{token.value}"'
    return f"'{token.value}'"


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def err(message: str, at_line: int, at_col: int) -> PipelineSyntaxError:
        return PipelineSyntaxError(message, at_line, at_col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/":
            if i + 1 < n and text[i + 1] == "/":
                while i < n and text[i] != "\n":
                    i += 1
                continue
            raise err("unexpected character '/'", line, col)
        if ch == "{":
            tokens.append(_Token("lbrace", "{", line, col))
            i += 1
            col += 1
            continue
        if ch == "}":
            tokens.append(_Token("rbrace", "}", line, col))
            i += 1
            col += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            parts: list[str] = []
            while True:
                if i >= n:
                    raise err("unterminated string", start_line, start_col)
                c = text[i]
                if c == "\n":
                    raise err("unterminated string", start_line, start_col)
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise err("unterminated string", start_line, start_col)
                    esc = text[i + 1]
                    if esc == '"':
                        parts.append('"')
                    elif esc == "\\":
                        parts.append("\\")
                    else:
                        raise err(f"unknown escape '\\{esc}'", line, col)
                    i += 2
                    col += 2
                    continue
                parts.append(c)
                i += 1
                col += 1
            tokens.append(_Token("string", "".join(parts), start_line, start_col))
            continue
        if ch.isalpha() or ch == "_":
            start_col = col
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("word", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        raise err(f"unexpected character {ch!r}", line, col)

    tokens.append(_Token("eof", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        token = self._tokens[self._pos]
        if token.kind != "eof":
            self._pos += 1
        return token

    def _fail(self, message: str, token: _Token) -> PipelineSyntaxError:
        raise PipelineSyntaxError(message, token.line, token.column)

    def _expect_keyword(self, keyword: str) -> _Token:
        token = self._next()
        if token.kind != "word" or token.value != keyword:
            self._fail(f"expected keyword '{keyword}', got {_describe(token)}", token)
        return token

    def _expect_string(self, what: str, *, allow_empty: bool = False) -> _Token:
        token = self._next()
        if token.kind != "string":
            self._fail(f"expected {what} as a quoted string, got {_describe(token)}", token)
        if not token.value and not allow_empty:
            self._fail(f"{what} must not be empty", token)
        return token

    def _expect(self, kind: str, literal: str) -> _Token:
        token = self._next()
        if token.kind != kind:
            self._fail(f"expected '{literal}', got {_describe(token)}", token)
        return token

    # -- grammar rules ------------------------------------------------------

    def pipeline(self) -> PipelineNode:
        self._expect_keyword("Pipeline")
        kind_token = self._expect_string("repository type")
        kind = _REPOSITORY_KINDS.get(kind_token.value)
        if kind is None:
            self._fail(
                f"unknown repository type \"{kind_token.value}\""
                " (expected Local, Remote or Github)",
                kind_token,
            )
        location = self._expect_string("repository location")
        self._expect("lbrace", "{")
        tools: list[ToolNode] = []
        while self._peek().kind != "rbrace":
            tools.append(self.tool())
        close = self._next()  # the rbrace
        if not tools:
            self._fail("pipeline needs at least one tool block", close)
        trailing = self._peek()
        if trailing.kind != "eof":
            self._fail(f"unexpected trailing input: {_describe(trailing)}", trailing)
        return PipelineNode(
            repository_kind=kind,
            repository_location=location.value,
            tools=tools,
        )

    def tool(self) -> ToolNode:
        keyword = self._expect_keyword("tool")
        name = self._expect_string("tool name")
        config = self._expect_string("configuration name")
        self._expect("lbrace", "{")
        commands: list[CommandNode] = []
        while self._peek().kind != "rbrace":
            commands.append(self.command())
        close = self._next()
        if not commands:
            self._fail("tool block needs at least one command", close)
        return ToolNode(
            tool_name=name.value,
            configuration_name=config.value,
            commands=commands,
            line=keyword.line,
            column=keyword.column,
        )

    def command(self) -> CommandNode:
        keyword = self._expect_keyword("command")
        name = self._expect_string("command name")
        self._expect("lbrace", "{")
        entries: list[ArgumentNode | ChainNode] = []
        while True:
            token = self._peek()
            if token.kind == "rbrace":
                self._next()
                break
            if token.kind == "word" and token.value == "argument":
                entries.append(self.argument())
            elif token.kind == "word" and token.value == "chain":
                entries.append(self.chain())
            else:
                self._fail(
                    f"expected 'argument', 'chain' or '}}', got {_describe(token)}",
                    token,
                )
        if not entries:
            self._fail("command block needs at least one argument or chain", keyword)
        return CommandNode(
            name=name.value,
            entries=entries,
            line=keyword.line,
            column=keyword.column,
        )

    def argument(self) -> ArgumentNode:
        keyword = self._expect_keyword("argument")
        name = self._expect_string("argument name")
        value = self._expect_string("argument value", allow_empty=True)
        return ArgumentNode(
            name=name.value,
            value=value.value,
            line=keyword.line,
            column=keyword.column,
        )

    def chain(self) -> ChainNode:
        keyword = self._expect_keyword("chain")
        strings: list[_Token] = []
        while self._peek().kind == "string":
            strings.append(self._next())
        for token in strings:
            if not token.value:
                self._fail("chain names must not be empty", token)
        if len(strings) == 2:
            arg, out = strings
            return ChainNode(arg.value, out.value,
                             line=keyword.line, column=keyword.column)
        if len(strings) == 3:
            arg, cmd, out = strings
            return ChainNode(arg.value, out.value, command_name=cmd.value,
                             line=keyword.line, column=keyword.column)
        if len(strings) == 4:
            arg, tool, cmd, out = strings
            return ChainNode(arg.value, out.value, tool_name=tool.value,
                             command_name=cmd.value,
                             line=keyword.line, column=keyword.column)
        self._fail(
            f"chain takes 2 to 4 quoted names, got {len(strings)}", keyword
        )
        raise AssertionError("unreachable")


def parse(text: str) -> PipelineNode:
    """Parse pipeline text; raises :class:`PipelineSyntaxError` with a
    1-based line and column on the first offending token."""
    return _Parser(_tokenize(text)).pipeline()


def parse_file(path: str | Path) -> PipelineNode:
    return parse(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# Serializer
# --------------------------------------------------------------------------


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize(pipeline: PipelineNode) -> str:
    """Canonical text for an AST; ``parse(serialize(p)) == p`` ignoring
    source positions."""
    lines = [
        f"Pipeline {_quote(pipeline.repository_kind)}"
        f" {_quote(pipeline.repository_location)} {{"
    ]
    for tool in pipeline.tools:
        lines.append(
            f"    tool {_quote(tool.tool_name)}"
            f" {_quote(tool.configuration_name)} {{"
        )
        for command in tool.commands:
            lines.append(f"        command {_quote(command.name)} {{")
            for entry in command.entries:
                if isinstance(entry, ArgumentNode):
                    lines.append(
                        f"            argument {_quote(entry.name)}"
                        f" {_quote(entry.value)}"
                    )
                else:
                    parts = ["chain", _quote(entry.argument_name)]
                    if entry.tool_name is not None:
                        parts.append(_quote(entry.tool_name))
                    if entry.command_name is not None:
                        parts.append(_quote(entry.command_name))
                    parts.append(_quote(entry.output_name))
                    lines.append("            " + " ".join(parts))
            lines.append("        }")
        lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"
