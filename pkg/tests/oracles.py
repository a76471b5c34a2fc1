"""Independent oracles used to cross-check planner and CLI output.

Deliberately written without importing the code under test (plain ints and
tuples in, plain results out), so a bug cannot hide in shared logic.
"""

from __future__ import annotations

import re


def all_topological_orders(nodes: list[int],
                           edges: list[tuple[int, int]]) -> list[list[int]]:
    """Every valid topological order, by exhaustive recursion.

    Only meant for small graphs (tests keep them at 8 nodes or fewer).
    """
    remaining_preds: dict[int, set[int]] = {n: set() for n in nodes}
    for src, dst in edges:
        remaining_preds[dst].add(src)

    orders: list[list[int]] = []
    chosen: list[int] = []
    placed: set[int] = set()

    def extend() -> None:
        if len(chosen) == len(nodes):
            orders.append(list(chosen))
            return
        for node in nodes:
            if node in placed:
                continue
            if remaining_preds[node] - placed:
                continue
            placed.add(node)
            chosen.append(node)
            extend()
            chosen.pop()
            placed.remove(node)

    extend()
    return orders


def greedy_priority_order(priorities: dict[int, int],
                          edges: list[tuple[int, int]]) -> list[int]:
    """The order the documented tie-break must produce: repeatedly pick,
    among nodes whose predecessors are all placed, the one with the highest
    priority, then the smallest index."""
    nodes = sorted(priorities)
    placed: set[int] = set()
    order: list[int] = []
    while len(order) < len(nodes):
        ready = [
            n for n in nodes
            if n not in placed
            and all(src in placed for src, dst in edges if dst == n)
        ]
        best = min(ready, key=lambda n: (-priorities[n], n))
        order.append(best)
        placed.add(best)
    return order


def is_topological(order: list[int], edges: list[tuple[int, int]]) -> bool:
    position = {node: i for i, node in enumerate(order)}
    return all(position[src] < position[dst] for src, dst in edges)


# --------------------------------------------------------------------------
# DOT grammar checker
# --------------------------------------------------------------------------

_DOT_TOKEN = re.compile(
    r'[ \t\n]*(->|[{}\[\];,=]|"(?:[^"\\\n]|\\["\\])*"|[A-Za-z_][A-Za-z0-9_]*)'
)


class DotSyntaxError(ValueError):
    pass


def _dot_tokens(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        match = _DOT_TOKEN.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise DotSyntaxError(f"bad token at offset {pos}: {text[pos:pos + 20]!r}")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens


def check_dot(text: str) -> tuple[list[str], list[tuple[str, str]]]:
    """Validate text against the directed-graph DOT grammar subset:

        graph := 'digraph' ID? '{' stmt* '}'
        stmt  := ID '=' value ';'?
               | ID '->' ID attrs? ';'?
               | ID attrs? ';'?
        attrs := '[' ID '=' value (',' ID '=' value)* ']'
        value := ID | quoted string

    Returns the declared node ids and the edge pairs.
    """
    tokens = _dot_tokens(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise DotSyntaxError("unexpected end of input")
        token = tokens[pos]
        pos += 1
        return token

    def expect(literal: str) -> None:
        token = take()
        if token != literal:
            raise DotSyntaxError(f"wanted {literal!r}, got {token!r}")

    def is_id(token: str | None) -> bool:
        return token is not None and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", token) is not None

    def is_value(token: str | None) -> bool:
        return is_id(token) or (token is not None and token.startswith('"'))

    def take_attrs() -> None:
        expect("[")
        while True:
            name = take()
            if not is_id(name):
                raise DotSyntaxError(f"attribute name expected, got {name!r}")
            expect("=")
            value = take()
            if not is_value(value):
                raise DotSyntaxError(f"attribute value expected, got {value!r}")
            if peek() == ",":
                expect(",")
                continue
            break
        expect("]")

    expect("digraph")
    if is_id(peek()):
        take()
    expect("{")

    nodes: list[str] = []
    edges: list[tuple[str, str]] = []
    while peek() is not None and peek() != "}":
        head = take()
        if not is_id(head):
            raise DotSyntaxError(f"statement must start with an id, got {head!r}")
        if peek() == "=":
            expect("=")
            value = take()
            if not is_value(value):
                raise DotSyntaxError(f"graph attribute value expected, got {value!r}")
        elif peek() == "->":
            expect("->")
            tail = take()
            if not is_id(tail):
                raise DotSyntaxError(f"edge target must be an id, got {tail!r}")
            if peek() == "[":
                take_attrs()
            edges.append((head, tail))
        else:
            if peek() == "[":
                take_attrs()
            nodes.append(head)
        if peek() == ";":
            expect(";")
    expect("}")
    if pos != len(tokens):
        raise DotSyntaxError(f"trailing tokens after graph: {tokens[pos:]!r}")
    return nodes, edges
