"""Argument composers: turn bound (name, value) pairs into argv tokens.

A command descriptor names one composer; the planner feeds it the command
instance's bindings in declaration order (the order arguments appear in the
descriptor, not the order they were written in the pipeline).
"""

from __future__ import annotations

from typing import Callable

from .errors import UnknownComposer

Composer = Callable[[list[tuple[str, str]]], list[str]]

_FALSY_FLAG_VALUES = frozenset({"", "0", "false"})


def values_only(bindings: list[tuple[str, str]]) -> list[str]:
    """Positional style: values alone, names dropped."""
    return [value for _name, value in bindings]


def name_value_space(bindings: list[tuple[str, str]]) -> list[str]:
    """``name value`` pairs as separate tokens (getopt style)."""
    tokens: list[str] = []
    for name, value in bindings:
        tokens.append(name)
        tokens.append(value)
    return tokens


def name_value_equals(bindings: list[tuple[str, str]]) -> list[str]:
    """``name=value`` single tokens (GNU long-option style)."""
    return [f"{name}={value}" for name, value in bindings]


def flags_only(bindings: list[tuple[str, str]]) -> list[str]:
    """Bare switches: the name appears iff the value is not false-like.

    False-like values are "", "0" and "false" (case-insensitive).
    """
    return [name for name, value in bindings
            if value.lower() not in _FALSY_FLAG_VALUES]


_REGISTRY: dict[str, Composer] = {
    "valuesOnly": values_only,
    "nameValueSpace": name_value_space,
    "nameValueEquals": name_value_equals,
    "flagsOnly": flags_only,
}


def composer_exists(name: str) -> bool:
    return name in _REGISTRY


def composer_names() -> list[str]:
    return sorted(_REGISTRY)


def get_composer(name: str) -> Composer:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownComposer(
            f"no composer named '{name}' (available: {', '.join(composer_names())})"
        ) from None
