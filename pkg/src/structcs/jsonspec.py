"""JSON loading with line tracking, for validating spec files.

``json.loads`` throws away positions, so semantic errors (overlapping groups,
a negative ``m``) could only be reported by path. :func:`load_with_lines`
parses the same grammar but also records the line on which every object and
array member starts, keyed by its path.
"""
from __future__ import annotations

import json
from json.decoder import scanstring
from pathlib import Path
from typing import Any

_WS = " \t\n\r"
_decoder = json.JSONDecoder()


class SpecError(ValueError):
    """Invalid spec file. ``line`` is 1-based, or None when unknown."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where = f"{where}{line}:" if where else f"line {line}:"
        super().__init__(f"{where} {message}" if where else message)


def _skip(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _line(text: str, i: int) -> int:
    return text.count("\n", 0, i) + 1


def _parse(text: str, i: int, path: tuple, lines: dict) -> tuple[Any, int]:
    i = _skip(text, i)
    lines[path] = _line(text, i)
    if i >= len(text):
        raise SpecError("unexpected end of input", _line(text, i))
    ch = text[i]
    if ch == "{":
        obj: dict[str, Any] = {}
        i = _skip(text, i + 1)
        if text[i:i + 1] == "}":
            return obj, i + 1
        while True:
            i = _skip(text, i)
            if text[i:i + 1] != '"':
                raise SpecError("expected string key", _line(text, i))
            key, i = scanstring(text, i + 1)
            i = _skip(text, i)
            if text[i:i + 1] != ":":
                raise SpecError("expected ':'", _line(text, i))
            if key in obj:
                raise SpecError(f"duplicate key {key!r}", _line(text, i))
            obj[key], i = _parse(text, i + 1, path + (key,), lines)
            i = _skip(text, i)
            if text[i:i + 1] == ",":
                i += 1
                continue
            if text[i:i + 1] == "}":
                return obj, i + 1
            raise SpecError("expected ',' or '}'", _line(text, i))
    if ch == "[":
        arr: list[Any] = []
        i = _skip(text, i + 1)
        if text[i:i + 1] == "]":
            return arr, i + 1
        while True:
            value, i = _parse(text, i, path + (len(arr),), lines)
            arr.append(value)
            i = _skip(text, i)
            if text[i:i + 1] == ",":
                i += 1
                continue
            if text[i:i + 1] == "]":
                return arr, i + 1
            raise SpecError("expected ',' or ']'", _line(text, i))
    try:
        return _decoder.raw_decode(text, i)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, exc.lineno) from None


def load_with_lines(text: str) -> tuple[Any, dict[tuple, int]]:
    """Parse JSON ``text``; return ``(value, lines)`` with ``lines[path]`` 1-based."""
    lines: dict[tuple, int] = {}
    value, end = _parse(text, 0, (), lines)
    end = _skip(text, end)
    if end != len(text):
        raise SpecError("trailing data after JSON value", _line(text, end))
    return value, lines


class SpecDoc:
    """A parsed spec file that can point at the line of any member."""

    def __init__(self, value: Any, lines: dict[tuple, int], source: str | None = None):
        self.value = value
        self.lines = lines
        self.source = source

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "SpecDoc":
        try:
            value, lines = load_with_lines(text)
        except SpecError as exc:
            raise SpecError(str(exc), exc.line, source) from None
        return cls(value, lines, source)

    @classmethod
    def from_path(cls, path: str | Path) -> "SpecDoc":
        path = Path(path)
        return cls.from_text(path.read_text(), source=str(path))

    @classmethod
    def from_value(cls, value: Any) -> "SpecDoc":
        return cls(value, {})

    def line(self, path: tuple) -> int | None:
        # fall back to the closest enclosing member that has a recorded line
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path)

    def error(self, path: tuple, message: str) -> SpecError:
        dotted = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")
        if dotted:
            message = f"{dotted}: {message}"
        return SpecError(message, self.line(path), self.source)
