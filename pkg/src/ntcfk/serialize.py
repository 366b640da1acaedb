"""Canonical text encoding shared by every serializer.

One field per line as `name=value`. Vectors are space-separated decimals.
A matrix field is `name=rows cols` followed by one row per line. Floats
use repr() so they round-trip bit-exactly. Files open with a versioned
header line.
"""
from __future__ import annotations

import numpy as np

from .zq import BitString, Modulus, ZqMatrix, ZqVector

HEADER_KEY = "ntcf-key v1"
HEADER_SK = "ntcf-sk v1"
HEADER_TRANSCRIPT = "transcript v1"


class FormatError(ValueError):
    """Malformed canonical text."""


class LineWriter:
    def __init__(self, header: str | None = None):
        self.lines: list[str] = []
        if header is not None:
            self.lines.append(header)

    def field(self, name: str, value) -> None:
        self.lines.append(f"{name}={value}")

    def float_field(self, name: str, value: float) -> None:
        self.lines.append(f"{name}={float(value)!r}")

    def vector(self, name: str, vec) -> None:
        entries = vec.entries if isinstance(vec, ZqVector) else vec
        self.lines.append(f"{name}=" + " ".join(str(int(v)) for v in entries))

    def matrix(self, name: str, mat) -> None:
        entries = mat.entries if isinstance(mat, ZqMatrix) else np.asarray(mat)
        rows, cols = entries.shape
        self.lines.append(f"{name}={rows} {cols}")
        for r in entries:
            self.lines.append(" ".join(str(int(v)) for v in r))

    def bits(self, name: str, b: BitString) -> None:
        self.lines.append(f"{name}=" + "".join(str(v) for v in b.bits))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


class LineReader:
    """Sequential reader; fields must appear in the order they are read."""

    def __init__(self, text: str, header: str | None = None):
        self._lines = text.splitlines()
        self._pos = 0
        if header is not None:
            got = self._next_line()
            if got != header:
                raise FormatError(f"expected header {header!r}, got {got!r}")

    def _next_line(self) -> str:
        if self._pos >= len(self._lines):
            raise FormatError("unexpected end of input")
        line = self._lines[self._pos]
        self._pos += 1
        return line

    def _value(self, name: str) -> str:
        line = self._next_line()
        prefix = name + "="
        if not line.startswith(prefix):
            raise FormatError(f"expected field {name!r}, got line {line!r}")
        return line[len(prefix) :]

    def field(self, name: str) -> str:
        return self._value(name)

    def int_field(self, name: str) -> int:
        v = self._value(name)
        try:
            return int(v)
        except ValueError as exc:
            raise FormatError(f"field {name}: bad integer {v!r}") from exc

    def float_field(self, name: str) -> float:
        v = self._value(name)
        try:
            return float(v)
        except ValueError as exc:
            raise FormatError(f"field {name}: bad float {v!r}") from exc

    def vector(self, name: str, modulus: Modulus) -> ZqVector:
        return ZqVector(self.int_array(name), modulus)

    def int_array(self, name: str) -> np.ndarray:
        v = self._value(name)
        parts = v.split() if v else []
        try:
            return np.array([int(p) for p in parts], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"field {name}: bad vector {v!r}") from exc

    def matrix(self, name: str) -> np.ndarray:
        head = self._value(name).split()
        if len(head) != 2:
            raise FormatError(f"field {name}: bad matrix header")
        rows, cols = int(head[0]), int(head[1])
        out = np.zeros((rows, cols), dtype=np.int64)
        for i in range(rows):
            parts = self._next_line().split()
            if len(parts) != cols:
                raise FormatError(f"matrix {name}: row {i} has {len(parts)} entries")
            out[i] = [int(p) for p in parts]
        return out

    def bits(self, name: str) -> BitString:
        v = self._value(name)
        if any(c not in "01" for c in v):
            raise FormatError(f"field {name}: bad bit string {v!r}")
        return BitString(tuple(int(c) for c in v))

    def done(self) -> None:
        if self._pos != len(self._lines):
            raise FormatError(f"trailing content at line {self._pos + 1}")
