"""Line-oriented key-value documents used for every result, metric and report file.

A document is a sequence of named blocks::

    # free comment
    [cluster 0]
    nodes = 3 4 7
    score = 12.5
    converged = true

Block names may repeat (one ``[cluster]`` block per detected cluster).  Values
are scalars or whitespace-separated arrays.  Floats are written with ``repr``
so that reading a document back reproduces the numbers bit for bit.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class DocumentError(ValueError):
    pass


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    if isinstance(value, str):
        if "\n" in value:
            raise DocumentError("string values must be single-line")
        return value
    if isinstance(value, np.ndarray) or isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in np.asarray(value).ravel().tolist())
    raise DocumentError(f"cannot serialize value of type {type(value).__name__}")


def _format_float(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def dumps(blocks: Iterable[tuple[str, Mapping]], header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for name, fields in blocks:
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for key, value in fields.items():
            if not _KEY.match(key):
                raise DocumentError(f"invalid key {key!r}")
            text = format_value(value)
            lines.append(f"{key} = {text}" if text else f"{key} =")
    return "\n".join(lines) + "\n"


def loads(text: str) -> list[tuple[str, dict[str, str]]]:
    blocks: list[tuple[str, dict[str, str]]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            blocks.append((line[1:-1].strip(), current))
            continue
        if current is None:
            raise DocumentError(f"line {lineno}: field outside of a block")
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not _KEY.match(key):
            raise DocumentError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in current:
            raise DocumentError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value.strip()
    return blocks


def dump(path, blocks, header=None) -> None:
    Path(path).write_text(dumps(blocks, header=header))


def load(path) -> list[tuple[str, dict[str, str]]]:
    return loads(Path(path).read_text())


def find_blocks(blocks, prefix: str) -> list[dict[str, str]]:
    """Blocks whose name is ``prefix`` or starts with ``prefix`` plus a space."""
    return [f for name, f in blocks if name == prefix or name.startswith(prefix + " ")]


def first_block(blocks, prefix: str) -> dict[str, str]:
    found = find_blocks(blocks, prefix)
    if not found:
        raise DocumentError(f"no [{prefix}] block")
    return found[0]


def as_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise DocumentError(f"not a boolean: {text!r}")


def as_int(text: str) -> int:
    return int(text)


def as_float(text: str) -> float:
    return float(text)


def as_ints(text: str) -> np.ndarray:
    return np.array([int(t) for t in text.split()], dtype=np.int64)


def as_floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=float)


def parse_scalar(text: str):
    """Best-effort typed reading of a scalar (int, float, bool, none, or str)."""
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
