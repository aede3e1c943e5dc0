"""Flat key-value text files used for run configs, transform metadata, and
serialized distribution models.

Format: one `key value` pair per line, single space separator, `#` starts a
comment line. Floats are written with `repr` so they round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path


def dumps(pairs: dict) -> str:
    lines = []
    for key, value in pairs.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} {value}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        pairs[key] = value.strip()
    return pairs


def write(path: str | Path, pairs: dict) -> None:
    Path(path).write_text(dumps(pairs))


def read(path: str | Path) -> dict[str, str]:
    return loads(Path(path).read_text())
