"""CSV and sidecar writers.

Every CSV starts with ``#`` lines holding the full run configuration in the
same ``key = value`` form the config file accepts.  Files are written to a
temporary name in the target directory and renamed into place, so a crash
never leaves a partial file behind.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    """Shortest round-trip text for numbers; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    try:
        return repr(float(x)) if not isinstance(x, str) else x
    except (TypeError, ValueError):
        return str(x)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def header_lines(command: str, config: dict) -> list[str]:
    lines = [f"# adicke {command}"]
    lines += [f"# {key} = {fmt(value) if not isinstance(value, str) else value}" for key, value in config.items()]
    return lines


def write_csv(path, command: str, config: dict, columns: list[str], rows) -> Path:
    lines = header_lines(command, config)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_meta(path, meta: dict) -> Path:
    return atomic_write_text(path, json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    try:
        return x.item()
    except AttributeError:
        return str(x)


def read_csv(path):
    """(header config dict, column names, rows of strings) from a written CSV."""
    config, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                config[key.strip()] = value.strip()
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return config, columns, rows
