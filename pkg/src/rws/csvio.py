"""Plain-text artifacts: a '#'-prefixed key=value manifest followed by numeric CSV rows."""
from __future__ import annotations

import math
import os
from typing import IO, Iterable, Mapping, Sequence


def format_number(x) -> str:
    """17 significant digits: round-trips every float; integral values print without '.0'."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _check_key(key: str) -> str:
    if not key or any(c in key for c in "=\n\r") or key != key.strip():
        raise ValueError(f"invalid manifest key {key!r}")
    return key


def _check_value(value: str) -> str:
    if "\n" in value or "\r" in value:
        raise ValueError(f"manifest values must be single-line: {value!r}")
    return value


def write_manifest(stream: IO[str], manifest: Mapping[str, str]) -> None:
    for key, value in manifest.items():
        stream.write(f"# {_check_key(key)}={_check_value(str(value))}\n")


def emit_csv(path: str | os.PathLike, rows: Iterable[Sequence], manifest: Mapping[str, str]) -> int:
    """Write the manifest header then one line per row; rows are consumed lazily.

    Returns the number of rows written.  Raises ValueError for an empty row
    iterable and OSError when the path cannot be written.
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_manifest(fh, manifest)
        for row in rows:
            fh.write(",".join(format_number(v) for v in row))
            fh.write("\n")
            count += 1
    if count == 0:
        os.remove(path)
        raise ValueError("emit_csv needs at least one row")
    return count


def parse_manifest(source: str | os.PathLike | Iterable[str]) -> dict[str, str]:
    """Read back the '#' key=value header of an artifact (or of an iterable of lines)."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return parse_manifest(list(fh))
    out: dict[str, str] = {}
    for line in source:
        if not line.startswith("#"):
            break
        body = line[1:].rstrip("\n")
        if body.startswith(" "):
            body = body[1:]
        key, sep, value = body.partition("=")
        if not sep:
            raise ValueError(f"malformed manifest line {line!r}")
        out[key] = value
    return out


def read_rows(path: str | os.PathLike) -> list[list[float]]:
    with open(path, encoding="utf-8") as fh:
        return [[float(v) for v in line.split(",")] for line in fh if not line.startswith("#")]
