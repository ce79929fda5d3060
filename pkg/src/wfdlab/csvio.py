"""Plain-text config files and CSV with '#' provenance lines."""
from __future__ import annotations

import csv
import io
import re

import numpy as np

from .errors import ConfigError

VERSION = "0.1.0"
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; '#' starts a comment.  Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"{source}: bad key {key!r}", lineno)
        if key in out:
            raise ConfigError(f"{source}: duplicate key {key!r}", lineno)
        out[key] = val
    return out


def read_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def parse_list(value: str, cast=float):
    """Comma-separated list; empty string gives an empty list."""
    items = [x.strip() for x in str(value).split(",")]
    return [cast(x) for x in items if x]


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render_csv(header, rows, provenance=()) -> str:
    buf = io.StringIO()
    buf.write(f"# wfdlab {VERSION}\n")
    for line in provenance:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows, provenance=()):
    text = render_csv(header, rows, provenance)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def _meta_from_line(line: str, meta: dict):
    for part in line.split(","):
        if "=" in part:
            k, v = part.split("=", 1)
            meta[k.strip()] = v.strip()


def read_csv(path):
    """Return (meta, header, rows).  ``meta`` collects key=value provenance pairs."""
    meta, lines = {}, []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    _meta_from_line(line[1:].strip(), meta)
                else:
                    lines.append(line)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError(f"{path}: no header row") from None
    return meta, header, [row for row in reader if row]
