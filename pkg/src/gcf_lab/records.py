"""Result records: deterministic JSON/CSV text, config hashing, metadata sidecars.

Every float is written with 17 significant digits, so a record written twice
from the same inputs is byte-identical. Wall-clock data goes to a separate
``<name>.meta.json`` next to the record.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "SCHEMA_VERSION",
    "CODE_VERSION",
    "dumps",
    "config_hash",
    "RunConfig",
    "make_record",
    "write_record",
    "read_record",
    "write_csv",
    "format_number",
]

SCHEMA_VERSION = 1
CODE_VERSION = "0.1.0"


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0.0"
    text = format(x, ".17g")
    # keep floats distinguishable from integers in the JSON text
    return text if any(c in text for c in ".en") else text + ".0"


def _emit(obj, out, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, float, np.integer, np.floating)):
        out.append(format_number(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, Path):
        out.append(json.dumps(str(obj)))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        # numeric rows stay on one line
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        if flat or indent is None:
            out.append("[" + ", ".join(_inline(v) for v in seq) + "]")
            return
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(sep)
            out.append(pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    elif hasattr(obj, "to_json"):
        _emit(obj.to_json(), out, indent, level)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _inline(v):
    out = []
    _emit(v, out, None, 0)
    return "".join(out)


def dumps(obj, indent: int | None = 1) -> str:
    """JSON text with 17-significant-digit floats and non-finite values as null."""
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out)


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_hash(config: dict) -> str:
    text = dumps(_canonical(config), indent=None)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunConfig:
    """A subcommand name plus its fully resolved parameters."""

    command: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"command": self.command, "params": _canonical(self.params)}

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        return cls(obj["command"], dict(obj["params"]))

    def hash(self) -> str:
        return config_hash(self.to_json())


def make_record(config: RunConfig, result: dict, artifacts: dict | None = None) -> dict:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "code_version": CODE_VERSION,
        "command": config.command,
        "config": config.to_json()["params"],
        "config_hash": config.hash(),
    }
    rec.update(result)
    if artifacts:
        rec["artifacts"] = {k: str(v) for k, v in artifacts.items()}
    return rec


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def write_record(path, record: dict, wall_clock: float | None = None) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(record) + "\n")
    meta = {
        "config_hash": record.get("config_hash"),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_clock_s": wall_clock,
        "python": platform.python_version(),
        "pid": os.getpid(),
    }
    _meta_path(path).write_text(dumps(meta) + "\n")
    return path


def read_record(path) -> dict:
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict) or "schema_version" not in obj or "config_hash" not in obj:
        raise ValidationError(f"{path} is not a result record")
    return obj


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
