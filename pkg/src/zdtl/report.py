"""Deterministic JSON serialization, schema validation and artifact writing."""
from __future__ import annotations

import dataclasses
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def plain(obj):
    """Recursively convert numpy values, tuples and dataclasses into JSON-ready Python values.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    return _finite(_plain(obj))


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k, ensure_ascii=False)}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        text = format(obj, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj, ensure_ascii=False)


def dumps(obj, indent: int = 2) -> str:
    """Sorted keys, floats with 17 significant digits, trailing newline."""
    return _encode(plain(obj), indent, 0) + "\n"


@lru_cache(maxsize=None)
def schema(kind: str) -> dict:
    text = resources.files("zdtl").joinpath("schemas", f"{kind}.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(document: dict, kind: str = "envelope") -> None:
    """Raise jsonschema.ValidationError unless the document matches the shipped schema."""
    doc = json.loads(dumps(document))
    jsonschema.validate(doc, schema("envelope"))
    jsonschema.validate(doc["report"], schema(kind if kind != "envelope" else doc["command"]))


def write_artifacts(out: Path, name: str, document: dict, figures: dict | None = None) -> list[Path]:
    """Write ``name.json`` plus ``name-<figure>.svg`` files into ``out``; returns the paths."""
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    target = out / f"{name}.json"
    target.write_text(dumps(document), encoding="utf-8")
    paths.append(target)
    for fig_name, data in sorted((figures or {}).items()):
        p = out / f"{name}-{fig_name}.svg"
        p.write_bytes(data)
        paths.append(p)
    return paths
