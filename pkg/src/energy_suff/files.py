"""JSON scenario files, JSONL traces and atomic writes.

Scenarios are encoded field-for-field from the dataclasses; decoding is
driven by the type hints, so a field added to a dataclass is picked up here
without further changes.  Unknown keys are rejected at every level.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
import types
import typing
from pathlib import Path
from typing import Any

from .errors import ConfigInvalid, EmptyTrace
from .geometry import Vec2
from .sim import COLUMNS, Metrics, Scenario, Trace

SCHEMA_VERSION = 1


class ScenarioFileError(ConfigInvalid):
    """A scenario document is malformed, has unknown fields or the wrong schema version."""


def encode(obj: Any) -> Any:
    if isinstance(obj, Vec2):
        return [obj.x, obj.y]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: encode(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, (tuple, list)):
        return [encode(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def decode(tp: Any, data: Any, where: str = "scenario") -> Any:
    """Build a value of type ``tp`` from JSON data."""
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if data is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        if len(inner) != 1:
            raise ScenarioFileError(f"{where}: unsupported union {tp}")
        return decode(inner[0], data, where)
    if tp is Vec2:
        if not (isinstance(data, list) and len(data) == 2):
            raise ScenarioFileError(f"{where}: expected a point [x, y]")
        return Vec2(_number(data[0], where), _number(data[1], where))
    if dataclasses.is_dataclass(tp):
        if not isinstance(data, dict):
            raise ScenarioFileError(f"{where}: expected an object")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp) if f.init}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ScenarioFileError(f"{where}: unknown field(s) {', '.join(unknown)}")
        kwargs = {k: decode(hints[k], v, f"{where}.{k}") for k, v in data.items()}
        try:
            return tp(**kwargs)
        except TypeError as exc:
            raise ScenarioFileError(f"{where}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioFileError(f"{where}: {exc}") from exc
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(data, list):
            raise ScenarioFileError(f"{where}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(decode(args[0], v, f"{where}[{i}]") for i, v in enumerate(data))
        if len(args) != len(data):
            raise ScenarioFileError(f"{where}: expected {len(args)} entries")
        return tuple(decode(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, data)))
    if tp is float:
        return _number(data, where)
    if tp is bool:
        if not isinstance(data, bool):
            raise ScenarioFileError(f"{where}: expected true or false")
        return data
    if tp is int:
        if isinstance(data, bool) or not isinstance(data, int):
            raise ScenarioFileError(f"{where}: expected an integer")
        return data
    if tp is str:
        if not isinstance(data, str):
            raise ScenarioFileError(f"{where}: expected a string")
        return data
    raise ScenarioFileError(f"{where}: unsupported type {tp}")


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFileError(f"{where}: expected a number")
    return float(v)


def scenario_to_dict(scenario: Scenario) -> dict:
    return {"schema_version": SCHEMA_VERSION, **encode(scenario)}


def scenario_from_dict(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioFileError("scenario file must hold a JSON object")
    doc = dict(doc)
    version = doc.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ScenarioFileError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return decode(Scenario, doc)


def dump_scenario(scenario: Scenario, path: str | os.PathLike) -> None:
    write_atomic(path, json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def load_scenario(path: str | os.PathLike) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _json_num(v: float) -> float | None:
    return v if math.isfinite(v) else None


def trace_lines(trace: Trace) -> list[str]:
    """Header line (run context and every path used) followed by one line per step."""
    header = {
        "header": {
            "budget": trace.budget,
            "station": list(trace.station),
            "radius": trace.radius,
            "dt": trace.dt,
            "waypoints": [[list(w) for w in pts] for pts in trace.waypoints],
        }
    }
    lines = [json.dumps(header)]
    cols = [trace.cols[c] for c in COLUMNS]
    for k, events in enumerate(trace.events):
        row = {c: _json_num(col[k]) for c, col in zip(COLUMNS, cols)}
        row["events"] = list(events)
        lines.append(json.dumps(row))
    return lines


def write_trace(trace: Trace, path: str | os.PathLike) -> None:
    write_atomic(path, "\n".join(trace_lines(trace)) + "\n")


def write_trace_csv(trace: Trace, path: str | os.PathLike) -> None:
    rows = [",".join(COLUMNS + ("events",))]
    cols = [trace.cols[c] for c in COLUMNS]
    for k, events in enumerate(trace.events):
        rows.append(",".join([repr(float(col[k])) for col in cols] + [";".join(events)]))
    write_atomic(path, "\n".join(rows) + "\n")


def read_trace(path: str | os.PathLike) -> Trace:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise EmptyTrace(f"{path}: trace file is empty")
    try:
        first = json.loads(lines[0])
        head = first["header"]
        trace = Trace(float(head["budget"]), Vec2(*head["station"]), float(head["radius"]), float(head["dt"]))
        trace.waypoints = [[tuple(w) for w in pts] for pts in head.get("waypoints", [])]
        for ln in lines[1:]:
            row = json.loads(ln)
            trace.add(*(math.nan if row[c] is None else float(row[c]) for c in COLUMNS), events=row.get("events", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFileError(f"{path}: malformed trace ({exc})") from exc
    if len(trace) == 0:
        raise EmptyTrace(f"{path}: trace has no records")
    return trace


def metrics_json(m: Metrics, **extra) -> str:
    doc = {k: (_json_num(v) if isinstance(v, float) else v) for k, v in m.as_dict().items()}
    doc.update(extra)
    return json.dumps(doc, indent=2) + "\n"
