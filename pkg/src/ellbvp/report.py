"""Run reports and their deterministic serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Verdict", "RunReport", "to_jsonable", "emit_report", "PASS", "FAIL", "UNRELIABLE"]

PASS, FAIL, UNRELIABLE = "PASS", "FAIL", "UNRELIABLE"


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: dict

    def __post_init__(self):
        if self.status not in (PASS, FAIL, UNRELIABLE):
            raise ValueError(f"unknown verdict status {self.status!r}")
        if not self.witness:
            raise ValueError("every verdict needs at least one numeric witness")

    @classmethod
    def of(cls, ok, reliable=True, **witness):
        return cls(PASS if ok and reliable else (FAIL if not ok and reliable else UNRELIABLE), witness)


@dataclass
class RunReport:
    kind: str
    verdicts: dict
    evidence: dict
    provenance: dict
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def status(self):
        states = {v.status for v in self.verdicts.values()}
        if FAIL in states:
            return FAIL
        if UNRELIABLE in states:
            return UNRELIABLE
        return PASS

    @property
    def exit_code(self):
        return 0 if self.status == PASS else 1

    def as_dict(self):
        # wall time is left out so identical configs give identical bytes
        return {
            "kind": self.kind,
            "status": self.status,
            "verdicts": {k: {"status": v.status, "witness": v.witness} for k, v in self.verdicts.items()},
            "evidence": self.evidence,
            "provenance": self.provenance,
        }


def to_jsonable(obj):
    """Plain JSON types; complex numbers become ``[re, im]`` and mapping keys strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = "%.17g" % x
    if "." not in text and "e" not in text and "n" not in text:
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_string(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    return _string(obj)


def _string(s):
    return json.dumps(str(s))


def _text(report):
    lines = [f"experiment: {report.kind}", f"status: {report.status}"]
    for name in sorted(report.verdicts):
        v = report.verdicts[name]
        wit = ", ".join(f"{k}={_short(v.witness[k])}" for k in sorted(v.witness))
        lines.append(f"  {v.status:<10} {name}: {wit}")
    for note in report.notes:
        lines.append(f"  note: {note}")
    lines.append(f"config sha256: {report.provenance.get('config_sha256', '')}")
    lines.append(f"wall time: {report.wall_time:.3f} s")
    return "\n".join(lines) + "\n"


def _short(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, list) and len(x) > 6:
        return f"[{len(x)} values]"
    return str(x)


def emit_report(report, fmt="json"):
    """Serialize a :class:`RunReport` to bytes.

    JSON output has sorted keys and floats with 17 significant digits;
    non-finite floats are written as the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    if fmt == "json":
        return (_encode(to_jsonable(report.as_dict()), 2, 0) + "\n").encode()
    if fmt == "text":
        return _text(report).encode()
    raise ValueError(f"unknown report format {fmt!r}")
