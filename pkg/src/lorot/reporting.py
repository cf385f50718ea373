"""Structured results of inequality checks.

Every checker in the package reports through `CheckReport`.  The
convention is uniform: each entry asserts "lhs <= rhs" and stores
margin = rhs - lhs, so a check passes iff the worst margin is at least
-tolerance.  Inequalities stated in the literature as "A >= B" are
recorded with lhs = B (the model/bound side) and rhs = A (the measured
side), keeping the margin sign meaningful everywhere.

JSON layout (schema 1):

    {"spec": {...},
     "entries": [{"t": ..., "Nprime": ..., "lhs": ..., "rhs": ..., "margin": ...}],
     "pass": bool,
     "discretization": {"h": ..., "eps": ...}}

Infinite margins occur (a blown-up distortion coefficient makes an RHS
equal to -infinity) and strict JSON has no infinity literal, so +/-inf
serialize as the strings "inf" and "-inf"; all finite values stay
numbers.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from typing import Optional

SCHEMA_VERSION = 1


def _encode_value(x):
    if x is None:
        return None
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (int, str, bool)):
        return x
    if isinstance(x, dict):
        return {k: _encode_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_encode_value(v) for v in x]
    return float(x)


def decode_value(x):
    """Inverse of the report encoding for the two infinity strings."""
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if isinstance(x, dict):
        return {k: decode_value(v) for k, v in x.items()}
    if isinstance(x, list):
        return [decode_value(v) for v in x]
    return x


@dataclasses.dataclass(frozen=True)
class Entry:
    """One asserted inequality lhs <= rhs at parameters (t, Nprime).

    `label` is an in-memory tag for locating entries programmatically;
    it is not part of the serialized schema.
    """

    t: Optional[float]
    Nprime: Optional[float]
    lhs: float
    rhs: float
    label: Optional[str] = None

    @property
    def margin(self) -> float:
        if math.isinf(self.rhs) and math.isinf(self.lhs) and self.rhs == self.lhs:
            # inf - inf on the asserted side counts as a clean pass
            return 0.0
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "t": _encode_value(self.t),
            "Nprime": _encode_value(self.Nprime),
            "lhs": _encode_value(float(self.lhs)),
            "rhs": _encode_value(float(self.rhs)),
            "margin": _encode_value(float(self.margin)),
        }


@dataclasses.dataclass(frozen=True)
class CheckReport:
    """Outcome of one inequality verification.

    spec            free-form parameter record of the check
    entries         per-(t, N') asserted inequalities
    tolerance       pass iff worst margin >= -tolerance (also in JSON
                    as discretization["eps"])
    discretization  grid data: at least {"h": cell diameter, "eps": tolerance}
    """

    spec: dict
    entries: tuple
    tolerance: float
    discretization: dict

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        disc = dict(self.discretization)
        disc.setdefault("eps", self.tolerance)
        object.__setattr__(self, "discretization", disc)

    @property
    def worst_margin(self) -> float:
        if not self.entries:
            return math.inf
        return float(min(e.margin for e in self.entries))

    @property
    def passed(self) -> bool:
        return bool(self.worst_margin >= -self.tolerance)

    def entry(self, label: str) -> Entry:
        """First entry carrying the given in-memory label."""
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(f"no entry labeled {label!r}")

    def labeled(self, label: str) -> list:
        return [e for e in self.entries if e.label == label]

    def to_dict(self) -> dict:
        return {
            "spec": _encode_value(self.spec),
            "entries": [e.to_dict() for e in self.entries],
            "pass": self.passed,
            "discretization": _encode_value(self.discretization),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    def write_json(self, path) -> None:
        _atomic_write(path, self.to_json() + "\n")

    def write_csv(self, path) -> None:
        lines = ["t,Nprime,lhs,rhs,margin"]
        for e in self.entries:
            cells = [e.t, e.Nprime, float(e.lhs), float(e.rhs), float(e.margin)]
            lines.append(",".join("" if c is None else repr(float(c)) for c in cells))
        _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
