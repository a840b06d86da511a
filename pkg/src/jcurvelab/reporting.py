"""Experiment reports: one record per measured estimate, serialized deterministically.

Reports are the exchange format between the check layer, the CLI, and the
regression suite, so the text encoding is fixed: sorted keys, 17 significant
digits (round-trip exact for doubles), LF newlines, no timestamps.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import MissingReport


def fmt17(x: float) -> str:
    return "%.17g" % float(x)


def fmt6(x: float) -> str:
    return "%.6g" % float(x)


def digest_of(payload: object) -> str:
    """Stable short digest of a canonical text rendering of the payload."""

    def render(v) -> str:
        if isinstance(v, float):
            return fmt17(v)
        if isinstance(v, Mapping):
            inner = ",".join(f"{k}:{render(v[k])}" for k in sorted(v))
            return "{" + inner + "}"
        if isinstance(v, (list, tuple)):
            return "[" + ",".join(render(u) for u in v) + "]"
        return repr(v)

    return hashlib.sha256(render(payload).encode()).hexdigest()[:16]


@dataclass
class ExperimentReport:
    """Outcome of one quantitative check.

    ``measured`` and ``bound`` are parallel keyed maps; ``margin`` is the
    worst relative slack across keys (positive means the bound holds with
    room), and ``passed`` is the conjunction of all per-key comparisons.
    """

    name: str
    anchor: str
    inputs_digest: str
    measured: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    margin: float = 0.0
    passed: bool = False
    grid: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"name = {self.name}",
            f"anchor = {self.anchor}",
            f"inputs_digest = {self.inputs_digest}",
            f"passed = {'true' if self.passed else 'false'}",
            f"margin = {fmt17(self.margin)}",
        ]
        for key in sorted(self.measured):
            lines.append(f"measured.{key} = {fmt17(self.measured[key])}")
        for key in sorted(self.bound):
            lines.append(f"bound.{key} = {fmt17(self.bound[key])}")
        for key in sorted(self.grid):
            v = self.grid[key]
            lines.append(f"grid.{key} = {fmt17(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    def summary_line(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return f"{verdict}  {self.name}  margin={fmt6(self.margin)}"

    def write(self, directory: Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.name}.report"
        path.write_text(self.to_text(), encoding="utf-8")
        return path


def bound_report(
    name: str,
    anchor: str,
    inputs: object,
    measured: dict,
    bound: dict,
    grid: dict | None = None,
) -> ExperimentReport:
    """Assemble a report where every measured value must stay below its bound."""
    margins = []
    ok = True
    for key, b in bound.items():
        v = measured[key]
        scale = max(abs(b), 1e-300)
        margins.append((b - v) / scale)
        ok = ok and (v <= b)
    return ExperimentReport(
        name=name,
        anchor=anchor,
        inputs_digest=digest_of(inputs),
        measured=dict(measured),
        bound=dict(bound),
        margin=min(margins) if margins else 0.0,
        passed=ok,
        grid=dict(grid or {}),
    )


def read_report(path: Path) -> ExperimentReport:
    path = Path(path)
    if not path.exists():
        raise MissingReport(f"no report at {path}")
    rep = ExperimentReport(name="", anchor="", inputs_digest="")
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition(" = ")
        raw = raw.strip()
        if key == "name":
            rep.name = raw
        elif key == "anchor":
            rep.anchor = raw
        elif key == "inputs_digest":
            rep.inputs_digest = raw
        elif key == "passed":
            rep.passed = raw == "true"
        elif key == "margin":
            rep.margin = float(raw)
        elif key.startswith("measured."):
            rep.measured[key[len("measured."):]] = float(raw)
        elif key.startswith("bound."):
            rep.bound[key[len("bound."):]] = float(raw)
        elif key.startswith("grid."):
            try:
                rep.grid[key[len("grid."):]] = float(raw)
            except ValueError:
                rep.grid[key[len("grid."):]] = raw
    return rep
