"""Uniform record for a single verified inequality."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CheckResult:
    name: str
    anchor: str  # the statement being tested, in words
    measured: dict = field(default_factory=dict)  # dimensionless values
    threshold: dict = field(default_factory=dict)
    passed: bool = False
    skipped: bool = False
    notes: str = ""

    @classmethod
    def skip(cls, name, anchor, notes, **measured):
        return cls(name, anchor, dict(measured), {}, True, True, notes)

    @property
    def verdict(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"

    def to_dict(self):
        return {
            "name": self.name,
            "anchor": self.anchor,
            "measured": {k: _plain(v) for k, v in self.measured.items()},
            "threshold": {k: _plain(v) for k, v in self.threshold.items()},
            "verdict": self.verdict,
            "notes": self.notes,
        }


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if hasattr(v, "item"):
        return v.item()
    return v
