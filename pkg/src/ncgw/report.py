"""Structured paper-vs-oracle comparison records."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

VERDICTS = ("match", "mismatch", "paper-degenerate")


def encode(value: Any) -> Any:
    """JSON-friendly form: complex -> {"re", "im"}, non-finite -> string."""
    if isinstance(value, complex):
        return {"re": encode(value.real), "im": encode(value.imag)}
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    if hasattr(value, "item") and not isinstance(value, (list, tuple, dict)):
        return encode(value.item())
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    return value


def relative_difference(paper, oracle) -> float:
    if paper is None or oracle is None:
        return math.nan
    paper, oracle = complex(paper), complex(oracle)
    if not (math.isfinite(abs(paper)) and math.isfinite(abs(oracle))):
        return math.inf
    scale = max(abs(oracle), abs(paper))
    if scale == 0:
        return 0.0
    return abs(paper - oracle) / scale


@dataclass
class Entry:
    quantity: str
    paper_value: Any
    oracle_value: Any
    rel_diff: float
    verdict: str
    time: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return encode(
            {
                "quantity": self.quantity,
                "time": self.time,
                "paper_value": self.paper_value,
                "oracle_value": self.oracle_value,
                "rel_diff": self.rel_diff,
                "verdict": self.verdict,
                "note": self.note,
            }
        )


@dataclass
class OracleCheck:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return encode(self.__dict__)


@dataclass
class DiscrepancyReport:
    entries: list[Entry] = field(default_factory=list)
    checks: list[OracleCheck] = field(default_factory=list)

    def add(self, quantity, paper_value, oracle_value, verdict=None, rel_diff=None, time=None, note="", tol=1e-6):
        rd = relative_difference(paper_value, oracle_value) if rel_diff is None else rel_diff
        if verdict is None:
            verdict = "match" if rd <= tol else "mismatch"
        if verdict not in VERDICTS:
            raise ValueError(f"bad verdict {verdict!r}")
        e = Entry(quantity, paper_value, oracle_value, float(rd), verdict, time, note)
        self.entries.append(e)
        return e

    def check(self, name, value, threshold, passed=None, note=""):
        if passed is None:
            passed = bool(value <= threshold)
        c = OracleCheck(name, float(value), float(threshold), bool(passed), note)
        self.checks.append(c)
        return c

    def extend(self, other: "DiscrepancyReport") -> "DiscrepancyReport":
        self.entries.extend(other.entries)
        self.checks.extend(other.checks)
        return self

    @property
    def oracle_ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def mismatches(self) -> list[Entry]:
        return [e for e in self.entries if e.verdict != "match"]

    def find(self, quantity: str) -> list[Entry]:
        return [e for e in self.entries if e.quantity == quantity]

    def to_dict(self) -> dict:
        return {
            "oracle_ok": self.oracle_ok,
            "checks": [c.to_dict() for c in self.checks],
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = ["oracle checks:"]
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{flag}] {c.name}: {c.value:.3e} (threshold {c.threshold:.1e}) {c.note}".rstrip())
        lines.append("paper comparisons:")
        for e in self.entries:
            t = "" if e.time is None else f" t={e.time:.6g}"
            lines.append(f"  [{e.verdict}] {e.quantity}{t}: rel diff {e.rel_diff:.3e} {e.note}".rstrip())
        n_bad = len(self.mismatches())
        lines.append(f"{len(self.entries)} comparisons, {n_bad} not matching; oracle {'ok' if self.oracle_ok else 'FAILED'}")
        return "\n".join(lines)
