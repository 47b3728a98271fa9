"""
Check reports: one entry per verified identity, with its residual and tolerance.
"""

import math
from dataclasses import asdict, dataclass, field

import pandas as pd

from utils.config import REPORT_SCHEMA
from utils.logger import logger


@dataclass(frozen=True)
class ReportEntry:
    check: str
    residual: float
    tolerance: float
    passed: bool
    anchor: str = ""


@dataclass
class Report:
    entries: list = field(default_factory=list)

    def add(self, check, residual, tolerance, anchor=""):
        residual = float(residual)
        ok = not math.isnan(residual) and residual <= tolerance
        entry = ReportEntry(check, residual, float(tolerance), ok, anchor)
        self.entries.append(entry)
        if ok:
            logger.debug("%s: residual %.3e (tolerance %.1e)", check, residual, tolerance)
        else:
            logger.warning("%s failed: residual %.3e > tolerance %.1e", check, residual, tolerance)
        return entry

    def extend(self, other):
        self.entries.extend(other.entries)
        return self

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def worst(self):
        """The entry with the largest residual-to-tolerance ratio."""
        def ratio(e):
            if math.isnan(e.residual):
                return math.inf
            return e.residual / e.tolerance if e.tolerance > 0 else (math.inf if e.residual > 0 else 0.0)
        return max(self.entries, key=ratio) if self.entries else None

    def sorted_entries(self):
        return sorted(self.entries, key=lambda e: e.check)

    def to_dict(self, bundle=""):
        return {
            "schema": REPORT_SCHEMA,
            "bundle": bundle,
            "checks": [asdict(e) for e in self.sorted_entries()],
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, data):
        report = cls()
        for item in data.get("checks", []):
            report.entries.append(
                ReportEntry(
                    item["check"], float(item["residual"]), float(item["tolerance"]),
                    bool(item["passed"]), item.get("anchor", ""),
                )
            )
        return report

    def to_frame(self):
        rows = [asdict(e) for e in self.sorted_entries()]
        return pd.DataFrame(rows, columns=["check", "residual", "tolerance", "passed", "anchor"])

    def render_text(self, bundle=""):
        frame = self.to_frame()
        status = "PASS" if self.passed else "FAIL"
        header = f"[{status}] {bundle} ({len(frame)} checks, {len(self.failures())} failed)".replace("  ", " ")
        if frame.empty:
            return header
        frame["passed"] = frame["passed"].map({True: "ok", False: "FAIL"})
        body = frame.to_string(index=False, formatters={
            "residual": "{:.3e}".format,
            "tolerance": "{:.1e}".format,
        })
        return header + "\n" + body
