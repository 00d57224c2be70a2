"""Machine-readable run reports with an exit-code contract."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["RunReport", "EXIT_OK", "EXIT_VALIDATION", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass
class RunReport:
    command: str
    scenario_hash: str
    stages: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def add_check(self, name: str, passed: bool, value=None, tolerance=None):
        self.checks.append(
            {
                "name": name,
                "passed": bool(passed),
                "value": None if value is None else float(value),
                "tolerance": None if tolerance is None else float(tolerance),
            }
        )

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.all_passed else EXIT_NUMERICAL

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario_hash": self.scenario_hash,
            "stages": self.stages,
            "checks": self.checks,
            "artifacts": self.artifacts,
            # timing is intentionally last and excluded from any
            # byte-identity expectations across runs
            "wall_time_s": self.wall_time_s,
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    def summary_lines(self) -> list[str]:
        lines = [f"{self.command}: {'PASS' if self.all_passed else 'FAIL'}"]
        for c in self.checks:
            status = "pass" if c["passed"] else "FAIL"
            value = "" if c["value"] is None else f" value={c['value']:.3e}"
            tol = "" if c["tolerance"] is None else f" tol={c['tolerance']:.1e}"
            lines.append(f"  [{status}] {c['name']}{value}{tol}")
        return lines
