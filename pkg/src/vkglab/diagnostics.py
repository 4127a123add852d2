"""Per-step diagnostics of a coupled run and their file formats.

Every bound that the solvers are expected to respect surfaces here as a
named, machine-readable flag; nothing is checked silently.  Flags are
tri-state: "pass", "fail", or "n/a" (check not applicable, e.g. relative
mass drift of vanishing data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DiagnosticsTimeline", "StepRecord", "CHECK_NAMES"]

_FMT = "%.17g"

CHECK_NAMES = (
    "max_principle",      # ||f(t)||_inf within tolerance of ||f(0)||_inf
    "mass_conservation",  # ||rho(t)||_1 drift within tolerance
    "support_x",          # spatial support radius <= R0 + t + one cell
    "rho_bound",          # max rho <= 2 ||f(0)||_inf P(t)
    "momentum_bound",     # P(t) - P0 <= int ||dx u|| ds + one cell
)


@dataclass
class StepRecord:
    t: float
    p_radius: float
    x_radius: float
    rho_l1: float
    f_inf: float
    dxu_inf: float
    rho_max: float
    int_dxu: float
    flags: dict

    def row(self):
        cells = [_FMT % val for val in (
            self.t, self.p_radius, self.x_radius, self.rho_l1, self.f_inf,
            self.dxu_inf, self.rho_max, self.int_dxu)]
        cells += [self.flags.get(name, "n/a") for name in CHECK_NAMES]
        return ",".join(cells)


@dataclass
class DiagnosticsTimeline:
    """Strictly time-ordered step records of one run."""

    records: list = field(default_factory=list)

    HEADER = ("t,P,R,rho_l1,f_inf,dxu_inf,rho_max,int_dxu,"
              + ",".join(CHECK_NAMES))

    def append(self, record: StepRecord):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("diagnostics times must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def failed_checks(self):
        """Names of checks that failed at any step, in first-failure order."""
        seen = []
        for rec in self.records:
            for name, status in rec.flags.items():
                if status == "fail" and name not in seen:
                    seen.append(name)
        return seen

    def summary(self):
        recs = self.records
        out = {
            "n_steps": len(recs),
            "final_time": recs[-1].t if recs else 0.0,
            "max_P": max((r.p_radius for r in recs), default=0.0),
            "max_R": max((r.x_radius for r in recs), default=0.0),
            "max_f_inf": max((r.f_inf for r in recs), default=0.0),
            "max_dxu_inf": max((r.dxu_inf for r in recs), default=0.0),
            "failed_checks": self.failed_checks(),
        }
        if recs:
            first = recs[0].rho_l1
            if first > 0:
                out["mass_drift"] = max(
                    abs(r.rho_l1 / first - 1.0) for r in recs)
        return out

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.HEADER + "\n")
            for rec in self.records:
                fh.write(rec.row() + "\n")

    @classmethod
    def from_csv(cls, path):
        tl = cls()
        with open(path, encoding="ascii") as fh:
            header = fh.readline().strip()
            if header != cls.HEADER:
                raise ValueError("unrecognized diagnostics header")
            for line in fh:
                parts = line.strip().split(",")
                vals = [float(p) for p in parts[:8]]
                flags = dict(zip(CHECK_NAMES, parts[8:]))
                tl.append(StepRecord(*vals, flags=flags))
        return tl

    def to_json(self, path):
        payload = {
            "summary": self.summary(),
            "records": [
                {"t": r.t, "P": r.p_radius, "R": r.x_radius,
                 "rho_l1": r.rho_l1, "f_inf": r.f_inf, "dxu_inf": r.dxu_inf,
                 "rho_max": r.rho_max, "int_dxu": r.int_dxu,
                 "flags": r.flags}
                for r in self.records],
        }
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
