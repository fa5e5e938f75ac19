"""Result tables and envelope fits of bound shapes."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CSV_COLUMNS = ["experiment_id", "row_id", "parameters", "estimate", "std_error", "theory_shape",
               "fitted_constant", "pass"]


@dataclass
class Row:
    experiment_id: str
    row_id: str
    parameters: dict
    estimate: float
    std_error: float
    theory_shape: float
    fitted_constant: float = math.nan
    passed: bool = True
    note: str = ""

    def as_csv(self) -> list:
        return [self.experiment_id, self.row_id, json.dumps(self.parameters, sort_keys=True),
                _fmt(self.estimate), _fmt(self.std_error), _fmt(self.theory_shape),
                _fmt(self.fitted_constant), "true" if self.passed else "false"]


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, *args, **kw) -> Row:
        r = Row(*args, **kw)
        self.rows.append(r)
        return r

    def extend(self, other: "ResultTable"):
        self.rows.extend(other.rows)
        self.fitted.update(other.fitted)
        self.meta.update(other.meta)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def failing(self) -> list:
        return [r for r in self.rows if not r.passed]

    def select(self, prefix: str) -> list:
        return [r for r in self.rows if r.row_id.startswith(prefix)]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow(r.as_csv())

    def __len__(self):
        return len(self.rows)


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# envelope fits


@dataclass(frozen=True)
class EnvelopeFit:
    constant: float
    passed: np.ndarray
    used: np.ndarray
    method: str

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passed))


def ls_envelope(values, std_errors, shape, noise_mult: float = 3.0) -> EnvelopeFit:
    """Least-squares constant over cells above ``noise_mult`` standard errors.

    ``C = sum |v| s / sum s^2`` over those cells (0 if none); a cell fails
    when ``|v| > C s + noise_mult * se``.
    """
    v = np.abs(np.asarray(values, float))
    se = np.asarray(std_errors, float)
    s = np.asarray(shape, float)
    used = v > noise_mult * se
    C = float(np.sum(v[used] * s[used]) / np.sum(s[used] ** 2)) if used.any() else 0.0
    passed = v <= C * s + noise_mult * se
    return EnvelopeFit(C, passed, used, "least-squares")


def calibrated_envelope(values, std_errors, shape, calibrate, noise_mult: float = 3.0) -> EnvelopeFit:
    """Envelope constant from calibration cells, tested on all cells.

    ``C = max v / s`` over the ``calibrate`` mask; a cell fails when
    ``v > C s + noise_mult * se``.  Calibration cells pass by construction,
    so the test bites on the remaining cells: their values must fall at
    least as fast as the shape.
    """
    v = np.asarray(values, float)
    se = np.asarray(std_errors, float)
    s = np.asarray(shape, float)
    cal = np.asarray(calibrate, bool)
    C = float(np.max(v[cal] / s[cal])) if cal.any() else 0.0
    C = max(C, 0.0)
    passed = v <= C * s + noise_mult * se
    return EnvelopeFit(C, passed, cal, "calibrated")


def decreasing_within_noise(values, std_errors, noise_mult: float = 3.0) -> np.ndarray:
    """``v[i+1] <= v[i] + noise_mult * sqrt(se[i]^2 + se[i+1]^2)`` for each step."""
    v = np.asarray(values, float)
    se = np.asarray(std_errors, float)
    return v[1:] <= v[:-1] + noise_mult * np.hypot(se[1:], se[:-1])


def strictly_decreasing(values) -> np.ndarray:
    v = np.asarray(values, float)
    return v[1:] < v[:-1]


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
