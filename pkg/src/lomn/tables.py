"""
Reference size/power values and comparison with simulated tables.

``REFERENCE[table][(q, nh, test)]`` lists rejection rates in the order of
``JUMP_SIZES[table]`` (all in log-price units, so 0.001 is 0.1%). A cell
passes when it lies within ``max(0.03, 3 * sqrt(p (1 - p) / R))`` of the
reference value ``p``, with ``R`` the number of simulated replications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import SizePowerTable

__all__ = ["REFERENCE", "JUMP_SIZES", "CellCheck", "tolerance", "compare"]

_P = 0.01

JUMP_SIZES = {
    "T1": tuple(j * _P for j in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)),
    "S1": tuple(j * _P for j in (0.0, 0.10, 0.15, 0.20, 0.25, 0.30, 0.50)),
    "T2": tuple(j * _P for j in (0.0, 0.100, 0.125, 0.150, 0.175, 0.200)),
    "T3": tuple(j * _P for j in (0.0, 0.100, 0.125, 0.150, 0.175, 0.200)),
    "T3-10": tuple(j * _P for j in (0.0, 0.100, 0.125, 0.150, 0.175, 0.200)),
    "T4": tuple(j * _P for j in (0.0, 0.05, 0.075, 0.1, 0.125, 0.15, 0.2)),
}

REFERENCE = {
    "T1": {
        (0.010 * _P, None, "BHR"): (0.05, 0.09, 0.65, 0.98, 1.00, 1.00),
        (0.025 * _P, None, "BHR"): (0.06, 0.09, 0.64, 0.98, 1.00, 1.00),
        (0.050 * _P, None, "BHR"): (0.05, 0.08, 0.60, 0.96, 1.00, 1.00),
        (0.075 * _P, None, "BHR"): (0.05, 0.09, 0.58, 0.96, 1.00, 1.00),
        (0.100 * _P, None, "BHR"): (0.05, 0.08, 0.55, 0.95, 1.00, 1.00),
    },
    "S1": {
        (0.010 * _P, None, "BHR"): (0.05, 0.16, 0.59, 0.91, 0.99, 1.00, 1.00),
        (0.025 * _P, None, "BHR"): (0.05, 0.15, 0.56, 0.90, 0.99, 1.00, 1.00),
        (0.050 * _P, None, "BHR"): (0.05, 0.14, 0.54, 0.89, 0.98, 1.00, 1.00),
        (0.075 * _P, None, "BHR"): (0.05, 0.13, 0.52, 0.87, 0.98, 1.00, 1.00),
        (0.100 * _P, None, "BHR"): (0.05, 0.13, 0.50, 0.85, 0.97, 1.00, 1.00),
    },
    "T2": {
        (0.05 * _P, 11, "BHR"): (0.05, 0.31, 0.63, 0.85, 0.94, 0.98),
        (0.05 * _P, 11, "LM"): (0.04, 0.14, 0.29, 0.50, 0.69, 0.83),
        (0.05 * _P, 15, "BHR"): (0.05, 0.29, 0.59, 0.83, 0.94, 0.98),
        (0.05 * _P, 15, "LM"): (0.05, 0.16, 0.33, 0.54, 0.72, 0.85),
        (0.10 * _P, 20, "BHR"): (0.05, 0.14, 0.32, 0.57, 0.77, 0.89),
        (0.10 * _P, 20, "LM"): (0.05, 0.07, 0.10, 0.19, 0.32, 0.47),
        (0.10 * _P, 34, "BHR"): (0.05, 0.12, 0.23, 0.43, 0.64, 0.80),
        (0.10 * _P, 34, "LM"): (0.05, 0.08, 0.14, 0.24, 0.37, 0.52),
    },
    "T3": {
        (0.05 * _P, 5, "BHR-ask"): (0.07, 0.27, 0.59, 0.82, 0.94, 0.98),
        (0.05 * _P, 5, "BHR-bid"): (0.05, 0.26, 0.56, 0.82, 0.94, 0.98),
        (0.05 * _P, 5, "LM"): (0.04, 0.06, 0.11, 0.23, 0.38, 0.55),
        (0.05 * _P, 12, "BHR-ask"): (0.06, 0.17, 0.35, 0.61, 0.80, 0.92),
        (0.05 * _P, 12, "BHR-bid"): (0.05, 0.16, 0.35, 0.63, 0.83, 0.93),
        (0.05 * _P, 12, "LM"): (0.04, 0.14, 0.32, 0.53, 0.72, 0.85),
    },
    "T3-10": {
        (0.05 * _P, 10, "BHR-ask"): (0.05, 0.12, 0.26, 0.45, 0.66, 0.84),
        (0.05 * _P, 10, "BHR-bid"): (0.04, 0.12, 0.25, 0.46, 0.66, 0.85),
        (0.05 * _P, 10, "LM"): (0.06, 0.11, 0.20, 0.38, 0.55, 0.74),
        (0.05 * _P, 11, "BHR-ask"): (0.07, 0.16, 0.30, 0.47, 0.67, 0.83),
        (0.05 * _P, 11, "BHR-bid"): (0.07, 0.16, 0.28, 0.46, 0.68, 0.84),
        (0.05 * _P, 11, "LM"): (0.05, 0.11, 0.22, 0.42, 0.60, 0.76),
    },
    "T4": {
        (0.05 * _P, 12, "BHR@bef-"): (0.05, 0.42, 0.71, 0.88, 0.95, 0.98, 0.99),
        (0.05 * _P, 12, "LM@bef-"): (0.05, 0.18, 0.34, 0.47, 0.58, 0.66, 0.75),
        (0.05 * _P, 12, "BHR@at"): (0.05, 0.58, 0.91, 0.99, 1.00, 1.00, 1.00),
        (0.05 * _P, 12, "LM@at"): (0.04, 0.45, 0.79, 0.96, 1.00, 1.00, 1.00),
        (0.05 * _P, 12, "BHR@aft+"): (0.05, 0.41, 0.71, 0.88, 0.94, 0.97, 0.99),
        (0.05 * _P, 12, "LM@aft+"): (0.05, 0.19, 0.32, 0.47, 0.58, 0.65, 0.75),
        (0.10 * _P, 26, "BHR@bef-"): (0.06, 0.26, 0.49, 0.70, 0.84, 0.91, 0.96),
        (0.10 * _P, 26, "LM@bef-"): (0.05, 0.12, 0.20, 0.31, 0.42, 0.51, 0.64),
        (0.10 * _P, 26, "BHR@at"): (0.05, 0.34, 0.67, 0.89, 0.97, 0.99, 1.00),
        (0.10 * _P, 26, "LM@at"): (0.05, 0.27, 0.51, 0.75, 0.90, 0.98, 1.00),
        (0.10 * _P, 26, "BHR@aft+"): (0.06, 0.26, 0.49, 0.70, 0.84, 0.91, 0.96),
        (0.10 * _P, 26, "LM@aft+"): (0.05, 0.12, 0.20, 0.32, 0.42, 0.51, 0.64),
    },
}


def tolerance(p: float, replications: int) -> float:
    """``max(0.03, 3 * sqrt(p (1 - p) / R))``."""
    return max(0.03, 3.0 * float(np.sqrt(p * (1.0 - p) / replications)))


@dataclass(frozen=True)
class CellCheck:
    q: float
    nh: object
    test: str
    jump_size: float
    observed: float
    expected: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.observed - self.expected) <= self.tolerance)

    def line(self) -> str:
        nh = "" if self.nh is None else f" nh={self.nh}"
        return (f"q={self.q * 100:.3f}%{nh} {self.test} jump={self.jump_size * 100:.3f}%: "
                f"{self.observed:.3f} vs {self.expected:.2f} (tol {self.tolerance:.3f}) "
                f"{'PASS' if self.passed else 'FAIL'}")


def compare(result: SizePowerTable, table: str = None, rows=None) -> list:
    """Check every simulated cell that has a reference counterpart.

    ``rows`` optionally restricts the comparison to ``(q, nh, test)`` keys.
    """
    table = table or result.table
    ref = REFERENCE[table]
    sizes = JUMP_SIZES[table]
    checks = []
    for c in result.cells:
        for (q, nh, test), values in ref.items():
            if rows is not None and (q, nh, test) not in rows:
                continue
            if not (np.isclose(c.q, q) and c.nh == nh and c.test == test):
                continue
            hit = [i for i, s in enumerate(sizes) if np.isclose(s, c.jump_size)]
            if not hit:
                continue
            expected = values[hit[0]]
            checks.append(CellCheck(q, nh, test, c.jump_size, c.rate, expected,
                                    tolerance(expected, c.replications - c.failures)))
    return sorted(checks, key=lambda k: (k.q, str(k.nh), k.test, k.jump_size))
