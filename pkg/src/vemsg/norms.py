"""Relative discrete errors against the vertex interpolant, and observed rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .assembly import GlobalSystem


class ZeroReferenceError(ValueError):
    """The reference vector has zero norm, so a relative error is undefined."""


@dataclass(frozen=True)
class ConvergenceRecord:
    h: float
    dt: float
    l2_error: float
    h1_error: float
    dofs: int
    newton_total: int = 0
    wall_seconds: float = 0.0
    rate_l2: float | None = None
    rate_h1: float | None = None
    newton_max: int = 0

    def __post_init__(self):
        if self.l2_error < 0 or self.h1_error < 0:
            raise ValueError("errors must be non-negative")


def _relative(mat, reference, approx) -> float:
    reference = np.asarray(reference, dtype=float)
    e = reference - np.asarray(approx, dtype=float)
    den = float(reference @ (mat @ reference))
    if not den > 0.0:
        raise ZeroReferenceError("reference has zero discrete norm")
    return math.sqrt(max(float(e @ (mat @ e)), 0.0) / den)


def relative_l2(system: GlobalSystem, u_exact_interp, u_h) -> float:
    """``sqrt(e'Me / r'Mr)`` with ``r = I_h u`` and ``e = r - u_h``."""
    return _relative(system.M, u_exact_interp, u_h)


def relative_h1(system: GlobalSystem, u_exact_interp, u_h) -> float:
    """Same as :func:`relative_l2` with the stiffness matrix."""
    return _relative(system.A, u_exact_interp, u_h)


def rate(e1: float, e2: float, m1: float, m2: float) -> float:
    """``log(e1/e2) / log(m1/m2)``."""
    return math.log(e1 / e2) / math.log(m1 / m2)


def rates(records: list[ConvergenceRecord], by: str = "h") -> list[ConvergenceRecord]:
    """
    Fill ``rate_l2`` and ``rate_h1`` from consecutive records.

    ``by`` selects the refinement parameter, ``"h"`` or ``"dt"``; it must
    strictly decrease along the list.
    """
    if by not in ("h", "dt"):
        raise ValueError("by must be 'h' or 'dt'")
    if len(records) < 2:
        raise ValueError("at least two records are needed")
    m = [getattr(r, by) for r in records]
    if any(b >= a for a, b in zip(m, m[1:])):
        raise ValueError(f"{by} must strictly decrease along the records")
    out = [replace(records[0], rate_l2=None, rate_h1=None)]
    for prev, cur in zip(records, records[1:]):
        a, b = getattr(prev, by), getattr(cur, by)
        out.append(
            replace(
                cur,
                rate_l2=_safe_rate(prev.l2_error, cur.l2_error, a, b),
                rate_h1=_safe_rate(prev.h1_error, cur.h1_error, a, b),
            )
        )
    return out


def _safe_rate(e1, e2, m1, m2):
    if e1 > 0 and e2 > 0:
        return rate(e1, e2, m1, m2)
    return None


def fitted_rate(params, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(param)``."""
    x, y = np.log(np.asarray(params, dtype=float)), np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
