"""Exact solver for min ||z - z_nom||^2 subject to A z >= b with three variables.

With three rows there are only eight candidate active sets.  Each candidate is
the projection of ``z_nom`` onto the affine set where its rows hold with
equality; the optimum is the candidate that is primal and dual feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _fast
from .errors import Infeasible, NotConverged

TOL = _fast.QP_TOL


@dataclass(frozen=True)
class Qp3:
    a: np.ndarray
    b: np.ndarray
    z_nom: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3, 3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        z = np.asarray(self.z_nom, dtype=float).reshape(3)
        if not (np.isfinite(a).all() and np.isfinite(b).all() and np.isfinite(z).all()):
            raise ValueError("QP data must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "z_nom", z)


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    active_set: tuple[int, ...]
    objective: float
    multipliers: np.ndarray  # lambda for each row, zero outside the active set


def solve_rows(a: Sequence[Sequence[float]], b: Sequence[float], z_nom: Sequence[float]):
    """Core solver on plain sequences; returns (z, active_set, objective, multipliers)."""
    z, mask, obj, lam, ok = _fast.qp_solve(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(z_nom, dtype=float)
    )
    if not ok:
        raise Infeasible("no active set yields a feasible point")
    active = tuple(i for i in range(3) if mask >> i & 1)
    return (float(z[0]), float(z[1]), float(z[2])), active, float(obj), (float(lam[0]), float(lam[1]), float(lam[2]))


def solve(qp: Qp3) -> QpSolution:
    z, active, obj, lam = solve_rows(qp.a, qp.b, qp.z_nom)
    return QpSolution(np.array(z), active, obj, np.array(lam))


def oracle_solve(qp: Qp3, iterations: int = 20000) -> np.ndarray:
    """Dykstra's alternating projections onto the half-spaces.

    Converges to the Euclidean projection of ``z_nom`` onto the intersection,
    which is the QP minimiser.  Independent of the active-set logic in
    :func:`solve`; used as a cross-check.
    """
    a, b = qp.a, qp.b
    z = qp.z_nom.copy()
    corr = np.zeros((3, 3))
    norms = np.einsum("ij,ij->i", a, a)
    for _ in range(iterations):
        prev = z.copy()
        for i in range(3):
            y = z + corr[i]
            if norms[i] > 0.0:
                gap = b[i] - a[i] @ y
                z_new = y + a[i] * (gap / norms[i]) if gap > 0 else y
            else:
                z_new = y
            corr[i] = y - z_new
            z = z_new
        if np.max(np.abs(z - prev)) < 1e-15 and _residual(a, b, z) <= 1e-12:
            break
    if _residual(a, b, z) > 1e-7:
        raise NotConverged(f"feasibility residual {_residual(a, b, z):.3g} after {iterations} iterations")
    return z


def _residual(a: np.ndarray, b: np.ndarray, z: np.ndarray) -> float:
    return float(np.max(np.maximum(b - a @ z, 0.0)))


def kkt_residuals(qp: Qp3, sol: QpSolution) -> tuple[float, float, float]:
    """(stationarity, most negative multiplier, scaled primal violation)."""
    a, b = qp.a, qp.b
    stat = float(np.linalg.norm((sol.z - qp.z_nom) - a.T @ sol.multipliers / 2.0))
    dual = float(max(0.0, -sol.multipliers.min()))
    scale = np.maximum(1.0, np.maximum(np.linalg.norm(a, axis=1) * np.linalg.norm(sol.z), np.abs(b)))
    primal = float(np.max(np.maximum(b - a @ sol.z, 0.0) / scale))
    return stat, dual, primal
