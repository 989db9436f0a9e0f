"""Power models and the converged return-speed analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NegativeSpeed, NonPositiveReturnSpeed, NoRealRoot

# Fitted unicycle coefficients (constant, |v|, v^2, |omega|, omega^2).
FITTED_MU0 = 1.234
FITTED_MU1 = 31.4578
FITTED_MU2 = 27.8126
FITTED_MU1P = 179.9095
FITTED_MU2P = -107.7343
PAYLOAD_W = 20.0


@dataclass(frozen=True)
class ParabolicPower:
    """P(u) = m0 + m1 |u| + m2 |u|^2 + payload."""

    m0: float = FITTED_MU0
    m1: float = FITTED_MU1
    m2: float = FITTED_MU2
    payload: float = 0.0

    def __post_init__(self):
        if not (self.m0 > 0 and self.m1 > 0 and self.m2 > 0):
            raise ValueError("m0, m1, m2 must be positive")
        if not self.payload >= 0:
            raise ValueError("payload must be non-negative")

    @property
    def base(self) -> float:
        """Standstill power, payload included."""
        return self.m0 + self.payload


@dataclass(frozen=True)
class UnicyclePower:
    mu0: float = FITTED_MU0
    mu1: float = FITTED_MU1
    mu2: float = FITTED_MU2
    mu1p: float = FITTED_MU1P
    mu2p: float = FITTED_MU2P
    payload: float = 0.0

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.payload >= 0:
            raise ValueError("payload must be non-negative")

    def linear_slice(self) -> ParabolicPower:
        """The straight-line (omega = 0) model."""
        return ParabolicPower(self.mu0, self.mu1, self.mu2, self.payload)


@dataclass(frozen=True)
class Disturbance:
    delta_p: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta_p):
            raise ValueError("delta_p must be finite")


def power_si(model: ParabolicPower, speed: float) -> float:
    if speed < 0:
        raise NegativeSpeed(f"speed must be >= 0, got {speed}")
    return model.m0 + model.m1 * speed + model.m2 * speed * speed + model.payload


def power_unicycle(model: UnicyclePower, v: float, omega: float) -> float:
    av = abs(v)
    aw = abs(omega)
    raw = model.mu0 + model.mu1 * av + model.mu2 * av * av + model.mu1p * aw + model.mu2p * aw * aw
    # the fitted omega^2 term is negative, so clamp outside the fitted range
    return max(0.0, raw) + model.payload


def converged_speed(model: ParabolicPower, v_r: float, dist: Disturbance = Disturbance()) -> tuple[float, float]:
    """Both roots (ascending) of |u| = (P(u) + dp) v_r / P(v_r).

    The payload acts as part of the constant term.
    """
    if not v_r > 0:
        raise NonPositiveReturnSpeed(f"v_r must be positive, got {v_r}")
    m0 = model.base
    m2 = model.m2
    dp = dist.delta_p
    # m2 v_r u^2 - (m0 + m2 v_r^2) u + (m0 + dp) v_r = 0 after cancelling m1
    a = m2 * v_r
    b = -(m0 + m2 * v_r * v_r)
    c = (m0 + dp) * v_r
    disc = (m0 - m2 * v_r * v_r) ** 2 - 4.0 * m2 * v_r * v_r * dp
    if disc < 0:
        raise NoRealRoot(f"no real converged speed: discriminant {disc:.6g} < 0")
    root = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (b - root) if b < 0 else -0.5 * (b + root)
    r1 = q / a
    r2 = c / q if q != 0 else r1
    return (min(r1, r2), max(r1, r2))


def max_return_speed(model: ParabolicPower) -> float:
    return math.sqrt(model.base / model.m2)


def stability_margin(model: ParabolicPower, v_r: float) -> float:
    if not v_r > 0:
        raise NonPositiveReturnSpeed(f"v_r must be positive, got {v_r}")
    m0 = model.base
    return ((m0 - model.m2 * v_r * v_r) / (2.0 * v_r * math.sqrt(model.m2))) ** 2


def rotation_excess(model: UnicyclePower, omega_max: float) -> float:
    """Largest extra power of turning in place at any rate up to ``omega_max``.

    This is max over w in [0, omega_max] of P_u(0, w) - P_u(0, 0).  The fitted
    model is not monotone in omega, so the value at ``omega_max`` alone can
    understate the cost of passing through intermediate rates.  The rotation
    terms form a parabola, so the maximum sits at an end point or the vertex.
    """
    if omega_max <= 0:
        return 0.0
    cands = [0.0, omega_max]
    if model.mu2p < 0:
        vertex = -model.mu1p / (2.0 * model.mu2p)
        if 0.0 < vertex < omega_max:
            cands.append(vertex)
    rest = power_unicycle(model, 0.0, 0.0)
    return max(power_unicycle(model, 0.0, w) for w in cands) - rest
