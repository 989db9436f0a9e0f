"""Barrier functions for energy sufficiency, path-parameter bound and tracking.

The QP decision vector is ``z = [eta, u1, u2]`` where ``eta`` is the rate of
the path parameter and ``u`` the commanded velocity.  Constraint rows are in
the form ``A z >= b`` with the fixed row order energy, bound, tracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidRadii
from .geometry import PathDynamics, SmoothParams, Vec2, WaypointPath, remaining_length, smooth_point, smooth_tangent
from .power import ParabolicPower, power_si
from .unicycle import SlowingProfile, slowing_integral, slowing_power

ROW_ENERGY, ROW_BOUND, ROW_TRACK = 0, 1, 2


def modified_radius(delta: float, d: float) -> float:
    """Target radius shrunk by the tracking slack, ``delta - d``."""
    if not (0.0 < d < delta):
        raise InvalidRadii(f"need 0 < d < delta, got d={d}, delta={delta}")
    return delta - d


@dataclass(frozen=True)
class ChargingRegion:
    center: Vec2
    radius: float
    tracking_radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", Vec2(float(self.center[0]), float(self.center[1])))
        modified_radius(self.radius, self.tracking_radius)

    @cached_property
    def effective_radius(self) -> float:
        return modified_radius(self.radius, self.tracking_radius)


@dataclass(frozen=True)
class CbfGains:
    gamma_e: float = 1.0
    gamma_b: float = 1.0
    gamma_d: float = 5.0

    def __post_init__(self):
        if not (self.gamma_e > 0 and self.gamma_b > 0 and self.gamma_d > 0):
            raise ValueError("all gains must be positive")


@dataclass(frozen=True)
class EnergyState:
    consumed: float
    budget: float

    def __post_init__(self):
        if not self.consumed >= 0:
            raise ValueError("consumed energy must be non-negative")
        if not self.budget > 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class CbfSnapshot:
    h_e: float
    h_b: float
    h_d: float


@dataclass(frozen=True)
class QpRows:
    a: np.ndarray
    b: np.ndarray
    u_nom3: np.ndarray


@dataclass(frozen=True)
class CbfConfig:
    """What the barrier rows need: linear power model, return speed, gains, region."""

    model: ParabolicPower
    v_r: float
    gains: CbfGains
    region: ChargingRegion

    @property
    def cost_per_meter(self) -> float:
        """Energy per meter of return at the design speed, P(v_r) / v_r."""
        return power_si(self.model, self.v_r) / self.v_r


def h_energy(
    energy: EnergyState,
    model: ParabolicPower,
    v_r: float,
    L: float,
    s: float,
    delta_m: float,
    extra_integral: float = 0.0,
) -> float:
    """Budget left after reserving the return along the rest of the path."""
    per_m = power_si(model, v_r) / v_r
    return energy.budget - energy.consumed - per_m * (L * (1.0 - s) - delta_m) - extra_integral


def h_bound(s: float) -> float:
    return s


def h_track(d: float, x: Sequence[float], x_r: Sequence[float]) -> float:
    ex = x[0] - x_r[0]
    ey = x[1] - x_r[1]
    return 0.5 * (d * d - (ex * ex + ey * ey))


def row_data(
    per_m: float,
    L: float,
    l_dot: float,
    s: float,
    h_e: float,
    h_d: float,
    x: Sequence[float],
    x_r: Sequence[float],
    tangent: Sequence[float],
    xr_dt: Sequence[float],
    gains: CbfGains,
    measured_power: float,
    eta_extra: float = 0.0,
    power_extra: float = 0.0,
) -> tuple[list[list[float]], list[float]]:
    """Rows ``a`` and right-hand side ``b`` as plain lists (energy, bound, tracking).

    ``eta_extra`` is the slowing power added to the energy row's ``eta``
    coefficient and ``power_extra`` the rotation power estimate added to its
    right-hand side; both are zero for a single integrator.
    """
    ex = x[0] - x_r[0]
    ey = x[1] - x_r[1]
    a = [
        [per_m * L + eta_extra, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [ex * tangent[0] + ey * tangent[1], -ex, -ey],
    ]
    b = [
        -gains.gamma_e * h_e + measured_power + power_extra + per_m * l_dot * (1.0 - s),
        -gains.gamma_b * h_bound(s),
        -gains.gamma_d * h_d - (ex * xr_dt[0] + ey * xr_dt[1]),
    ]
    return a, b


def _rows(per_m, L, l_dot, s, h_e, h_d, x, x_r, tangent, xr_dt, gains, u_nom, measured_power, eta_extra, power_extra):
    a, b = row_data(per_m, L, l_dot, s, h_e, h_d, x, x_r, tangent, xr_dt, gains, measured_power, eta_extra, power_extra)
    return QpRows(np.array(a), np.array(b), np.array([0.0, float(u_nom[0]), float(u_nom[1])]))


def build_qp_si(
    path: WaypointPath,
    params: SmoothParams,
    s: float,
    x: Sequence[float],
    E: EnergyState,
    config: CbfConfig,
    dyn: PathDynamics,
    u_nom: Sequence[float],
    measured_power: float,
) -> QpRows:
    """Constraint rows for a single-integrator robot."""
    x_r = smooth_point(path, params, s)
    tangent = smooth_tangent(path, params, s, "full")
    L = path.total_length
    h_e = h_energy(E, config.model, config.v_r, L, s, config.region.effective_radius)
    h_d = h_track(config.region.tracking_radius, x, x_r)
    return _rows(
        config.cost_per_meter, L, dyn.l_dot, s, h_e, h_d, x, x_r, tangent, dyn.xr_partial_t,
        config.gains, u_nom, measured_power, 0.0, 0.0,
    )


def build_qp_unicycle(
    path: WaypointPath,
    params: SmoothParams,
    s: float,
    x: Sequence[float],
    E: EnergyState,
    config: CbfConfig,
    dyn: PathDynamics,
    u_nom: Sequence[float],
    measured_power: float,
    profile: SlowingProfile,
    delta_omega: float,
) -> QpRows:
    """Rows for a unicycle: the energy row gains the corner slowing power."""
    x_r = smooth_point(path, params, s)
    tangent = smooth_tangent(path, params, s, "full")
    L = path.total_length
    extra = slowing_integral(profile, s)
    h_e = h_energy(E, config.model, config.v_r, L, s, config.region.effective_radius, extra)
    h_d = h_track(config.region.tracking_radius, x, x_r)
    return _rows(
        config.cost_per_meter, L, dyn.l_dot, s, h_e, h_d, x, x_r, tangent, dyn.xr_partial_t,
        config.gains, u_nom, measured_power, slowing_power(profile, s), delta_omega,
    )


def snapshot(
    path: WaypointPath,
    params: SmoothParams,
    s: float,
    x: Sequence[float],
    E: EnergyState,
    config: CbfConfig,
    extra_integral: float = 0.0,
) -> CbfSnapshot:
    x_r = smooth_point(path, params, s)
    return CbfSnapshot(
        h_energy(E, config.model, config.v_r, path.total_length, s, config.region.effective_radius, extra_integral),
        h_bound(s),
        h_track(config.region.tracking_radius, x, x_r),
    )


def reserve_energy(config: CbfConfig, path: WaypointPath, s: float) -> float:
    """Energy set aside for the rest of the path, ``P(v_r)/v_r * (L(1-s) - delta_m)``."""
    return config.cost_per_meter * (remaining_length(path, s) - config.region.effective_radius)
