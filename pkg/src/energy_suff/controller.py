"""Per-step energy-sufficiency controller and replanning admission.

One :class:`ControllerState` belongs to one robot.  :func:`step` mutates it in
place: it moves the path head towards the robot (until the return starts and
the path freezes), evaluates the smoothed reference, assembles the three
barrier rows, solves the QP and advances the path parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _fast
from .cbf import CbfConfig, CbfGains, CbfSnapshot, ChargingRegion
from .errors import ConfigInvalid, QpInfeasible
from .geometry import MIN_SEGMENT, SmoothParams, Vec2, WaypointPath, build_path, spc_update
from .power import ParabolicPower, UnicyclePower, power_si
from .unicycle import SlowingProfile, UnicycleParams, build_slowing_profile

FROZEN = "frozen"
ARRIVED = "arrived"
PATH_ADMITTED = "path_admitted"
SPC_USED = "path_rejected_spc_used"
QP_INFEASIBLE = "qp_infeasible"
SATURATED = "saturated"

_ACTIVE = tuple(tuple(i for i in range(3) if m >> i & 1) for m in range(8))


@dataclass(frozen=True)
class UnicycleSettings:
    params: UnicycleParams = UnicycleParams()
    model: UnicyclePower = UnicyclePower()
    slowing: bool = True


@dataclass(frozen=True)
class ControllerConfig:
    v_r: float
    gains: CbfGains
    region: ChargingRegion
    model: ParabolicPower = ParabolicPower()
    u_max: float = 1.5
    k_w: float = 10.0
    sigma: float = 1e-3
    kappa: float = 0.5
    replan_period: float = 5.0
    smooth: SmoothParams = SmoothParams()
    unicycle: UnicycleSettings | None = None
    energy_margin: float = 1e-4
    power_filter: float = 0.0  # time constant of the measured-power low-pass, seconds

    def __post_init__(self):
        d = self.region.tracking_radius
        if not (self.v_r > 0 and self.u_max > 0):
            raise ConfigInvalid("v_r and u_max must be positive")
        # the tracking row may ask for up to gamma_d * h_d / d on top of v_r
        if self.v_r + self.gains.gamma_d * (0.5 * d * d) / d > self.u_max:
            raise ConfigInvalid(
                f"v_r + gamma_d * d / 2 = {self.v_r + 0.5 * self.gains.gamma_d * d:.4g} exceeds u_max = {self.u_max}"
            )
        if not 0 < self.sigma < 0.1:
            raise ConfigInvalid("sigma must lie in (0, 0.1)")
        if not 0 < self.kappa < 1:
            raise ConfigInvalid("kappa must lie in (0, 1)")
        if not (self.k_w > 0 and self.replan_period > 0):
            raise ConfigInvalid("k_w and replan_period must be positive")
        if not 0 <= self.energy_margin < 0.1:
            raise ConfigInvalid("energy_margin must lie in [0, 0.1)")
        if not self.power_filter >= 0:
            raise ConfigInvalid("power_filter must be non-negative")

    @cached_property
    def kernel_args(self) -> tuple:
        """Constant scalars handed to the compiled step kernel."""
        g = self.gains
        return (
            self.smooth.beta, self.smooth.eps_end, self.cost_per_meter, self.region.effective_radius,
            self.region.tracking_radius, g.gamma_e, g.gamma_b, g.gamma_d,
        )

    @property
    def cbf(self) -> CbfConfig:
        return CbfConfig(self.model, self.v_r, self.gains, self.region)

    @cached_property
    def cost_per_meter(self) -> float:
        return power_si(self.model, self.v_r) / self.v_r


@dataclass
class ControllerState:
    s: float
    head: Vec2
    frozen: bool
    waypoints: np.ndarray
    last_power: float
    last_u: Vec2 = Vec2(0.0, 0.0)
    profile: SlowingProfile = field(default_factory=SlowingProfile.empty)
    _path: WaypointPath | None = field(default=None, repr=False)

    @property
    def path(self) -> WaypointPath:
        if self._path is None:
            self._path = build_path(self.waypoints)
        return self._path

    def record_power(self, power: float, dt: float = 0.0, tau: float = 0.0) -> None:
        """Store the power drawn over the step just applied (the next step's measurement).

        With ``tau > 0`` the measurement is a first-order low-pass of the drawn power.
        """
        if tau > 0.0 and dt > 0.0:
            self.last_power += (power - self.last_power) * (dt / (tau + dt))
        else:
            self.last_power = power

    def set_path(self, path: WaypointPath) -> None:
        self.waypoints = np.array(path.waypoints, dtype=float)
        self.head = path.head
        self._path = path


@dataclass(frozen=True)
class ControlOutput:
    u: Vec2
    eta: float
    snapshot: CbfSnapshot
    qp_active_set: tuple[int, ...]
    events: tuple[str, ...]
    x_r: Vec2
    L: float


@dataclass(frozen=True)
class Admission:
    kind: str  # PATH_ADMITTED, SPC_USED or "" when gated off
    path: WaypointPath
    h_e_before: float
    h_e_after: float


def initial_state(path: WaypointPath, config: ControllerConfig) -> ControllerState:
    """Fresh state on ``path`` with the standstill power as the first measurement."""
    state = ControllerState(0.0, path.head, False, np.array(path.waypoints, dtype=float), config.model.base)
    state._path = path
    state.profile = _profile_for(path, config)
    return state


def _profile_for(path: WaypointPath, config: ControllerConfig) -> SlowingProfile:
    uni = config.unicycle
    if uni is None or not uni.slowing:
        return SlowingProfile.empty()
    return build_slowing_profile(path, uni.model, config.v_r, uni.params, config.region.tracking_radius)


def _profile_arrays(profile: SlowingProfile):
    return np.array(profile.centers, dtype=float), np.array(profile.amplitudes, dtype=float)


def slowing_terms(profile: SlowingProfile, s: float) -> tuple[float, float]:
    """(slowing power at s, its integral over [s, 1]) using the compiled kernels."""
    if not profile.centers:
        return 0.0, 0.0
    c, a = _profile_arrays(profile)
    hw, b, fl = profile.half_width, profile.beta_tilde, profile.floor
    return (
        _fast.slowing_power(c, a, hw, b, fl, s),
        _fast.slowing_integral(c, a, hw, b, fl, s),
    )


def update_head(state: ControllerState, x: Sequence[float], dt: float, config: ControllerConfig) -> Vec2:
    """Move the head towards the robot; returns the head velocity (zero once frozen)."""
    if state.frozen:
        return Vec2(0.0, 0.0)
    hx, hy = state.head
    xi = Vec2(-config.k_w * (hx - x[0]), -config.k_w * (hy - x[1]))
    if xi.x != 0.0 or xi.y != 0.0:
        state.head = Vec2(hx + xi.x * dt, hy + xi.y * dt)
    return xi


def _apply_head(state: ControllerState, config: ControllerConfig) -> None:
    wps = state.waypoints
    if wps[0, 0] == state.head.x and wps[0, 1] == state.head.y:
        return
    wps = wps.copy()
    wps[0, 0], wps[0, 1] = state.head
    # the head has caught up with the next waypoint: drop it rather than keep a null segment
    while wps.shape[0] > 2 and math.hypot(wps[1, 0] - wps[0, 0], wps[1, 1] - wps[0, 1]) <= 1e3 * MIN_SEGMENT:
        wps = np.delete(wps, 1, axis=0)
    state.waypoints = wps
    state._path = None
    if config.unicycle is not None and config.unicycle.slowing:
        state.profile = _profile_for(state.path, config)


def energy_value(
    config: ControllerConfig, L: float, s: float, consumed: float, budget: float, extra: float = 0.0
) -> float:
    usable = budget * (1.0 - config.energy_margin)
    return usable - consumed - config.cost_per_meter * (L * (1.0 - s) - config.region.effective_radius) - extra


def step(
    state: ControllerState,
    x: Sequence[float],
    consumed: float,
    budget: float,
    mission_u: Sequence[float],
    dt: float,
    config: ControllerConfig,
) -> ControlOutput:
    """One control period.  ``x`` is the controlled point (handle point for a unicycle)."""
    events = []
    xi = update_head(state, x, dt, config)
    _apply_head(state, config)
    s = state.s
    slow, extra = slowing_terms(state.profile, s)
    beta, eps, per_m, delta_m, d, ge, gb, gd = config.kernel_args
    out = _fast.control_eval(
        state.waypoints, beta, eps, s, xi.x, xi.y, float(x[0]), float(x[1]), consumed,
        budget * (1.0 - config.energy_margin), per_m, delta_m, d, ge, gb, gd, state.last_power, slow, extra,
        float(mission_u[0]), float(mission_u[1]),
    )
    h_e = out[5]
    h_d = out[6]
    if not out[4]:
        raise QpInfeasible(f"safety QP infeasible at s={s:.6g}, h_e={h_e:.6g}, h_d={h_d:.6g}")
    active = _ACTIVE[int(out[3])]
    x_r = Vec2(out[7], out[8])
    L = out[9]
    eta = out[0]
    s_new = min(1.0, max(0.0, s + eta * dt))
    state.s = s_new
    if not state.frozen and s_new > config.sigma:
        state.frozen = True
        events.append(FROZEN)
    ux, uy = out[1], out[2]
    speed = math.hypot(ux, uy)
    if speed > config.u_max:
        k = config.u_max / speed
        ux *= k
        uy *= k
        events.append(SATURATED)
    c = config.region.center
    if math.hypot(x[0] - c.x, x[1] - c.y) <= config.region.radius:
        events.append(ARRIVED)
    u = Vec2(ux, uy)
    state.last_u = u
    return ControlOutput(u, eta, CbfSnapshot(h_e, s, h_d), active, tuple(events), x_r, L)


def current_h_e(state: ControllerState, consumed: float, budget: float, config: ControllerConfig) -> float:
    _, extra = slowing_terms(state.profile, state.s)
    return energy_value(config, state.path.total_length, state.s, consumed, budget, extra)


def evaluate_path(
    candidate: WaypointPath,
    x: Sequence[float],
    consumed: float,
    budget: float,
    config: ControllerConfig,
    u_nom: Sequence[float],
    head_rate: Sequence[float] = (0.0, 0.0),
) -> tuple[float, float, bool]:
    """(L, h_e at s = 0, derivative condition) for a candidate path.

    The derivative condition checks that the barrier can still be kept at
    ``s = 0`` with ``eta = 0`` while the mission commands ``u_nom`` and the
    head moves at ``head_rate``.
    """
    L = candidate.total_length
    profile = _profile_for(candidate, config)
    _, extra = slowing_terms(profile, 0.0)
    h_e = energy_value(config, L, 0.0, consumed, budget, extra)
    e1 = candidate.unit_dirs[0]
    l_dot = -(e1.x * head_rate[0] + e1.y * head_rate[1])
    p_nom = power_si(config.model, math.hypot(u_nom[0], u_nom[1]))
    d_ok = -p_nom + config.cost_per_meter * (L * 0.0 - l_dot * 1.0) >= -config.gains.gamma_e * h_e
    return L, h_e, bool(d_ok)


def admit_path(
    state: ControllerState,
    candidate: WaypointPath,
    x: Sequence[float],
    consumed: float,
    budget: float,
    config: ControllerConfig,
    u_nom: Sequence[float],
) -> Admission:
    """Admit ``candidate`` if it keeps the energy barrier, otherwise extend the current path.

    No-op once the return has started (frozen path).  The fallback inserts a
    collinear waypoint after the current head, which leaves the path's
    geometry, length and turning unchanged.
    """
    if state.frozen or state.s > config.sigma:
        return Admission("", state.path, math.nan, math.nan)
    before = current_h_e(state, consumed, budget, config)
    head_rate = (-config.k_w * (state.head.x - x[0]), -config.k_w * (state.head.y - x[1]))
    _, h_e, d_ok = evaluate_path(candidate, x, consumed, budget, config, u_nom, head_rate)
    if h_e >= 0.0 and d_ok:
        state.set_path(candidate)
        state.s = 0.0
        state.frozen = False
        state.profile = _profile_for(candidate, config)
        return Admission(PATH_ADMITTED, candidate, before, current_h_e(state, consumed, budget, config))
    current = state.path
    w2 = current.waypoints[1]
    k = config.kappa
    inserted = Vec2(k * current.head.x + (1 - k) * w2.x, k * current.head.y + (1 - k) * w2.y)
    if min(math.dist(current.head, inserted), math.dist(inserted, w2)) > 1e3 * MIN_SEGMENT:
        new = spc_update(current, current.head, k)
        state.set_path(new)
        state.profile = _profile_for(new, config)
    return Admission(SPC_USED, state.path, before, current_h_e(state, consumed, budget, config))
