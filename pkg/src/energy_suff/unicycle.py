"""Unicycle bridge: handle-point transform, corner rotation bounds, slowing power.

The slowing-power profile adds energy to the return reserve around every
waypoint where the path turns, so the reserve also covers the rotation cost
of a unicycle negotiating the corner.  Window amplitudes are stored already
scaled by ``L / v_r`` so that ``slowing_power`` returns joules per unit of the
path parameter; its integral over ``[s, 1]`` is in joules and enters the
energy barrier directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidAngles
from .geometry import WaypointPath, _logistic
from .power import UnicyclePower, rotation_excess


@dataclass(frozen=True)
class UnicycleParams:
    handle: float = 0.1
    eps_omega: float = 0.01
    beta_tilde: float = 300.0
    d_tilde: float | None = None  # None: derived from the corner angles

    def __post_init__(self):
        if not self.handle > 0:
            raise ValueError("handle must be positive")
        if not 0 < self.eps_omega < 0.5:
            raise ValueError("eps_omega must be small and positive")
        if not self.beta_tilde > 0:
            raise ValueError("beta_tilde must be positive")
        if self.d_tilde is not None and not self.d_tilde > 0:
            raise ValueError("d_tilde must be positive")


@dataclass(frozen=True)
class SlowingProfile:
    centers: tuple[float, ...]
    amplitudes: tuple[float, ...]
    half_width: float
    beta_tilde: float
    floor: float

    @staticmethod
    def empty() -> "SlowingProfile":
        return SlowingProfile((), (), 0.0, 1.0, 0.0)


def to_unicycle(u: Sequence[float], theta: float, handle: float) -> tuple[float, float]:
    c = math.cos(theta)
    s = math.sin(theta)
    return c * u[0] + s * u[1], (-s * u[0] + c * u[1]) / handle


def twoway(v: float, omega: float) -> tuple[float, float]:
    if v > 0:
        return v, omega
    if v < 0:
        return v, -omega
    return v, 0.0


def handle_velocity(v: float, omega: float, theta: float, handle: float) -> tuple[float, float]:
    """Velocity of the handle point for body speeds (v, omega)."""
    c = math.cos(theta)
    s = math.sin(theta)
    return v * c - handle * omega * s, v * s + handle * omega * c


def omega_bound(v_r: float, handle: float, psi: float) -> float:
    if psi > 0.5 * math.pi:
        psi = math.pi - psi
    return v_r / handle * math.sin(psi)


def attenuation_distance(handle: float, psi: float, eps_omega: float) -> float:
    if not (eps_omega > 0 and psi >= eps_omega):
        raise InvalidAngles(f"need psi >= eps_omega > 0, got psi={psi}, eps_omega={eps_omega}")
    return handle * 0.5 * math.pi * math.log(psi / eps_omega)


def build_slowing_profile(
    path: WaypointPath, model: UnicyclePower, v_r: float, params: UnicycleParams, d: float
) -> SlowingProfile:
    """Windows around every turning waypoint, sized to cover rotation and tracking lag.

    A window's amplitude is the largest extra power of turning in place at
    rates up to the corner's rotation bound.  The floor covers the residual
    rotation at ``eps_omega``; every window carries it, so where windows
    overlap it is counted more than once, which only enlarges the reserve.
    """
    L = path.total_length
    scale = L / v_r
    centers = []
    amps = []
    widths = [d]
    for k, psi in enumerate(path.turn_angles):
        if psi <= params.eps_omega:
            continue
        centers.append(path.breakpoints[k + 1])
        amps.append(scale * rotation_excess(model, omega_bound(v_r, params.handle, psi)))
        widths.append(attenuation_distance(params.handle, psi, params.eps_omega))
    if not centers:
        return SlowingProfile.empty()
    d_tilde = params.d_tilde if params.d_tilde is not None else 2.0 * max(widths)
    floor = scale * rotation_excess(model, v_r / params.handle * params.eps_omega)
    return SlowingProfile(tuple(centers), tuple(amps), 0.5 * d_tilde / L, params.beta_tilde, floor)


def _window(profile: SlowingProfile, c: float, s: float) -> float:
    b = profile.beta_tilde
    hw = profile.half_width
    return _logistic(b * (s - (c - hw))) * _logistic(-b * (s - (c + hw)))


def slowing_power(profile: SlowingProfile, s: float) -> float:
    """Sum over windows of (amplitude + floor) times the window weight at ``s``."""
    return sum((amp + profile.floor) * _window(profile, c, s) for c, amp in zip(profile.centers, profile.amplitudes))


def _softplus(z: float) -> float:
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def window_integral(lo: float, hi: float, beta: float, s0: float, s1: float) -> float:
    """Exact integral over ``[s0, s1]`` of ``logistic(beta (s - lo)) * logistic(-beta (s - hi))``.

    The two logistic arguments add up to the constant ``beta (hi - lo)``,
    which turns their product into ``(r + f - 1) / (1 - exp(-beta (hi - lo)))``;
    each edge then integrates to a softplus.
    """

    def prim(x: float) -> float:
        return (_softplus(beta * (x - lo)) - _softplus(beta * (hi - x))) / beta - x

    return (prim(s1) - prim(s0)) / -math.expm1(-beta * (hi - lo))


def slowing_integral(profile: SlowingProfile, s: float) -> float:
    """Integral of the slowing power over ``[s, 1]``, in closed form."""
    if s >= 1.0:
        return 0.0
    hw = profile.half_width
    b = profile.beta_tilde
    return sum(
        (amp + profile.floor) * window_integral(c - hw, c + hw, b, s, 1.0)
        for c, amp in zip(profile.centers, profile.amplitudes)
    )


def slowing_integral_simpson(profile: SlowingProfile, s: float, panels: int = 256) -> float:
    """The same integral by composite Simpson; slow to converge for sharp windows."""
    if s >= 1.0 or not profile.centers:
        return 0.0
    if panels % 2:
        panels += 1
    h = (1.0 - s) / panels
    acc = slowing_power(profile, s) + slowing_power(profile, 1.0)
    for k in range(1, panels):
        acc += (4.0 if k % 2 else 2.0) * slowing_power(profile, s + k * h)
    return acc * h / 3.0
