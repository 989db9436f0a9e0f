"""Piecewise-linear waypoint paths and their double-sigmoid smoothing.

A path ``w_0 ... w_{n-1}`` is parametrised by the normalised arc length
``s in [0, 1]``.  Each segment ``i`` (from ``w_i`` to ``w_{i+1}``) owns a
double sigmoid ``sigma_i(s) = rise_i(s) * fall_i(s)`` that is close to one on
``[s_i, s_{i+1}]`` and close to zero elsewhere.  The smooth reference point is
the sigmoid-weighted blend of the per-segment linear interpolants.

All indices are zero based: waypoints ``0..n-1``, segments ``0..n-2``,
interior waypoints (where a turn angle is defined) ``1..n-2``.

The blend is evaluated in a frame anchored at the head waypoint ``w_0``, i.e.
``p(s) = w_0 + sum_i sigma_i(s) (wbar_i(s) - w_0)``.  This is the same
expression written relative to ``w_0``; it keeps the endpoint error
proportional to the path length instead of to the absolute coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import DegenerateSegment, HeadMismatch, IndexOutOfRange, KappaOutOfRange, TooFewWaypoints

MIN_SEGMENT = 1e-9


class Vec2(NamedTuple):
    x: float
    y: float


def _logistic(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _angle_between(ax: float, ay: float, bx: float, by: float) -> float:
    # atan2 form of arccos(a.b / |a||b|); exact zero for collinear vectors
    cross = ax * by - ay * bx
    dot = ax * bx + ay * by
    return math.atan2(abs(cross), dot)


@dataclass(frozen=True)
class WaypointPath:
    """Immutable waypoint path with all derived length/parameter fields."""

    waypoints: tuple[Vec2, ...]
    seg_lengths: tuple[float, ...]
    cum_lengths: tuple[float, ...]
    rem_lengths: tuple[float, ...]
    total_length: float
    breakpoints: tuple[float, ...]
    turn_angles: tuple[float, ...]
    # per-segment unit directions, cached for the hot evaluation loop
    unit_dirs: tuple[Vec2, ...] = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.waypoints)

    @property
    def head(self) -> Vec2:
        return self.waypoints[0]

    @property
    def end(self) -> Vec2:
        return self.waypoints[-1]

    def with_head(self, head: Sequence[float]) -> "WaypointPath":
        """Same path with the first waypoint moved to ``head``."""
        return build_path([head, *self.waypoints[1:]])


def build_path(points: Iterable[Sequence[float]]) -> WaypointPath:
    pts = [Vec2(float(p[0]), float(p[1])) for p in points]
    n = len(pts)
    if n < 2:
        raise TooFewWaypoints(f"need at least 2 waypoints, got {n}")
    seg = []
    dirs = []
    for i in range(n - 1):
        dx = pts[i + 1].x - pts[i].x
        dy = pts[i + 1].y - pts[i].y
        ell = math.hypot(dx, dy)
        if not ell > MIN_SEGMENT:
            raise DegenerateSegment(i)
        seg.append(ell)
        dirs.append(Vec2(dx / ell, dy / ell))
    cum = [0.0]
    for ell in seg:
        cum.append(cum[-1] + ell)
    total = cum[-1]
    rem = [0.0] * n
    for i in range(n - 2, -1, -1):
        rem[i] = rem[i + 1] + seg[i]
    bp = [c / total for c in cum]
    bp[-1] = 1.0
    angles = tuple(
        _angle_between(dirs[i - 1].x, dirs[i - 1].y, dirs[i].x, dirs[i].y) for i in range(1, n - 1)
    )
    return WaypointPath(
        waypoints=tuple(pts),
        seg_lengths=tuple(seg),
        cum_lengths=tuple(cum),
        rem_lengths=tuple(rem),
        total_length=total,
        breakpoints=tuple(bp),
        turn_angles=angles,
        unit_dirs=tuple(dirs),
    )


def turn_angle(path: WaypointPath, i: int) -> float:
    """Turn angle at interior waypoint ``i`` (0 = straight, pi = reversal)."""
    if not 1 <= i <= path.n - 2:
        raise IndexOutOfRange(f"turn angle needs an interior waypoint, got index {i} for n={path.n}")
    return path.turn_angles[i - 1]


@dataclass(frozen=True)
class SmoothParams:
    beta: float = 500.0
    eps_end: float | None = None

    def __post_init__(self):
        if self.eps_end is None:
            object.__setattr__(self, "eps_end", 10.0 / self.beta)
        if not (self.beta > 0 and self.eps_end > 0):
            raise ValueError("beta and eps_end must be positive")
        if self.beta * self.eps_end < 10.0 - 1e-12:
            raise ValueError("beta * eps_end must be >= 10 to pin the path endpoints")


def rise_fall(params: SmoothParams, path: WaypointPath, i: int, s: float) -> tuple[float, float]:
    """Rising and falling edge of segment ``i``'s double sigmoid at ``s``."""
    bp = path.breakpoints
    beta = params.beta
    lo = bp[i] - (params.eps_end if i == 0 else 0.0)
    hi = bp[i + 1] + (params.eps_end if i == path.n - 2 else 0.0)
    return _logistic(beta * (s - lo)), _logistic(-beta * (s - hi))


def double_sigmoid(params: SmoothParams, path: WaypointPath, i: int, s: float) -> float:
    r, f = rise_fall(params, path, i, s)
    return r * f


class _Blend(NamedTuple):
    point: Vec2
    tangent_full: Vec2
    tangent_simple: Vec2
    sigmas: tuple[float, ...]
    rises: tuple[float, ...]
    falls: tuple[float, ...]


def _blend(path: WaypointPath, params: SmoothParams, s: float) -> _Blend:
    wps = path.waypoints
    bp = path.breakpoints
    dirs = path.unit_dirs
    total = path.total_length
    beta = params.beta
    eps = params.eps_end
    last = path.n - 2
    ox, oy = wps[0]
    px = py = 0.0
    tfx = tfy = 0.0
    tsx = tsy = 0.0
    sig = []
    ris = []
    fal = []
    for i in range(last + 1):
        s0 = bp[i]
        s1 = bp[i + 1]
        lo = s0 - eps if i == 0 else s0
        hi = s1 + eps if i == last else s1
        r = _logistic(beta * (s - lo))
        f = _logistic(-beta * (s - hi))
        g = r * f
        sig.append(g)
        ris.append(r)
        fal.append(f)
        ax, ay = wps[i]
        bx, by = wps[i + 1]
        ds = s1 - s0
        tau = (s - s0) / ds
        # wbar_i(s) - w_0
        qx = ax - ox + tau * (bx - ax)
        qy = ay - oy + tau * (by - ay)
        px += g * qx
        py += g * qy
        k = beta * g * (f - r)
        tfx += k * qx + g * (bx - ax) / ds
        tfy += k * qy + g * (by - ay) / ds
        ux, uy = dirs[i]
        tsx += g * ux
        tsy += g * uy
    return _Blend(
        Vec2(ox + px, oy + py),
        Vec2(tfx, tfy),
        Vec2(total * tsx, total * tsy),
        tuple(sig),
        tuple(ris),
        tuple(fal),
    )


def smooth_point(path: WaypointPath, params: SmoothParams, s: float) -> Vec2:
    return _blend(path, params, s).point


def smooth_tangent(path: WaypointPath, params: SmoothParams, s: float, mode: str = "full") -> Vec2:
    """Derivative of the smooth point with respect to ``s``.

    ``full`` is the exact derivative of :func:`smooth_point`; ``simplified``
    keeps only the ``L * sum sigma_i e_i`` term, which is the large-beta limit
    away from breakpoints.
    """
    b = _blend(path, params, s)
    if mode == "full":
        return b.tangent_full
    if mode == "simplified":
        return b.tangent_simple
    raise ValueError(f"unknown tangent mode {mode!r}")


def remaining_length(path: WaypointPath, s: float) -> float:
    return path.total_length * (1.0 - s)


@dataclass(frozen=True)
class PathDynamics:
    l_dot: float
    s_dot_breakpoints: tuple[float, ...]
    xr_partial_t: Vec2


def _length_rate(path: WaypointPath, head_rate: Sequence[float]) -> float:
    ex, ey = path.unit_dirs[0]
    return -(ex * head_rate[0] + ey * head_rate[1])


def breakpoint_rates(path: WaypointPath, l_dot: float) -> tuple[float, ...]:
    """Rates of change of every breakpoint when only the head waypoint moves.

    The first and last breakpoints are pinned at 0 and 1.
    """
    total = path.total_length
    k = l_dot / (total * total)
    rates = [0.0] * path.n
    for i in range(1, path.n - 1):
        rates[i] = path.rem_lengths[i] * k
    return tuple(rates)


def path_time_derivative(
    path: WaypointPath, params: SmoothParams, s: float, head_rate: Sequence[float]
) -> PathDynamics:
    """Explicit time derivatives of the path when its head moves at ``head_rate``.

    Only the head waypoint moves; the remaining waypoints are fixed.  The
    partial derivative of the reference point at fixed ``s`` accounts for the
    moving head, the drifting interior breakpoints (through both the linear
    interpolants and the sigmoid edges).
    """
    xi_x, xi_y = float(head_rate[0]), float(head_rate[1])
    if xi_x == 0.0 and xi_y == 0.0:
        return PathDynamics(0.0, (0.0,) * path.n, Vec2(0.0, 0.0))
    l_dot = _length_rate(path, (xi_x, xi_y))
    sdot = breakpoint_rates(path, l_dot)
    b = _blend(path, params, s)
    wps = path.waypoints
    bp = path.breakpoints
    beta = params.beta
    ox, oy = wps[0]
    vx, vy = xi_x, xi_y
    for i in range(path.n - 1):
        g = b.sigmas[i]
        r = b.rises[i]
        f = b.falls[i]
        s0 = bp[i]
        s1 = bp[i + 1]
        ds = s1 - s0
        tau = (s - s0) / ds
        ax, ay = wps[i]
        bx, by = wps[i + 1]
        dx = bx - ax
        dy = by - ay
        qx = ax - ox + tau * dx
        qy = ay - oy + tau * dy
        g_dot = beta * g * ((1.0 - f) * sdot[i + 1] - (1.0 - r) * sdot[i])
        tau_dot = (-sdot[i] * (s1 - s) - sdot[i + 1] * (s - s0)) / (ds * ds)
        # d/dt (wbar_i - w_0); only w_0 moves
        if i == 0:
            mx = xi_x * (1.0 - tau) + tau_dot * dx - xi_x
            my = xi_y * (1.0 - tau) + tau_dot * dy - xi_y
        else:
            mx = tau_dot * dx - xi_x
            my = tau_dot * dy - xi_y
        vx += g_dot * qx + g * mx
        vy += g_dot * qy + g * my
    return PathDynamics(l_dot, sdot, Vec2(vx, vy))


def spc_update(path: WaypointPath, x: Sequence[float], kappa: float) -> WaypointPath:
    """Sequential path construction: insert a collinear waypoint after the head.

    Total length and total turning are unchanged.
    """
    if not 0.0 < kappa < 1.0:
        raise KappaOutOfRange(f"kappa must lie in (0, 1), got {kappa}")
    hx, hy = path.waypoints[0]
    if math.hypot(x[0] - hx, x[1] - hy) > 1e-6 * path.total_length:
        raise HeadMismatch("robot position does not coincide with the path head")
    w2 = path.waypoints[1]
    inserted = (kappa * x[0] + (1.0 - kappa) * w2.x, kappa * x[1] + (1.0 - kappa) * w2.y)
    return build_path([x, inserted, *path.waypoints[1:]])


def format_path(path: WaypointPath) -> str:
    """Plain-text form: one ``x y`` line per waypoint."""
    return "".join(f"{w.x:.17g} {w.y:.17g}\n" for w in path.waypoints)


def parse_path(text: str) -> WaypointPath:
    pts = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.split()
        pts.append((float(a), float(b)))
    return build_path(pts)
