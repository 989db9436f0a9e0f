"""Fixed-step scenario runner, synthetic replanner, threshold baseline and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from . import _fast
from .cbf import CbfSnapshot, h_track
from .controller import (
    ARRIVED,
    PATH_ADMITTED,
    QP_INFEASIBLE,
    SATURATED,
    SPC_USED,
    ControllerConfig,
    ControllerState,
    ControlOutput,
    _apply_head,
    admit_path,
    current_h_e,
    initial_state,
    step,
    update_head,
)
from .errors import BoundsInvalid, ConfigInvalid, EmptyTrace, Infeasible, QpInfeasible
from .geometry import SmoothParams, Vec2, build_path, smooth_point, smooth_tangent
from .power import power_si, power_unicycle
from .qp import solve_rows
from .unicycle import attenuation_distance, to_unicycle, twoway

MAX_DT = 1e-2


@dataclass(frozen=True)
class Bounds:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise BoundsInvalid("bounds must have xmin < xmax and ymin < ymax")

    def contains(self, p: Sequence[float]) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


@dataclass(frozen=True)
class Mission:
    """Goals visited in order (cyclically) by unit-vector pursuit.

    ``random_goals`` extra goals are drawn from ``goal_bounds`` with the run
    seed and appended after the fixed ones.
    """

    goals: tuple[tuple[float, float, float], ...] = ()
    random_goals: int = 0
    goal_bounds: Bounds | None = None
    goal_speed: float = 1.0
    tolerance: float = 0.2
    loop: bool = True


@dataclass(frozen=True)
class Planner:
    """``none``: straight path to the station; ``scripted``: timed paths; ``random``: synth_planner."""

    kind: str = "none"
    scripted: tuple[tuple[float, tuple[tuple[float, float], ...]], ...] = ()
    bounds: Bounds | None = None
    n_range: tuple[int, int] = (2, 5)

    def __post_init__(self):
        if self.kind not in ("none", "scripted", "random"):
            raise ConfigInvalid(f"unknown planner kind {self.kind!r}")
        if self.kind == "random" and self.bounds is None:
            raise ConfigInvalid("random planner needs bounds")
        if not 2 <= self.n_range[0] <= self.n_range[1]:
            raise ConfigInvalid("n_range must satisfy 2 <= min <= max")


@dataclass(frozen=True)
class BaselineConfig:
    """Return along the path at v_r once the remaining energy fraction drops to ``tau``."""

    tau: float

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ConfigInvalid("tau must lie in (0, 1)")


@dataclass(frozen=True)
class Scenario:
    initial_x: Vec2
    station: Vec2
    budget: float
    controller: ControllerConfig
    mission: Mission = Mission()
    planner: Planner = Planner()
    disturbance: tuple[tuple[float, float], ...] = ()  # (start time, delta_p), piecewise constant
    dt: float = 1e-3
    max_time: float = 600.0
    variant: str = "single_integrator"
    theta0: float = 0.0
    start_frozen: bool = False
    baseline: BaselineConfig | None = None
    initial_energy: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "initial_x", Vec2(*map(float, self.initial_x)))
        object.__setattr__(self, "station", Vec2(*map(float, self.station)))
        if not 0 < self.dt <= MAX_DT:
            raise ConfigInvalid(f"dt must lie in (0, {MAX_DT}]")
        if not self.budget > 0:
            raise ConfigInvalid("budget must be positive")
        if not self.max_time > 0:
            raise ConfigInvalid("max_time must be positive")
        if self.variant not in ("single_integrator", "unicycle"):
            raise ConfigInvalid(f"unknown variant {self.variant!r}")
        if self.variant == "unicycle" and self.controller.unicycle is None:
            raise ConfigInvalid("unicycle variant needs controller.unicycle settings")
        if math.dist(self.controller.region.center, self.station) > 1e-12:
            raise ConfigInvalid("charging region center must equal the station")
        if not self.initial_energy >= 0:
            raise ConfigInvalid("initial_energy must be non-negative")


COLUMNS = (
    "t", "x", "y", "theta", "E", "h_e", "h_b", "h_d", "s", "L", "ux", "uy", "v", "omega", "power", "xr_x", "xr_y",
)


@dataclass(frozen=True)
class TraceRecord:
    t: float
    x: Vec2
    theta: float
    E: float
    h_e: float
    h_b: float
    h_d: float
    s: float
    L: float
    u: Vec2
    v: float
    omega: float
    power: float
    x_r: Vec2
    events: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "t": self.t, "x": self.x.x, "y": self.x.y, "theta": self.theta, "E": self.E,
            "h_e": self.h_e, "h_b": self.h_b, "h_d": self.h_d, "s": self.s, "L": self.L,
            "ux": self.u.x, "uy": self.u.y, "v": self.v, "omega": self.omega, "power": self.power,
            "xr_x": self.x_r.x, "xr_y": self.x_r.y, "events": list(self.events),
        }


class Trace:
    """Column store of per-step records plus the run's fixed context."""

    def __init__(self, budget: float, station: Vec2, radius: float, dt: float):
        self.budget = budget
        self.station = station
        self.radius = radius
        self.dt = dt
        self.cols: dict[str, list] = {c: [] for c in COLUMNS}
        self._lists = [self.cols[c] for c in COLUMNS]
        self.events: list[tuple[str, ...]] = []
        self.waypoints: list[list[tuple[float, float]]] = []  # every path the controller used

    def append(self, **row) -> None:
        self.add(*(row[c] for c in COLUMNS), events=row.get("events", ()))

    def add(self, *values, events=()) -> None:
        """Positional append in ``COLUMNS`` order (the simulator's fast path)."""
        for lst, v in zip(self._lists, values):
            lst.append(v)
        self.events.append(tuple(events))

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, k: int) -> TraceRecord:
        c = self.cols
        return TraceRecord(
            c["t"][k], Vec2(c["x"][k], c["y"][k]), c["theta"][k], c["E"][k], c["h_e"][k], c["h_b"][k],
            c["h_d"][k], c["s"][k], c["L"][k], Vec2(c["ux"][k], c["uy"][k]), c["v"][k], c["omega"][k],
            c["power"][k], Vec2(c["xr_x"][k], c["xr_y"][k]), self.events[k],
        )

    def __iter__(self) -> Iterator[TraceRecord]:
        for k in range(len(self)):
            yield self[k]

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.cols[name], dtype=float)


@dataclass(frozen=True)
class Metrics:
    eoa: float | None
    min_h_e: float
    min_h_d: float
    budget_violated: bool
    arrival_time: float | None
    saturation_steps: int
    distance_traveled: float
    qp_infeasible: bool = False
    final_energy: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class AdmissionLog:
    t: float
    kind: str
    h_e_before: float
    h_e_after: float


@dataclass
class RunResult:
    trace: Trace
    metrics: Metrics
    admissions: list[AdmissionLog] = field(default_factory=list)


def synth_planner(
    seed,
    x: Sequence[float],
    station: Sequence[float],
    bounds: Bounds,
    n_range: tuple[int, int],
) -> list[Vec2]:
    """Seeded random polyline from ``x`` to ``station`` inside ``bounds``.

    Interior points sit at evenly spaced fractions of the straight line with
    a bounded random lateral offset, clipped to the bounds.
    """
    if not (bounds.contains(x) and bounds.contains(station)):
        raise BoundsInvalid("x and station must lie inside the bounds")
    lo, hi = n_range
    if not 2 <= lo <= hi:
        raise BoundsInvalid("n_range must satisfy 2 <= min <= max")
    rng = np.random.default_rng(seed)
    n = int(rng.integers(lo, hi + 1))
    x0 = Vec2(float(x[0]), float(x[1]))
    x1 = Vec2(float(station[0]), float(station[1]))
    dx, dy = x1.x - x0.x, x1.y - x0.y
    dist = math.hypot(dx, dy)
    nx, ny = (-dy / dist, dx / dist) if dist > 0 else (0.0, 1.0)
    spread = 0.3 * max(dist, 1.0)
    pts = [x0]
    for j in range(1, n - 1):
        for _ in range(100):
            f = j / (n - 1)
            off = spread * (2.0 * rng.random() - 1.0)
            p = Vec2(
                min(max(x0.x + f * dx + off * nx, bounds.xmin), bounds.xmax),
                min(max(x0.y + f * dy + off * ny, bounds.ymin), bounds.ymax),
            )
            if math.dist(p, pts[-1]) > 1e-3 and math.dist(p, x1) > 1e-3:
                pts.append(p)
                break
    pts.append(x1)
    if math.dist(pts[0], pts[1]) <= 1e-6:
        # robot already at the station; keep a tiny well-formed path
        pts = [x0, Vec2(x0.x + 1e-3, x0.y)]
    return pts


def _goal_list(mission: Mission, seed: int) -> list[tuple[float, float, float]]:
    goals = list(mission.goals)
    if mission.random_goals:
        if mission.goal_bounds is None:
            raise ConfigInvalid("random goals need goal_bounds")
        b = mission.goal_bounds
        rng = np.random.default_rng((seed, 1))
        for _ in range(mission.random_goals):
            goals.append((float(rng.uniform(b.xmin, b.xmax)), float(rng.uniform(b.ymin, b.ymax)), mission.goal_speed))
    return goals


class _MissionTracker:
    def __init__(self, goals: list[tuple[float, float, float]], tolerance: float, loop: bool):
        self.goals = goals
        self.tol = tolerance
        self.loop = loop
        self.k = 0

    def command(self, p: Sequence[float]) -> Vec2:
        if not self.goals:
            return Vec2(0.0, 0.0)
        for _ in range(len(self.goals) + 1):
            if self.k >= len(self.goals):
                if not self.loop:
                    return Vec2(0.0, 0.0)
                self.k = 0
            gx, gy, speed = self.goals[self.k]
            dx, dy = gx - p[0], gy - p[1]
            dist = math.hypot(dx, dy)
            if dist > self.tol:
                return Vec2(speed * dx / dist, speed * dy / dist)
            self.k += 1
        return Vec2(0.0, 0.0)


def _plan(scenario: Scenario, seed: int, k: int, t: float, p: Vec2, scripted_next: list) -> list | None:
    pl = scenario.planner
    if pl.kind == "random":
        return synth_planner((seed, 2, k), p, scenario.station, pl.bounds, pl.n_range)
    if pl.kind == "scripted":
        if scripted_next and scripted_next[0][0] <= t + 1e-12:
            _, pts = scripted_next.pop(0)
            return [tuple(p)] + [tuple(q) for q in pts]
        return None
    return None


def _disturbance(schedule, t: float) -> float:
    dp = 0.0
    for t0, value in schedule:
        if t >= t0:
            dp = value
    return dp


@dataclass
class _BaselineState:
    triggered: bool = False
    eta: float = 0.0


def baseline_step(
    state: ControllerState,
    x: Sequence[float],
    consumed: float,
    budget: float,
    mission_u: Sequence[float],
    dt: float,
    config: ControllerConfig,
    bl: BaselineConfig,
    bstate: _BaselineState,
) -> ControlOutput:
    """Threshold controller: mission until the remaining energy fraction hits ``tau``, then return.

    Only the tracking barrier is enforced.  After the trigger the path is
    frozen and the reference advances at the fixed rate ``v_r / L``.
    """
    events = []
    if not bstate.triggered and (budget - consumed) / budget <= bl.tau:
        bstate.triggered = True
        state.frozen = True
        bstate.eta = config.v_r / state.path.total_length
    xi = update_head(state, x, dt, config)
    _apply_head(state, config)
    sp = config.smooth
    ev = _fast.path_eval(state.waypoints, sp.beta, sp.eps_end, state.s, xi.x, xi.y)
    L = ev[_fast.L_]
    x_r = Vec2(ev[_fast.PX], ev[_fast.PY])
    d = config.region.tracking_radius
    h_d = h_track(d, x, x_r)
    eta = bstate.eta
    ex, ey = x[0] - x_r.x, x[1] - x_r.y
    # eta pinned by two opposing rows; tracking row as in the barrier controller
    a = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [ex * ev[_fast.TFX] + ey * ev[_fast.TFY], -ex, -ey]]
    b = [eta, -eta, -config.gains.gamma_d * h_d - (ex * ev[_fast.DTX] + ey * ev[_fast.DTY])]
    try:
        z, active, _, _ = solve_rows(a, b, (eta, mission_u[0], mission_u[1]))
    except Infeasible as exc:
        raise QpInfeasible("baseline tracking QP infeasible") from exc
    s = state.s
    state.s = min(1.0, max(0.0, s + eta * dt))
    ux, uy = z[1], z[2]
    speed = math.hypot(ux, uy)
    if speed > config.u_max:
        ux *= config.u_max / speed
        uy *= config.u_max / speed
        events.append(SATURATED)
    c = config.region.center
    if math.hypot(x[0] - c.x, x[1] - c.y) <= config.region.radius:
        events.append(ARRIVED)
    h_e = budget - consumed - config.cost_per_meter * (L * (1.0 - s) - config.region.effective_radius)
    u = Vec2(ux, uy)
    state.last_u = u
    return ControlOutput(u, eta, CbfSnapshot(h_e, s, h_d), active, tuple(events), x_r, L)


def run(scenario: Scenario, seed: int = 0) -> RunResult:
    """Simulate one scenario with explicit Euler until arrival, timeout or a QP failure."""
    cfg = scenario.controller
    dt = scenario.dt
    uni = scenario.variant == "unicycle"
    ell = cfg.unicycle.params.handle if uni else 0.0
    plant = cfg.unicycle.model if uni else None
    budget = scenario.budget
    station = scenario.station
    radius = cfg.region.radius

    x = scenario.initial_x
    theta = scenario.theta0

    def control_point(x: Vec2, theta: float) -> Vec2:
        if not uni:
            return x
        return Vec2(x.x + ell * math.cos(theta), x.y + ell * math.sin(theta))

    p = control_point(x, theta)
    scripted = sorted(scenario.planner.scripted, key=lambda e: e[0])
    scripted = [(t0, pts) for t0, pts in scripted]
    pts0 = _plan(scenario, seed, 0, 0.0, p, scripted)
    if pts0 is None:
        pts0 = [p, station] if math.dist(p, station) > 1e-6 else [p, Vec2(p.x + 1e-3, p.y)]
    state = initial_state(build_path(pts0), cfg)
    state.frozen = scenario.start_frozen
    if uni:
        state.last_power = power_unicycle(plant, 0.0, 0.0)
    goals = _MissionTracker(_goal_list(scenario.mission, seed), scenario.mission.tolerance, scenario.mission.loop)
    bl = scenario.baseline
    bstate = _BaselineState()

    trace = Trace(budget, station, radius, dt)
    trace.waypoints.append([tuple(w) for w in state.path.waypoints])
    admissions: list[AdmissionLog] = []
    E = scenario.initial_energy
    period_steps = max(1, int(round(cfg.replan_period / dt)))
    n_steps = int(math.floor(scenario.max_time / dt + 1e-9))
    arrival_time = None
    saturation = 0
    distance = 0.0
    infeasible = False

    for k in range(n_steps + 1):
        t = k * dt
        p = control_point(x, theta)
        if math.dist(p, station) <= radius:
            arrival_time = t
            h_e = current_h_e(state, E, budget, cfg)
            trace.append(
                t=t, x=x.x, y=x.y, theta=theta, E=E, h_e=h_e, h_b=state.s, h_d=math.nan, s=state.s,
                L=state.path.total_length, ux=0.0, uy=0.0, v=0.0, omega=0.0, power=0.0,
                xr_x=math.nan, xr_y=math.nan, events=(ARRIVED,),
            )
            break
        if k == n_steps:
            break
        events: list[str] = []
        u_nom = goals.command(p)
        if k > 0 and k % period_steps == 0 and not state.frozen:
            pts = _plan(scenario, seed, k // period_steps, t, p, scripted)
            if pts is not None:
                cand = build_path(pts)
                if bl is None:
                    adm = admit_path(state, cand, p, E, budget, cfg, u_nom)
                    if adm.kind:
                        admissions.append(AdmissionLog(t, adm.kind, adm.h_e_before, adm.h_e_after))
                        events.append(adm.kind)
                else:
                    state.set_path(cand)
                    state.s = 0.0
                    events.append(PATH_ADMITTED)
                if events:
                    trace.waypoints.append([tuple(w) for w in state.path.waypoints])
        try:
            if bl is None:
                out = step(state, p, E, budget, u_nom, dt, cfg)
            else:
                out = baseline_step(state, p, E, budget, u_nom, dt, cfg, bl, bstate)
        except QpInfeasible:
            infeasible = True
            trace.append(
                t=t, x=x.x, y=x.y, theta=theta, E=E, h_e=math.nan, h_b=state.s, h_d=math.nan, s=state.s,
                L=state.path.total_length, ux=0.0, uy=0.0, v=0.0, omega=0.0, power=0.0,
                xr_x=math.nan, xr_y=math.nan, events=tuple(events) + (QP_INFEASIBLE,),
            )
            break
        events.extend(out.events)
        if SATURATED in out.events:
            saturation += 1
        u = out.u
        dp = _disturbance(scenario.disturbance, t)
        if uni:
            v, omega = twoway(*to_unicycle(u, theta, ell))
            power = max(0.0, power_unicycle(plant, v, omega) + dp)
            nx = x.x + v * math.cos(theta) * dt
            ny = x.y + v * math.sin(theta) * dt
            theta_new = theta + omega * dt
        else:
            v, omega = math.hypot(u.x, u.y), 0.0
            power = max(0.0, power_si(cfg.model, v) + dp)
            nx = x.x + u.x * dt
            ny = x.y + u.y * dt
            theta_new = theta
        snap = out.snapshot
        trace.add(
            t, x.x, x.y, theta, E, snap.h_e, snap.h_b, snap.h_d, snap.h_b, out.L, u.x, u.y, v, omega, power,
            out.x_r.x, out.x_r.y, events=events,
        )
        if "frozen" in out.events:
            trace.waypoints.append([tuple(w) for w in state.path.waypoints])
        distance += math.hypot(nx - x.x, ny - x.y)
        x = Vec2(nx, ny)
        theta = theta_new
        E += power * dt
        state.record_power(power, dt, cfg.power_filter)

    m = metrics(trace)
    m = replace(m, saturation_steps=saturation, qp_infeasible=infeasible, distance_traveled=distance)
    if arrival_time is None and m.arrival_time is not None:
        m = replace(m, arrival_time=None, eoa=None)
    return RunResult(trace, m, admissions)


def metrics(trace: Trace) -> Metrics:
    if len(trace) == 0:
        raise EmptyTrace("trace has no records")
    E = trace.column("E")
    he = trace.column("h_e")
    hd = trace.column("h_d")
    arrival_idx = next((k for k, ev in enumerate(trace.events) if ARRIVED in ev and _is_terminal(trace, k)), None)
    eoa = None
    arrival_time = None
    if arrival_idx is not None:
        eoa = float(trace.budget - E[arrival_idx])
        arrival_time = float(trace.cols["t"][arrival_idx])
    xs, ys = trace.column("x"), trace.column("y")
    dist = float(np.sum(np.hypot(np.diff(xs), np.diff(ys)))) if len(xs) > 1 else 0.0
    sat = sum(1 for ev in trace.events if SATURATED in ev)
    infeasible = any(QP_INFEASIBLE in ev for ev in trace.events)
    return Metrics(
        eoa=eoa,
        min_h_e=float(np.nanmin(he)) if np.isfinite(he).any() else math.nan,
        min_h_d=float(np.nanmin(hd)) if np.isfinite(hd).any() else math.nan,
        budget_violated=bool(np.min(trace.budget - E) < 0),
        arrival_time=arrival_time,
        saturation_steps=sat,
        distance_traveled=dist,
        qp_infeasible=infeasible,
        final_energy=float(E[-1]),
    )


def _is_terminal(trace: Trace, k: int) -> bool:
    return k == len(trace) - 1


def spc_events(result: RunResult) -> list[AdmissionLog]:
    return [a for a in result.admissions if a.kind == SPC_USED]


def with_baseline(scenario: Scenario, tau: float) -> Scenario:
    return replace(scenario, baseline=BaselineConfig(tau))


def control_point_of(record: TraceRecord, scenario: Scenario) -> Vec2:
    if scenario.variant != "unicycle":
        return record.x
    ell = scenario.controller.unicycle.params.handle
    return Vec2(record.x.x + ell * math.cos(record.theta), record.x.y + ell * math.sin(record.theta))


def handle_speed_check(record: TraceRecord, scenario: Scenario) -> tuple[float, float]:
    """(v, omega) that to_unicycle followed by twoway gives for the record's command."""
    ell = scenario.controller.unicycle.params.handle
    return twoway(*to_unicycle(record.u, record.theta, ell))


@dataclass(frozen=True)
class CornerResponse:
    past_corner: np.ndarray  # reference arc length beyond the corner, metres (negative before it)
    omega: np.ndarray
    attenuation: float  # distance past the corner within which rotation must decay

    @property
    def max_abs_omega(self) -> float:
        return float(np.max(np.abs(self.omega)))

    def max_abs_omega_after(self, distance: float) -> float:
        tail = np.abs(self.omega[self.past_corner >= distance])
        return float(tail.max()) if tail.size else 0.0


def corner_response(
    psi: float,
    v_r: float,
    handle: float,
    eps_omega: float = 0.01,
    leg: float = 4.0,
    dt: float = 1e-3,
    params: SmoothParams = SmoothParams(),
    tangent: str = "simplified",
) -> CornerResponse:
    """Unicycle whose handle is driven by the velocity of a reference crossing one corner.

    The reference runs at ``v_r`` along a two-leg path turning by ``psi``; the
    handle starts on it with the body aligned to the first leg and receives
    the reference velocity as its command, so any rotation is the corner's.
    The run stops half way along the second leg, clear of the endpoint taper.

    ``tangent="simplified"`` keeps the reference speed at most ``v_r``.  The full
    tangent of the blended path overshoots in both speed and direction just
    after the corner, which raises the peak rotation by roughly ten percent.
    """
    a = Vec2(0.0, 0.0)
    b = Vec2(leg, 0.0)
    c = Vec2(leg + leg * math.cos(psi), leg * math.sin(psi))
    path = build_path([a, b, c])
    L = path.total_length
    eta = v_r / L
    theta = 0.0
    p = smooth_point(path, params, 0.0)
    x = Vec2(p.x - handle, p.y)
    n = int(math.floor(0.75 / (eta * dt)))
    past = np.empty(n)
    omegas = np.empty(n)
    for k in range(n):
        s = k * eta * dt
        tan = smooth_tangent(path, params, s, tangent)
        u = (tan.x * eta, tan.y * eta)
        v, w = twoway(*to_unicycle(u, theta, handle))
        past[k] = s * L - leg
        omegas[k] = w
        x = Vec2(x.x + v * math.cos(theta) * dt, x.y + v * math.sin(theta) * dt)
        theta += w * dt
    return CornerResponse(past, omegas, attenuation_distance(handle, psi, eps_omega))


@dataclass(frozen=True)
class SpeedSettling:
    speed: float  # mean commanded speed over the window
    spread: float  # (max - min) / mean over the window
    saturated_fraction: float
    unstable: bool


def speed_settling(trace: Trace, start: float, u_max: float, rel_tol: float = 0.02) -> SpeedSettling:
    """Judge whether the commanded speed settled below ``u_max`` after time ``start``.

    The run counts as unstable when the window is mostly spent at the speed
    limit or the speed keeps wandering by more than ``rel_tol``.
    """
    t = trace.column("t")
    sp = np.hypot(trace.column("ux"), trace.column("uy"))
    w = sp[t >= start]
    if w.size == 0:
        raise EmptyTrace(f"no records after t={start}")
    mean = float(w.mean())
    spread = float((w.max() - w.min()) / mean) if mean > 0 else math.inf
    sat = float(np.mean(w >= u_max * (1 - 1e-9)))
    return SpeedSettling(mean, spread, sat, sat > 0.5 or spread > rel_tol)
