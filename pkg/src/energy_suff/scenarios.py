"""Ready-made scenarios used by the test suite and shipped as JSON examples."""

from __future__ import annotations

from .cbf import CbfGains, ChargingRegion
from .controller import ControllerConfig, UnicycleSettings
from .power import PAYLOAD_W, ParabolicPower, UnicyclePower, power_si
from .sim import Bounds, Mission, Planner, Scenario
from .unicycle import UnicycleParams


def straight_return(v_r: float, delta_p: float = 0.0, length: float = 100.0, u_max: float | None = None) -> Scenario:
    """Robot at the far end of a frozen straight path with just enough energy to come home.

    The mission pulls away from the station, so the energy barrier alone
    decides the motion and the speed settles where power balances the reserve.
    """
    model = ParabolicPower()
    region = ChargingRegion((0.0, 0.0), 1.0, 0.3)
    gains = CbfGains()
    if u_max is None:
        u_max = max(1.0, v_r + 0.5 * gains.gamma_d * region.tracking_radius + 0.15)
    cfg = ControllerConfig(v_r=v_r, gains=gains, region=region, model=model, u_max=u_max)
    budget = power_si(model, v_r) / v_r * (length - region.effective_radius)
    return Scenario(
        initial_x=(length, 0.0), station=(0.0, 0.0), budget=budget, controller=cfg,
        mission=Mission(goals=((length + 50.0, 0.0, 1.0),)), disturbance=((0.0, delta_p),),
        dt=1e-3, max_time=60.0, start_frozen=True,
    )


def random_replanning() -> Scenario:
    """Single integrator touring random goals while a seeded planner replans every 5 s."""
    cfg = ControllerConfig(
        v_r=0.6, gains=CbfGains(1.0, 1.0, 5.0), region=ChargingRegion((0.0, 0.0), 1.0, 0.3),
        model=ParabolicPower(payload=PAYLOAD_W), u_max=1.5, replan_period=5.0,
    )
    return Scenario(
        initial_x=(3.0, 3.0), station=(0.0, 0.0), budget=5000.0, controller=cfg,
        mission=Mission(random_goals=8, goal_bounds=Bounds(5, 5, 25, 25), goal_speed=1.0),
        planner=Planner(kind="random", bounds=Bounds(-5, -5, 30, 30), n_range=(2, 5)),
        dt=1e-3, max_time=300.0,
    )


def long_outbound() -> Scenario:
    """Mission heading straight away from the station for longer than the budget allows."""
    cfg = ControllerConfig(
        v_r=0.6, gains=CbfGains(), region=ChargingRegion((0.0, 0.0), 1.0, 0.3),
        model=ParabolicPower(payload=PAYLOAD_W), u_max=1.5,
    )
    return Scenario(
        initial_x=(2.0, 0.0), station=(0.0, 0.0), budget=5000.0, controller=cfg,
        mission=Mission(goals=((300.0, 0.0, 1.0),)), dt=1e-3, max_time=400.0,
    )


def unicycle_tour(slowing: bool = True) -> Scenario:
    """Unicycle with a front handle on a replanned multi-corner tour.

    The slow return speed keeps the robot below the upper converged-speed
    root, and the low-pass on measured power damps the loop between
    rotation power and the energy row.
    """
    plant = UnicyclePower(payload=PAYLOAD_W)
    cfg = ControllerConfig(
        v_r=0.25, gains=CbfGains(1.0, 1.0, 5.0), region=ChargingRegion((0.0, 0.0), 1.0, 0.3),
        model=plant.linear_slice(), u_max=1.5, energy_margin=2e-3, power_filter=0.02,
        unicycle=UnicycleSettings(UnicycleParams(handle=0.2), plant, slowing),
    )
    return Scenario(
        initial_x=(3.0, 3.0), station=(0.0, 0.0), budget=5000.0, controller=cfg, variant="unicycle", theta0=0.7,
        mission=Mission(random_goals=8, goal_bounds=Bounds(4, 4, 15, 15), goal_speed=0.2),
        planner=Planner(kind="random", bounds=Bounds(-5, -5, 20, 20), n_range=(3, 5)),
        dt=1e-3, max_time=300.0,
    )


EXAMPLES = {
    "random_replanning": random_replanning,
    "long_outbound": long_outbound,
    "unicycle_tour": unicycle_tour,
}
