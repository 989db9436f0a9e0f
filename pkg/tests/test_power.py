import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from energy_suff.errors import NegativeSpeed, NonPositiveReturnSpeed, NoRealRoot
from energy_suff.power import (
    Disturbance,
    ParabolicPower,
    UnicyclePower,
    converged_speed,
    max_return_speed,
    power_si,
    power_unicycle,
    rotation_excess,
    stability_margin,
)

from . import oracles

FITTED = ParabolicPower()


def test_fitted_coefficients():
    assert (FITTED.m0, FITTED.m1, FITTED.m2) == (1.234, 31.4578, 27.8126)
    u = UnicyclePower()
    assert (u.mu1p, u.mu2p) == (179.9095, -107.7343)


def test_standstill_power():
    assert power_si(FITTED, 0.0) == 1.234


def test_polynomial_value():
    assert power_si(FITTED, 0.2) == pytest.approx(8.638064, abs=1e-12)
    assert power_si(FITTED, 0.2) == pytest.approx(8.63806, abs=5e-6)


def test_payload_adds_constant():
    assert power_si(ParabolicPower(payload=20.0), 0.0) == pytest.approx(21.234)


def test_negative_speed_rejected():
    with pytest.raises(NegativeSpeed):
        power_si(FITTED, -0.1)


def test_unicycle_power_values():
    u = UnicyclePower()
    assert power_unicycle(u, 0.0, 0.0) == 1.234
    assert power_unicycle(u, 0.0, 0.5) == pytest.approx(1.234 + 179.9095 * 0.5 - 107.7343 * 0.25)
    assert power_unicycle(u, 0.0, 0.5) == pytest.approx(64.255, abs=5e-4)
    # raw value is -69.88 W, outside the fitted range
    assert power_unicycle(u, 0.0, 2.0) == 0.0
    assert power_unicycle(u, 0.3, -0.2) == power_unicycle(u, -0.3, 0.2)


def test_linear_slice_agrees_on_straight_motion():
    u = UnicyclePower(payload=20.0)
    for v in (0.0, 0.3, 1.2):
        assert power_unicycle(u, v, 0.0) == pytest.approx(power_si(u.linear_slice(), v))


def test_converged_roots_without_disturbance():
    lo, hi = converged_speed(FITTED, 0.1)
    assert lo == pytest.approx(0.1, abs=1e-14)
    assert hi == pytest.approx(1.234 / (27.8126 * 0.1), rel=1e-12)
    assert hi == pytest.approx(0.44368, abs=1e-5)


def test_double_root_at_critical_speed():
    v = max_return_speed(FITTED)
    lo, hi = converged_speed(FITTED, v)
    assert lo == pytest.approx(v, rel=1e-7) and hi == pytest.approx(v, rel=1e-7)


def test_large_disturbance_has_no_root():
    with pytest.raises(NoRealRoot):
        converged_speed(FITTED, 0.1, Disturbance(1.0))


def test_roots_match_companion_matrix():
    for m in (FITTED, ParabolicPower(payload=20.0), ParabolicPower(3.0, 10.0, 5.0, 1.0)):
        for v_r in (0.05, 0.1, 0.3, 0.8):
            for frac in (0.0, 0.5, 0.9):
                dp = frac * stability_margin(m, v_r)
                ref = oracles.converged_roots(m.base, m.m1, m.m2, v_r, dp)
                assert np.allclose(converged_speed(m, v_r, Disturbance(dp)), ref, rtol=1e-9)


def test_disturbed_root_frozen():
    # companion-matrix oracle, frozen
    assert converged_speed(FITTED, 0.1, Disturbance(0.5))[0] == pytest.approx(0.16436085509, rel=1e-9)


def test_max_return_speed():
    assert max_return_speed(ParabolicPower(1.0, 1.0, 1.0)) == 1.0
    assert max_return_speed(ParabolicPower(4.0, 1.0, 1.0)) == 2.0
    assert max_return_speed(FITTED) == pytest.approx(0.21064, abs=1e-5)
    assert max_return_speed(ParabolicPower(payload=20.0)) == pytest.approx(math.sqrt(21.234 / 27.8126))


def test_stability_margin_values():
    assert stability_margin(FITTED, max_return_speed(FITTED)) == pytest.approx(0.0, abs=1e-12)
    assert stability_margin(FITTED, 0.1) == pytest.approx(((1.234 - 0.278126) / (0.2 * math.sqrt(27.8126))) ** 2)
    assert stability_margin(FITTED, 0.1) == pytest.approx(0.8213, abs=1e-4)
    with pytest.raises(NonPositiveReturnSpeed):
        stability_margin(FITTED, 0.0)


@given(
    st.floats(0.1, 30.0), st.floats(0.1, 50.0), st.floats(0.1, 50.0), st.floats(0.0, 30.0), st.floats(0.01, 2.0)
)
def test_margin_separates_real_and_complex_roots(m0, m1, m2, payload, v_r):
    m = ParabolicPower(m0, m1, m2, payload)
    star = stability_margin(m, v_r)
    if star < 1e-9:
        return
    assert len(converged_speed(m, v_r, Disturbance(0.99 * star))) == 2
    with pytest.raises(NoRealRoot):
        converged_speed(m, v_r, Disturbance(1.01 * star))


def test_rotation_excess_covers_vertex():
    u = UnicyclePower()
    vertex = 179.9095 / (2 * 107.7343)
    dense = max(power_unicycle(u, 0.0, w) for w in np.linspace(0.0, 2.0, 20001)) - 1.234
    assert rotation_excess(u, 2.0) == pytest.approx(dense, abs=1e-6)
    assert rotation_excess(u, 2.0) == pytest.approx(power_unicycle(u, 0.0, vertex) - 1.234)
    assert rotation_excess(u, 0.3) == pytest.approx(power_unicycle(u, 0.0, 0.3) - 1.234)
    assert rotation_excess(u, 0.0) == 0.0
