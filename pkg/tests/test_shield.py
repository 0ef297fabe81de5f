"""Safety shield tests.

The shield is a one-dimensional Euclidean projection, so its oracle is the
definition itself: the projected point must lie inside the interval, must be
the closest such point to the request, and leaving an already-safe request
untouched must cost nothing.
"""

import numpy as np
import pytest

from vppsim.shield import SafetyShield, project_to_interval


def test_projection_frozen_example():
    # Deep import request against a -200 kW floor: clipped by 300 kW, and
    # with a unit penalty rate the shield charge equals the clipped energy.
    shield = SafetyShield(eps_eur_per_kwh=1.0)
    act = shield.apply(u_bid_kw=-500.0, u_min_kw=-200.0, u_max_kw=900.0)
    assert act.u_safe_kw == -200.0
    assert act.delta_kw == 300.0
    assert act.cost_eur == 300.0
    assert act.active


def test_noop_inside_interval():
    shield = SafetyShield(eps_eur_per_kwh=1.0)
    act = shield.apply(u_bid_kw=120.0, u_min_kw=-200.0, u_max_kw=900.0)
    assert act.u_safe_kw == 120.0
    assert act.delta_kw == 0.0
    assert act.cost_eur == 0.0
    assert not act.active


def test_cost_scales_with_eps():
    lo, hi = -50.0, 400.0
    act1 = SafetyShield(eps_eur_per_kwh=0.5).apply(450.0, lo, hi)
    act2 = SafetyShield(eps_eur_per_kwh=2.0).apply(450.0, lo, hi)
    assert act1.u_safe_kw == act2.u_safe_kw == 400.0
    assert act1.cost_eur == pytest.approx(25.0)
    assert act2.cost_eur == pytest.approx(100.0)


def test_activation_needs_more_than_tolerance():
    shield = SafetyShield(eps_eur_per_kwh=1.0, activation_tol_kw=1.0)
    barely = shield.apply(400.8, -50.0, 400.0)
    assert not barely.active  # 0.8 kW of trimming is measurement noise
    assert barely.cost_eur == pytest.approx(0.8)
    clearly = shield.apply(402.0, -50.0, 400.0)
    assert clearly.active


def test_projection_properties_random():
    rng = np.random.default_rng(3)
    shield = SafetyShield(eps_eur_per_kwh=1.3)
    for _ in range(500):
        lo = float(rng.uniform(-1000.0, 500.0))
        hi = lo + float(rng.uniform(0.0, 2000.0))
        u = float(rng.uniform(-2500.0, 2500.0))
        act = shield.apply(u, lo, hi)
        # Containment.
        assert lo <= act.u_safe_kw <= hi
        # Idempotence.
        again = shield.apply(act.u_safe_kw, lo, hi)
        assert again.u_safe_kw == act.u_safe_kw
        assert again.cost_eur == 0.0
        # Minimality: no interval point is closer to the request.
        for v in np.linspace(lo, hi, 7):
            assert abs(u - act.u_safe_kw) <= abs(u - float(v)) + 1e-9
        assert act.cost_eur == pytest.approx(1.3 * act.delta_kw)


def test_invalid_interval_rejected():
    with pytest.raises(ValueError):
        SafetyShield(eps_eur_per_kwh=1.0).apply(0.0, u_min_kw=10.0, u_max_kw=-10.0)
    with pytest.raises(ValueError):
        SafetyShield(eps_eur_per_kwh=-0.1)


def test_bare_projection_helper():
    assert project_to_interval(5.0, -1.0, 2.0) == 2.0
    assert project_to_interval(-5.0, -1.0, 2.0) == -1.0
    assert project_to_interval(0.5, -1.0, 2.0) == 0.5
