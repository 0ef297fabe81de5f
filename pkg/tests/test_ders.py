"""DER capability sets, storage accounting, and availability sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vppsim.ders import (
    ConventionalUnit,
    RenewableUnit,
    StorageUnit,
    bundled_fleet,
    bundled_load_curves,
    bundled_res_profiles,
    capability_contains,
    capability_violation_kw,
    load_fleet,
    sample_availability,
    step_soe,
    storage_power_bounds,
)
from vppsim.io import ConfigError

CONV = ConventionalUnit(name="g", bus=4, p_min_kw=100.0, p_max_kw=500.0,
                        s_max_kva=520.0, cost_eur_per_kwh=4.0)
RES = RenewableUnit(name="r", bus=8, s_max_kva=950.0, min_power_factor=0.9,
                    profile="hybrid", cost_eur_per_kwh=0.0)
BATT = StorageUnit(name="b", bus=1, p_max_kw=500.0, s_max_kva=500.0,
                   soe_min_kwh=0.0, soe_max_kwh=4800.0, soe_init_kwh=2400.0,
                   cost_eur_per_kwh=0.0)


class TestConventional:
    def test_inside(self):
        assert capability_contains(CONV, 300.0, 100.0)

    def test_active_bounds(self):
        assert not capability_contains(CONV, 99.0, 0.0)
        assert not capability_contains(CONV, 501.0, 0.0)
        assert capability_contains(CONV, 100.0, 0.0)
        assert capability_contains(CONV, 500.0, 0.0)

    def test_apparent_power_circle(self):
        # 500^2 + q^2 <= 520^2  ->  |q| <= 142.8
        assert capability_contains(CONV, 500.0, 142.0)
        assert not capability_contains(CONV, 500.0, 150.0)
        assert capability_contains(CONV, 500.0, -142.0)

    def test_violation_magnitude(self):
        assert capability_violation_kw(CONV, 520.0, 0.0) == pytest.approx(20.0)
        assert capability_violation_kw(CONV, 300.0, 0.0) == 0.0


class TestRenewable:
    def test_zero_is_always_allowed(self):
        assert capability_contains(RES, 0.0, 0.0, res_avail_kw=0.0)
        assert capability_contains(RES, 0.0, 0.0, res_avail_kw=500.0)

    def test_curtailment_below_availability(self):
        assert capability_contains(RES, 200.0, 0.0, res_avail_kw=400.0)
        assert not capability_contains(RES, 401.0, 0.0, res_avail_kw=400.0)
        assert not capability_contains(RES, -5.0, 0.0, res_avail_kw=400.0)

    def test_power_factor_cone_boundary(self):
        # At the cone boundary p = a * s: take s = 400, p = 360,
        # |q| = s * sqrt(1 - a^2) = 174.356...
        a = RES.min_power_factor
        s = 400.0
        p = a * s
        q = s * math.sqrt(1.0 - a * a)
        assert capability_contains(RES, p, q - 1e-9, res_avail_kw=900.0)
        assert not capability_contains(RES, p, q + 1e-3, res_avail_kw=900.0)
        # Lagging or leading both count against the cone.
        assert capability_contains(RES, p, -(q - 1e-9), res_avail_kw=900.0)

    def test_rating_circle(self):
        assert not capability_contains(RES, 940.0, 200.0, res_avail_kw=950.0)


class TestStorage:
    def test_bounds_follow_energy_headroom(self):
        # Full battery cannot charge, empty cannot discharge.
        lo, hi = storage_power_bounds(BATT, soe_kwh=4800.0)
        assert lo == pytest.approx(0.0)
        assert hi == pytest.approx(500.0)
        lo, hi = storage_power_bounds(BATT, soe_kwh=0.0)
        assert lo == pytest.approx(-500.0)
        assert hi == pytest.approx(0.0)
        # Nearly full: remaining headroom caps the charge rate.
        lo, hi = storage_power_bounds(BATT, soe_kwh=4650.0)
        assert lo == pytest.approx(-150.0)
        assert hi == pytest.approx(500.0)

    def test_capability_uses_soe(self):
        assert capability_contains(BATT, -400.0, 0.0, soe_kwh=2400.0)
        assert not capability_contains(BATT, -400.0, 0.0, soe_kwh=4700.0)
        assert not capability_contains(BATT, 90.0, 0.0, soe_kwh=50.0)

    def test_step_soe(self):
        assert step_soe(BATT, 2400.0, 300.0) == pytest.approx(2100.0)
        assert step_soe(BATT, 2400.0, -300.0) == pytest.approx(2700.0)

    @given(
        soe=st.floats(min_value=0.0, max_value=4800.0),
        frac=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_any_power_within_bounds_keeps_soe_in_range(self, soe, frac):
        lo, hi = storage_power_bounds(BATT, soe_kwh=soe)
        p = lo + frac * (hi - lo)
        after = step_soe(BATT, soe, p)
        assert BATT.soe_min_kwh - 1e-6 <= after <= BATT.soe_max_kwh + 1e-6


class TestFleetLoading:
    def test_basecase(self):
        fleet = bundled_fleet("basecase")
        assert [u.name for u in fleet.conventionals] == ["g4", "g7", "g8"]
        assert not fleet.renewables and not fleet.storages
        assert fleet.tariff_eur_per_kwh == 0.5
        assert fleet.installed_capacity_kw == pytest.approx(1950.0)
        assert sum(lp.weight for lp in fleet.loads) == pytest.approx(1.0)

    def test_variants(self):
        assert bundled_fleet("renew1").installed_capacity_kw == pytest.approx(1950.0)
        assert bundled_fleet("renew2").installed_capacity_kw == pytest.approx(1950.0)
        assert bundled_fleet("bat1").installed_capacity_kw == pytest.approx(2450.0)
        assert len(bundled_fleet("renew2").renewables) == 3
        assert bundled_fleet("bat1").storages[0].soe_init_kwh == 2400.0

    def test_unknown_bundled_name(self):
        with pytest.raises(ConfigError):
            bundled_fleet("gigawatt")

    def test_unknown_key_rejected(self, tmp_path):
        f = tmp_path / "ders.txt"
        f.write_text(
            "tariff_eur_per_kwh = 0.5\nload_curve = main\nnominal_total_kw = 100\n"
            "efficiency = 0.9\n"
            "[loads]\nbus weight\n2 1.0\n"
        )
        with pytest.raises(ConfigError):
            load_fleet(f)


class TestAvailability:
    def test_deterministic_per_seed(self):
        fleet = bundled_fleet("renew1")
        curves = bundled_load_curves()
        profiles = bundled_res_profiles()
        a = sample_availability(fleet, curves, profiles, hour=9,
                                rng=np.random.default_rng(42))
        b = sample_availability(fleet, curves, profiles, hour=9,
                                rng=np.random.default_rng(42))
        assert a.res_avail_kw == b.res_avail_kw
        assert a.load_p_kw == b.load_p_kw

    def test_load_follows_curve_exactly(self):
        fleet = bundled_fleet("basecase")
        curves = bundled_load_curves()
        profiles = bundled_res_profiles()
        draw = sample_availability(fleet, curves, profiles, hour=19,
                                   rng=np.random.default_rng(0))
        frac = curves.curves["main"][19]
        total = sum(draw.load_p_kw.values())
        assert total == pytest.approx(fleet.nominal_total_kw * frac)
        # Reactive demand follows the configured power factor.
        pf = curves.power_factor
        tan_phi = math.tan(math.acos(pf))
        for bus, p in draw.load_p_kw.items():
            assert draw.load_q_kvar[bus] == pytest.approx(p * tan_phi)

    def test_res_noise_is_bounded_and_nonnegative(self):
        fleet = bundled_fleet("renew2")
        curves = bundled_load_curves()
        profiles = bundled_res_profiles()
        rng = np.random.default_rng(7)
        frac = 0.10
        for hour in range(24):
            draw = sample_availability(fleet, curves, profiles, hour=hour, rng=rng,
                                       res_noise_frac=frac)
            for unit in fleet.renewables:
                base = profiles.profiles["hybrid"][hour] * unit.s_max_kva
                avail = draw.res_avail_kw[unit.name]
                assert 0.0 <= avail <= base * (1 + frac) + 1e-9
                assert avail >= base * (1 - frac) - 1e-9

    def test_noise_off_equals_profile(self):
        fleet = bundled_fleet("renew1")
        curves = bundled_load_curves()
        profiles = bundled_res_profiles()
        draw = sample_availability(fleet, curves, profiles, hour=12,
                                   rng=np.random.default_rng(1), res_noise_frac=0.0)
        assert draw.res_avail_kw["r8"] == pytest.approx(0.62 * 950.0)
