"""Distributed energy resources: capability sets and availability.

Sign convention: p_kw is the unit's net active injection into the network
(generation positive, charging negative). Loads are not decision variables;
they enter dispatch as fixed negative injections taken from the hourly curve.

Capabilities per kind:

- conventional: p_min <= p <= p_max and p^2 + q^2 <= s_max^2
- renewable:    0 <= p <= available, p^2 + q^2 <= s_max^2, and a minimum
                power factor p / sqrt(p^2 + q^2) >= a whenever output is
                nonzero (full curtailment to (0, 0) is always allowed)
- storage:      |p| <= p_max, p^2 + q^2 <= s_max^2, and the post-step state
                of energy soe - p * dt must stay within its band
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .io import ConfigError, parse_file, take

CAPABILITY_TOL_KW = 1e-6


@dataclass(frozen=True)
class ConventionalUnit:
    name: str
    bus: int
    p_min_kw: float
    p_max_kw: float
    s_max_kva: float
    cost_eur_per_kwh: float


@dataclass(frozen=True)
class RenewableUnit:
    name: str
    bus: int
    s_max_kva: float
    min_power_factor: float
    profile: str
    cost_eur_per_kwh: float


@dataclass(frozen=True)
class StorageUnit:
    name: str
    bus: int
    p_max_kw: float
    s_max_kva: float
    soe_min_kwh: float
    soe_max_kwh: float
    soe_init_kwh: float
    cost_eur_per_kwh: float


@dataclass(frozen=True)
class LoadPoint:
    bus: int
    weight: float


@dataclass
class DerFleet:
    name: str
    tariff_eur_per_kwh: float
    load_curve: str
    nominal_total_kw: float
    conventionals: list[ConventionalUnit] = field(default_factory=list)
    renewables: list[RenewableUnit] = field(default_factory=list)
    storages: list[StorageUnit] = field(default_factory=list)
    loads: list[LoadPoint] = field(default_factory=list)

    def units(self):
        """All decision-side units (loads excluded)."""
        return [*self.renewables, *self.storages, *self.conventionals]

    @property
    def installed_capacity_kw(self) -> float:
        return (
            sum(u.p_max_kw for u in self.conventionals)
            + sum(u.s_max_kva for u in self.renewables)
            + sum(u.p_max_kw for u in self.storages)
        )


@dataclass
class LoadCurves:
    power_factor: float
    curves: dict[str, np.ndarray]


@dataclass
class ResProfiles:
    profiles: dict[str, np.ndarray]


@dataclass
class AvailabilityDraw:
    """Realised hourly operating context for dispatch.

    load_p_kw holds consumption magnitudes (positive); dispatch applies the
    sign when building bus injections. soe_kwh is the state of energy each
    storage unit enters the hour with.
    """

    hour: int
    load_p_kw: dict[int, float]
    load_q_kvar: dict[int, float]
    res_avail_kw: dict[str, float]
    soe_kwh: dict[str, float]


def storage_power_bounds(unit: StorageUnit, soe_kwh: float, dt_h: float = 1.0):
    """Feasible active power band given the current state of energy."""
    lo = max(-unit.p_max_kw, (soe_kwh - unit.soe_max_kwh) / dt_h)
    hi = min(unit.p_max_kw, (soe_kwh - unit.soe_min_kwh) / dt_h)
    return lo, hi


def step_soe(unit: StorageUnit, soe_kwh: float, p_kw: float, dt_h: float = 1.0) -> float:
    return soe_kwh - p_kw * dt_h


def capability_violation_kw(unit, p_kw: float, q_kvar: float, *,
                            res_avail_kw: float | None = None,
                            soe_kwh: float | None = None,
                            dt_h: float = 1.0) -> float:
    """Largest constraint violation of an operating point, 0 when feasible.

    Bound and rating violations are in kW/kVA; the power-factor cone is
    measured as the active-power shortfall a * s - p, which is on the same
    scale.
    """
    s = math.hypot(p_kw, q_kvar)
    worst = 0.0
    if isinstance(unit, ConventionalUnit):
        worst = max(worst, unit.p_min_kw - p_kw, p_kw - unit.p_max_kw,
                    s - unit.s_max_kva)
    elif isinstance(unit, RenewableUnit):
        if res_avail_kw is None:
            raise ValueError(f"renewable {unit.name}: res_avail_kw is required")
        worst = max(worst, -p_kw, p_kw - res_avail_kw, s - unit.s_max_kva)
        if s > CAPABILITY_TOL_KW:
            worst = max(worst, unit.min_power_factor * s - p_kw)
    elif isinstance(unit, StorageUnit):
        if soe_kwh is None:
            raise ValueError(f"storage {unit.name}: soe_kwh is required")
        lo, hi = storage_power_bounds(unit, soe_kwh, dt_h)
        worst = max(worst, lo - p_kw, p_kw - hi, s - unit.s_max_kva)
    else:
        raise TypeError(f"not a dispatchable unit: {unit!r}")
    return max(0.0, worst)


def capability_contains(unit, p_kw: float, q_kvar: float, *,
                        res_avail_kw: float | None = None,
                        soe_kwh: float | None = None,
                        dt_h: float = 1.0,
                        tol_kw: float = CAPABILITY_TOL_KW) -> bool:
    return capability_violation_kw(
        unit, p_kw, q_kvar, res_avail_kw=res_avail_kw, soe_kwh=soe_kwh, dt_h=dt_h
    ) <= tol_kw


def sample_availability(fleet: DerFleet, curves: LoadCurves, profiles: ResProfiles,
                        hour: int, rng: np.random.Generator | None = None, *,
                        res_noise_frac: float = 0.10,
                        soe_kwh: dict[str, float] | None = None) -> AvailabilityDraw:
    """Draw the operating context for one hour.

    Loads follow their curve exactly (retail demand is treated as firm);
    renewable availability gets a bounded multiplicative wobble around its
    profile. Pass res_noise_frac=0 for fully deterministic draws.
    """
    if not 0 <= hour <= 23:
        raise ValueError(f"hour must be 0..23, got {hour}")
    if fleet.load_curve not in curves.curves:
        raise ConfigError(f"fleet {fleet.name}: unknown load curve {fleet.load_curve!r}")
    frac = float(curves.curves[fleet.load_curve][hour])
    tan_phi = math.tan(math.acos(curves.power_factor))
    load_p = {lp.bus: lp.weight * fleet.nominal_total_kw * frac for lp in fleet.loads}
    load_q = {bus: p * tan_phi for bus, p in load_p.items()}

    res_avail = {}
    for unit in fleet.renewables:
        if unit.profile not in profiles.profiles:
            raise ConfigError(f"renewable {unit.name}: unknown profile {unit.profile!r}")
        base = float(profiles.profiles[unit.profile][hour]) * unit.s_max_kva
        if res_noise_frac > 0.0:
            if rng is None:
                raise ValueError("rng is required when res_noise_frac > 0")
            base *= 1.0 + res_noise_frac * float(rng.uniform(-1.0, 1.0))
        res_avail[unit.name] = max(0.0, base)

    soe = dict(soe_kwh) if soe_kwh is not None else {
        u.name: u.soe_init_kwh for u in fleet.storages
    }
    return AvailabilityDraw(hour=hour, load_p_kw=load_p, load_q_kvar=load_q,
                            res_avail_kw=res_avail, soe_kwh=soe)


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

_CONV_COLS = ["name", "bus", "p_min_kw", "p_max_kw", "s_max_kva", "cost_eur_per_kwh"]
_RES_COLS = ["name", "bus", "s_max_kva", "min_power_factor", "profile", "cost_eur_per_kwh"]
_STOR_COLS = ["name", "bus", "p_max_kw", "s_max_kva", "soe_min_kwh", "soe_max_kwh",
              "soe_init_kwh", "cost_eur_per_kwh"]


def _rows(doc, section, expected_cols, path):
    if section not in doc.sections:
        return []
    table = doc.table(section)
    if table.columns != expected_cols:
        raise ConfigError(f"{path} [{section}]: columns must be {expected_cols}")
    return table.rows


def load_fleet(path, name: str | None = None) -> DerFleet:
    doc = parse_file(path)
    take(
        doc.scalars,
        {"tariff_eur_per_kwh": True, "load_curve": True, "nominal_total_kw": True},
        context=f"{path} top level",
    )
    known = {"conventional", "renewable", "storage", "loads"}
    unknown = sorted(set(doc.sections) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {unknown}")

    fleet = DerFleet(
        name=name or str(path),
        tariff_eur_per_kwh=float(doc.scalars["tariff_eur_per_kwh"]),
        load_curve=str(doc.scalars["load_curve"]),
        nominal_total_kw=float(doc.scalars["nominal_total_kw"]),
    )
    for row in _rows(doc, "conventional", _CONV_COLS, path):
        fleet.conventionals.append(ConventionalUnit(
            name=str(row["name"]), bus=int(row["bus"]),
            p_min_kw=float(row["p_min_kw"]), p_max_kw=float(row["p_max_kw"]),
            s_max_kva=float(row["s_max_kva"]),
            cost_eur_per_kwh=float(row["cost_eur_per_kwh"]),
        ))
    for row in _rows(doc, "renewable", _RES_COLS, path):
        fleet.renewables.append(RenewableUnit(
            name=str(row["name"]), bus=int(row["bus"]),
            s_max_kva=float(row["s_max_kva"]),
            min_power_factor=float(row["min_power_factor"]),
            profile=str(row["profile"]),
            cost_eur_per_kwh=float(row["cost_eur_per_kwh"]),
        ))
    for row in _rows(doc, "storage", _STOR_COLS, path):
        unit = StorageUnit(
            name=str(row["name"]), bus=int(row["bus"]),
            p_max_kw=float(row["p_max_kw"]), s_max_kva=float(row["s_max_kva"]),
            soe_min_kwh=float(row["soe_min_kwh"]), soe_max_kwh=float(row["soe_max_kwh"]),
            soe_init_kwh=float(row["soe_init_kwh"]),
            cost_eur_per_kwh=float(row["cost_eur_per_kwh"]),
        )
        if not unit.soe_min_kwh <= unit.soe_init_kwh <= unit.soe_max_kwh:
            raise ConfigError(f"{path}: storage {unit.name} initial soe outside its band")
        fleet.storages.append(unit)
    for row in _rows(doc, "loads", ["bus", "weight"], path):
        fleet.loads.append(LoadPoint(bus=int(row["bus"]), weight=float(row["weight"])))

    names = [u.name for u in fleet.units()]
    if len(names) != len(set(names)):
        raise ConfigError(f"{path}: duplicate unit names {names}")
    return fleet


BUNDLED_FLEETS = ("basecase", "renew1", "renew2", "bat1")


def bundled_fleet(name: str) -> DerFleet:
    if name not in BUNDLED_FLEETS:
        raise ConfigError(f"unknown bundled fleet {name!r}; have {BUNDLED_FLEETS}")
    path = resources.files("vppsim.data").joinpath(f"ders_{name}.txt")
    return load_fleet(path, name=name)


def load_load_curves(path) -> LoadCurves:
    doc = parse_file(path)
    take(doc.scalars, {"power_factor": True}, context=f"{path} top level")
    table = doc.table("curves")
    if table.columns[0] != "hour":
        raise ConfigError(f"{path} [curves]: first column must be 'hour'")
    hours = table.column("hour")
    if hours != list(range(24)):
        raise ConfigError(f"{path} [curves]: need rows for hours 0..23 in order")
    curves = {
        col: np.array([float(v) for v in table.column(col)])
        for col in table.columns[1:]
    }
    return LoadCurves(power_factor=float(doc.scalars["power_factor"]), curves=curves)


def load_res_profiles(path) -> ResProfiles:
    doc = parse_file(path)
    table = doc.table("profiles")
    if table.columns[0] != "hour" or table.column("hour") != list(range(24)):
        raise ConfigError(f"{path} [profiles]: need an 'hour' column covering 0..23")
    profiles = {
        col: np.array([float(v) for v in table.column(col)])
        for col in table.columns[1:]
    }
    return ResProfiles(profiles=profiles)


def bundled_load_curves() -> LoadCurves:
    return load_load_curves(resources.files("vppsim.data").joinpath("load_curves.txt"))


def bundled_res_profiles() -> ResProfiles:
    return load_res_profiles(resources.files("vppsim.data").joinpath("res_profiles.txt"))
