"""Day-ahead bidding environment for one virtual power plant.

Each episode is a 24-hour trading day. Every step the agent submits one
price-quantity offer for the coming hour: positive quantities are supply
offers, negative ones demand bids. The offer joins the rival stacks in a
uniform-price auction; the cleared position is then delivered by the feeder,
which re-dispatches the portfolio against the cleared exchange and updates
storage. Three variants differ only in the reward and in whether the offer
quantity is projected onto the deliverable interval first:

- unshielded: reward is the market settlement alone, the raw offer goes in.
- shielded: the projection protects the feeder, reward adds dispatch cost.
- safe: as shielded, plus the projection's interference charge.

Undeliverable cleared energy is settled in the books at a 1.2x price premium
(balancing), but never enters any reward: the unshielded learner is supposed
to stay blind to the damage it causes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import dispatch as dispatch_mod
from .dispatch import DispatchError
from .ders import DerFleet, LoadCurves, ResProfiles, sample_availability, step_soe, storage_power_bounds
from .grid import NetworkModel
from .market import Bid, RivalScenario, clear, vpp_market_revenue
from .shield import SafetyShield

HOURS_PER_EPISODE = 24
MIN_BID_KW = 0.5
BALANCING_PREMIUM = 1.2


class Variant(enum.Enum):
    UNSHIELDED = "unshielded"
    SHIELDED = "shielded"
    SAFE = "safe"

    @classmethod
    def from_token(cls, token: str) -> "Variant":
        t = token.strip().lower()
        aliases = {
            "unshielded": cls.UNSHIELDED, "url": cls.UNSHIELDED,
            "shielded": cls.SHIELDED, "shrl": cls.SHIELDED,
            "safe": cls.SAFE, "srl": cls.SAFE,
        }
        if t not in aliases:
            raise ValueError(
                f"unknown variant {token!r}; expected one of "
                f"unshielded/uRL, shielded/shRL, safe/sRL"
            )
        return aliases[t]


class EpisodeAborted(RuntimeError):
    """The cleared position could not be delivered by the feeder."""

    def __init__(self, hour: int, reason: str):
        super().__init__(f"hour {hour}: {reason}")
        self.hour = hour
        self.reason = reason


@dataclass
class _CachedInterval:
    u_min_kw: float
    u_max_kw: float


class BiddingEnv:
    """Gym-like environment: reset(rng) -> state, step(action) -> transition.

    The action lives in the unit square; index 0 scales to the ask price, and
    index 1 to an offer quantity between qty_lo_frac and qty_hi_frac of the
    installed unit capacity. State is the hour fraction, the normalised load
    (active and reactive), per-renewable availability when the forecast is
    observable, and per-storage state of energy.
    """

    def __init__(self, net: NetworkModel, fleet: DerFleet, curves: LoadCurves,
                 profiles: ResProfiles, rivals: RivalScenario,
                 variant: Variant = Variant.SAFE, *,
                 eps_eur_per_kwh: float = 1.0,
                 with_forecast: bool = True,
                 res_noise_frac: float = 0.10,
                 rival_noise: bool = True,
                 price_cap_eur_per_kwh: float = 12.0,
                 qty_lo_frac: float = -0.25,
                 qty_hi_frac: float = 1.05):
        if isinstance(variant, str):
            variant = Variant.from_token(variant)
        self.net = net
        self.fleet = fleet
        self.curves = curves
        self.profiles = profiles
        self.rivals = rivals
        self.variant = variant
        self.shield = SafetyShield(eps_eur_per_kwh=eps_eur_per_kwh)
        self.with_forecast = with_forecast
        self.res_noise_frac = res_noise_frac
        self.rival_noise = rival_noise
        self.price_cap = price_cap_eur_per_kwh
        self.qty_lo_frac = qty_lo_frac
        self.qty_hi_frac = qty_hi_frac
        self.capacity_kw = fleet.installed_capacity_kw

        self._interval_cache: dict[tuple, _CachedInterval] = {}
        self._rng: np.random.Generator | None = None
        self._t = 0
        self._draw = None
        self.soe_kwh: dict[str, float] = {}
        self.books: list[dict] = []

    # -- observation ------------------------------------------------------

    @property
    def state_dim(self) -> int:
        n = 3
        if self.with_forecast:
            n += len(self.fleet.renewables)
        n += len(self.fleet.storages)
        return n

    @property
    def action_dim(self) -> int:
        return 2

    def _state(self) -> np.ndarray:
        draw = self._draw
        nominal = max(self.fleet.nominal_total_kw, 1e-9)
        parts = [
            self._t / (HOURS_PER_EPISODE - 1),
            sum(draw.load_p_kw.values()) / nominal,
            sum(draw.load_q_kvar.values()) / nominal,
        ]
        if self.with_forecast:
            for u in self.fleet.renewables:
                parts.append(draw.res_avail_kw[u.name] / u.s_max_kva)
        for u in self.fleet.storages:
            span = max(u.soe_max_kwh - u.soe_min_kwh, 1e-9)
            parts.append((self.soe_kwh[u.name] - u.soe_min_kwh) / span)
        return np.asarray(parts, dtype=np.float64)

    # -- action mapping ---------------------------------------------------

    def action_for(self, price_eur: float, qty_kw: float) -> np.ndarray:
        """Inverse of the action decoding; handy for baselines and tests."""
        span = self.qty_hi_frac - self.qty_lo_frac
        f_price = price_eur / self.price_cap
        f_qty = (qty_kw / self.capacity_kw - self.qty_lo_frac) / span
        return np.clip(np.array([f_price, f_qty], dtype=np.float64), 0.0, 1.0)

    def decode_action(self, action) -> tuple[float, float]:
        a = np.clip(np.asarray(action, dtype=np.float64), 0.0, 1.0)
        price = float(a[0]) * self.price_cap
        qty = (self.qty_lo_frac
               + float(a[1]) * (self.qty_hi_frac - self.qty_lo_frac)) * self.capacity_kw
        return price, qty

    # -- episode flow -----------------------------------------------------

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self._t = 0
        self.books = []
        self.soe_kwh = {u.name: u.soe_init_kwh for u in self.fleet.storages}
        self._draw = self._sample(0)
        return self._state()

    def _sample(self, hour: int):
        return sample_availability(
            self.fleet, self.curves, self.profiles, hour,
            rng=self._rng if self.res_noise_frac > 0.0 else None,
            res_noise_frac=self.res_noise_frac,
            soe_kwh=dict(self.soe_kwh),
        )

    def _interval(self, draw) -> _CachedInterval:
        key_load = tuple(round(v, 2) for v in sorted(draw.load_p_kw.values()))
        key_res = tuple(round(draw.res_avail_kw[u.name], 2)
                        for u in self.fleet.renewables)
        key_sto = tuple(
            round(b, 1)
            for u in self.fleet.storages
            for b in storage_power_bounds(u, draw.soe_kwh[u.name])
        )
        key = (draw.hour, key_load, key_res, key_sto)
        hit = self._interval_cache.get(key)
        if hit is None:
            try:
                ivl = dispatch_mod.feasible_export_interval(self.net, self.fleet, draw)
            except DispatchError as exc:
                raise EpisodeAborted(draw.hour, str(exc)) from exc
            hit = _CachedInterval(u_min_kw=ivl.u_min_kw, u_max_kw=ivl.u_max_kw)
            self._interval_cache[key] = hit
        return hit

    def current_interval(self) -> tuple[float, float]:
        """Deliverable exchange bounds for the hour about to be bid."""
        if self._draw is None:
            raise RuntimeError("call reset() before current_interval()")
        ivl = self._interval(self._draw)
        return ivl.u_min_kw, ivl.u_max_kw

    def step(self, action):
        if self._rng is None:
            raise RuntimeError("call reset() before step()")
        if self._t >= HOURS_PER_EPISODE:
            raise RuntimeError("episode is over; call reset()")
        hour = self._t
        draw = self._draw
        price, qty_raw = self.decode_action(action)
        interval = self._interval(draw)

        # Projection (physical for the shielded and safe variants).
        if self.variant is Variant.UNSHIELDED:
            u_offer = qty_raw
            c_shd = 0.0
            shield_active = False
        else:
            act = self.shield.apply(qty_raw, interval.u_min_kw, interval.u_max_kw)
            u_offer = act.u_safe_kw
            c_shd = act.cost_eur
            shield_active = act.active

        # Auction.
        rival_bids = self.rivals.bids_for(
            hour, self._rng if self.rival_noise else None, noise=self.rival_noise
        )
        bids = list(rival_bids)
        if abs(u_offer) >= MIN_BID_KW:
            side = "supply" if u_offer > 0 else "demand"
            bids.append(Bid(side, price, abs(u_offer), owner="vpp", name="vpp"))
        outcome = clear(bids)
        r_da = vpp_market_revenue(bids, outcome)
        u_cleared = sum(
            x * (1.0 if b.side == "supply" else -1.0)
            for b, x in zip(bids, outcome.cleared_kw) if b.owner == "vpp"
        )
        mcp_rivals_only = clear(rival_bids).mcp

        # Delivery: the feeder can only honour the deliverable part.
        u_delivered = min(max(u_cleared, interval.u_min_kw), interval.u_max_kw)
        short_kw = abs(u_cleared - u_delivered)
        balancing = BALANCING_PREMIUM * outcome.mcp * short_kw

        redispatch = dispatch_mod.solve_opf(self.net, self.fleet, draw,
                                            p_disp_kw=u_delivered)
        if not redispatch.feasible:
            raise EpisodeAborted(hour, redispatch.reason)
        c_vpp = redispatch.cost_eur

        for u in self.fleet.storages:
            self.soe_kwh[u.name] = step_soe(
                u, self.soe_kwh[u.name], redispatch.p_kw[u.name]
            )

        if self.variant is Variant.UNSHIELDED:
            reward = r_da
        elif self.variant is Variant.SHIELDED:
            reward = r_da - c_vpp
        else:
            reward = r_da - c_vpp - c_shd

        row = {
            "hour": hour,
            "price_bid": price,
            "q_bid_kw": qty_raw,
            "u_offer_kw": u_offer,
            "u_cleared_kw": u_cleared,
            "u_delivered_kw": u_delivered,
            "u_min_kw": interval.u_min_kw,
            "u_max_kw": interval.u_max_kw,
            "mcp": outcome.mcp,
            "mcp_rivals_only": mcp_rivals_only,
            "r_da_eur": r_da,
            "c_vpp_eur": c_vpp,
            "c_shd_eur": c_shd,
            "balancing_eur": balancing,
            "reward_eur": reward,
            "profit_eur": r_da - balancing - c_vpp,
            "shield_active": bool(shield_active),
            "infeasible_bid": bool(short_kw > self.shield.activation_tol_kw),
            "pmc_eur_per_kwh": redispatch.pmc_eur_per_kwh,
        }
        self.books.append(row)

        self._t += 1
        done = self._t >= HOURS_PER_EPISODE
        if not done:
            self._draw = self._sample(self._t)
            state = self._state()
        else:
            state = np.zeros(self.state_dim)
        return state, reward, done, row
