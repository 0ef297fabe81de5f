"""Uniform-price day-ahead auction and the rival bid generator.

Clearing walks the merit order (supply ascending, demand descending) and
matches quantity until the curves cross. The clearing price is then chosen
inside the interval of prices consistent with the outcome: every cleared
supply / unserved demand bounds it from below, every unserved supply /
cleared demand bounds it from above. A partially cleared bid forces its own
price; an exact crossing uses the marginal supply price pulled into the valid
interval; zero trade prices at the midpoint of the bid-ask gap.

Equal-price ties are broken against the strategic participant: rival bids at
the same price clear first, so the modelled VPP never wins volume on a tie.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .io import ConfigError, parse_file, take

_QTY_TOL = 1e-9


@dataclass(frozen=True)
class Bid:
    side: str
    price_eur_per_kwh: float
    quantity_kw: float
    owner: str = "rival"
    name: str = ""

    def __post_init__(self):
        if self.side not in ("supply", "demand"):
            raise ValueError(f"bid side must be 'supply' or 'demand', got {self.side!r}")
        if self.owner not in ("rival", "vpp"):
            raise ValueError(f"bid owner must be 'rival' or 'vpp', got {self.owner!r}")
        if not (self.quantity_kw >= 0.0 and math.isfinite(self.quantity_kw)):
            raise ValueError(f"bid quantity must be finite and >= 0, got {self.quantity_kw}")
        if not math.isfinite(self.price_eur_per_kwh):
            raise ValueError("bid price must be finite")


@dataclass
class MarketOutcome:
    mcp: float
    cleared_kw: list[float]
    total_cleared_kw: float
    dual_lo: float
    dual_hi: float
    marginal_index: int | None


def clear(bids) -> MarketOutcome:
    bids = list(bids)
    cleared = [0.0] * len(bids)

    def rank(i):
        b = bids[i]
        price = b.price_eur_per_kwh
        key_price = price if b.side == "supply" else -price
        return (key_price, 0 if b.owner == "rival" else 1, i)

    supply = sorted((i for i, b in enumerate(bids)
                     if b.side == "supply" and b.quantity_kw > _QTY_TOL), key=rank)
    demand = sorted((i for i, b in enumerate(bids)
                     if b.side == "demand" and b.quantity_kw > _QTY_TOL), key=rank)

    si = di = 0
    while si < len(supply) and di < len(demand):
        s, d = supply[si], demand[di]
        if bids[s].price_eur_per_kwh > bids[d].price_eur_per_kwh:
            break
        take = min(bids[s].quantity_kw - cleared[s], bids[d].quantity_kw - cleared[d])
        cleared[s] += take
        cleared[d] += take
        if cleared[s] >= bids[s].quantity_kw - _QTY_TOL:
            si += 1
        if cleared[d] >= bids[d].quantity_kw - _QTY_TOL:
            di += 1

    total = sum(cleared[i] for i in supply)

    # Price interval consistent with the cleared quantities.
    lo, hi = -math.inf, math.inf
    partial_supply = partial_demand = None
    for i, b in enumerate(bids):
        if b.quantity_kw <= _QTY_TOL:
            continue
        x = cleared[i]
        some = x > _QTY_TOL
        full = x >= b.quantity_kw - _QTY_TOL
        if b.side == "supply":
            if some:
                lo = max(lo, b.price_eur_per_kwh)
            if not full:
                hi = min(hi, b.price_eur_per_kwh)
            if some and not full and partial_supply is None:
                partial_supply = i
        else:
            if some:
                hi = min(hi, b.price_eur_per_kwh)
            if not full:
                lo = max(lo, b.price_eur_per_kwh)
            if some and not full and partial_demand is None:
                partial_demand = i

    marginal = None
    if total <= _QTY_TOL:
        lo_eff = lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0)
        hi_eff = hi if math.isfinite(hi) else lo_eff
        mcp = 0.5 * (lo_eff + hi_eff)
    elif partial_supply is not None:
        marginal = partial_supply
        mcp = bids[partial_supply].price_eur_per_kwh
    elif partial_demand is not None:
        marginal = partial_demand
        mcp = bids[partial_demand].price_eur_per_kwh
    else:
        # Exact crossing: start from the most expensive cleared supply and
        # pull it into the valid interval.
        marginal = max((i for i in supply if cleared[i] > _QTY_TOL),
                       key=lambda i: bids[i].price_eur_per_kwh)
        mcp = min(max(bids[marginal].price_eur_per_kwh, lo), hi)

    return MarketOutcome(
        mcp=float(mcp),
        cleared_kw=cleared,
        total_cleared_kw=float(total),
        dual_lo=lo,
        dual_hi=hi,
        marginal_index=marginal,
    )


def vpp_market_revenue(bids, outcome: MarketOutcome) -> float:
    """Settlement for the strategic participant at the uniform price."""
    rev = 0.0
    for bid, x in zip(bids, outcome.cleared_kw):
        if bid.owner != "vpp":
            continue
        rev += outcome.mcp * x * (1.0 if bid.side == "supply" else -1.0)
    return rev


# ---------------------------------------------------------------------------
# Rival bid generation
# ---------------------------------------------------------------------------

_BLOCK_KEYS = {
    "cheap_kw": True, "cheap_price": True,
    "mid_frac": True, "mid_kw": True,
    "anchor_kw": True,
    "high_frac": True, "high_kw": True,
    "backstop_frac": True, "backstop_floor": True, "backstop_kw": True,
    "d_high_frac": True, "d_high_kw": True,
    "d_mid_frac": True, "d_mid_kw": True,
    "d_bulk_frac": True,
}

_PIN_COLS = ["hour", "backstop_price", "backstop_kw", "anchor_kw", "d_high_kw",
             "d_high_price"]


@dataclass(frozen=True)
class PinSpec:
    backstop_price: float
    backstop_kw: float
    anchor_kw: float
    d_high_kw: float
    d_high_price: float


@dataclass
class RivalScenario:
    """Per-hour rival stacks scaled off an anchor price.

    Unpinned hours are built so the rivals-only intersection lands exactly on
    the anchor: demand priced above the anchor exceeds the cheaper supply but
    not the anchor block. Pinned hours model scarcity instead: thin mid-merit
    supply and a fixed-price backstop that sets the rivals-only price.
    """

    anchors: list[float]
    bulk_kw: list[float]
    blocks: dict
    pins: dict[int, PinSpec] = field(default_factory=dict)
    price_jitter_frac: float = 0.0
    bulk_jitter_frac: float = 0.0

    @property
    def pinned_hours(self):
        return set(self.pins)

    def expected_rival_only_price(self, hour: int) -> float:
        if hour in self.pins:
            return self.pins[hour].backstop_price
        return self.anchors[hour]

    def bids_for(self, hour: int, rng: np.random.Generator | None = None, *,
                 noise: bool = True) -> list[Bid]:
        if not 0 <= hour <= 23:
            raise ValueError(f"hour must be 0..23, got {hour}")
        if noise:
            if rng is None:
                raise ValueError("rng is required when noise is on")
            price_f = 1.0 + self.price_jitter_frac * float(rng.uniform(-1.0, 1.0))
            bulk_f = 1.0 + self.bulk_jitter_frac * float(rng.uniform(-1.0, 1.0))
        else:
            price_f = bulk_f = 1.0
        a = self.anchors[hour] * price_f
        blk = self.blocks
        pin = self.pins.get(hour)

        bids = [
            Bid("supply", blk["cheap_price"], blk["cheap_kw"], name="s_cheap"),
            Bid("supply", blk["mid_frac"] * a, blk["mid_kw"], name="s_mid"),
            Bid("supply", a, pin.anchor_kw if pin else blk["anchor_kw"],
                name="s_anchor"),
        ]
        if pin is None:
            bids.append(Bid("supply", blk["high_frac"] * a, blk["high_kw"],
                            name="s_high"))
            backstop_price = max(blk["backstop_floor"], blk["backstop_frac"] * a)
            bids.append(Bid("supply", backstop_price, blk["backstop_kw"],
                            name="s_backstop"))
            bids.append(Bid("demand", blk["d_high_frac"] * a, blk["d_high_kw"],
                            name="d_high"))
            d_mid_price = blk["d_mid_frac"] * a
        else:
            bids.append(Bid("supply", pin.backstop_price, pin.backstop_kw,
                            name="s_backstop"))
            bids.append(Bid("demand", pin.d_high_price, pin.d_high_kw,
                            name="d_high"))
            # Mid demand values energy at exactly the anchor during scarcity,
            # keeping it below any sensible strategic ask.
            d_mid_price = a
        bids.append(Bid("demand", d_mid_price, blk["d_mid_kw"], name="d_mid"))
        bids.append(Bid("demand", blk["d_bulk_frac"] * a,
                        self.bulk_kw[hour] * bulk_f, name="d_bulk"))
        return bids


def bundled_rivals_path():
    return resources.files("vppsim.data").joinpath("rivals_default.txt")


def load_rival_scenario(path) -> RivalScenario:
    doc = parse_file(path)
    known = {"blocks", "noise", "anchors", "pins"}
    unknown = sorted(set(doc.sections) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {unknown}")
    blocks = take(dict(doc.mapping("blocks")), _BLOCK_KEYS, context=f"{path} [blocks]")
    blocks = {k: float(v) for k, v in blocks.items()}

    noise = {"price_jitter_frac": 0.0, "bulk_jitter_frac": 0.0}
    if "noise" in doc.sections:
        noise.update(take(
            dict(doc.mapping("noise")),
            {"price_jitter_frac": False, "bulk_jitter_frac": False},
            context=f"{path} [noise]",
        ))

    table = doc.table("anchors")
    if table.columns != ["hour", "anchor", "bulk_kw"]:
        raise ConfigError(f"{path} [anchors]: columns must be hour, anchor, bulk_kw")
    if table.column("hour") != list(range(24)):
        raise ConfigError(f"{path} [anchors]: need rows for hours 0..23 in order")
    anchors = [float(v) for v in table.column("anchor")]
    bulk = [float(v) for v in table.column("bulk_kw")]

    pins: dict[int, PinSpec] = {}
    if "pins" in doc.sections:
        ptable = doc.table("pins")
        if ptable.columns != _PIN_COLS:
            raise ConfigError(f"{path} [pins]: columns must be {_PIN_COLS}")
        for row in ptable.rows:
            pins[int(row["hour"])] = PinSpec(
                backstop_price=float(row["backstop_price"]),
                backstop_kw=float(row["backstop_kw"]),
                anchor_kw=float(row["anchor_kw"]),
                d_high_kw=float(row["d_high_kw"]),
                d_high_price=float(row["d_high_price"]),
            )

    return RivalScenario(
        anchors=anchors,
        bulk_kw=bulk,
        blocks=blocks,
        pins=pins,
        price_jitter_frac=float(noise["price_jitter_frac"]),
        bulk_jitter_frac=float(noise["bulk_jitter_frac"]),
    )
