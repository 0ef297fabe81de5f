"""Uniform-price auction tests.

The randomised cases are checked against an independent oracle: welfare
maximisation as a tiny LP, solved by enumerating basic feasible solutions.
With one balance equality, every vertex of the feasible polytope has at most
one variable strictly between its bounds, so trying every (free variable,
bound pattern) combination is exhaustive for the instance sizes used here.
"""

import itertools

import numpy as np
import pytest

from vppsim.io import ConfigError
from vppsim.market import (
    Bid,
    MarketOutcome,
    bundled_rivals_path,
    clear,
    load_rival_scenario,
    vpp_market_revenue,
)

EPS = 1e-9


def lp_oracle_welfare(bids):
    """Max total welfare by brute-force vertex enumeration."""
    n = len(bids)
    sign = np.array([1.0 if b.side == "supply" else -1.0 for b in bids])
    value = np.array([
        -b.price_eur_per_kwh if b.side == "supply" else b.price_eur_per_kwh
        for b in bids
    ])
    qty = np.array([b.quantity_kw for b in bids])
    best = 0.0  # the empty trade is always feasible
    for free in [None, *range(n)]:
        fixed = [i for i in range(n) if i != free]
        for pattern in itertools.product((0.0, 1.0), repeat=len(fixed)):
            x = np.zeros(n)
            for i, at_upper in zip(fixed, pattern):
                x[i] = qty[i] * at_upper
            if free is not None:
                # balance: sign . x = 0  ->  solve for the free variable
                rest = float(np.dot(sign, x) - sign[free] * x[free])
                val = -rest / sign[free]
                if not (-EPS <= val <= qty[free] + EPS):
                    continue
                x[free] = min(max(val, 0.0), qty[free])
            if abs(float(np.dot(sign, x))) > 1e-6:
                continue
            best = max(best, float(np.dot(value, x)))
    return best


def assert_complementary_slackness(bids, outcome, tol=1e-6):
    """Every (cleared, mcp) pair must be a competitive equilibrium."""
    mcp = outcome.mcp
    balance = 0.0
    for bid, x in zip(bids, outcome.cleared_kw):
        assert -tol <= x <= bid.quantity_kw + tol, f"cleared {x} outside [0, {bid.quantity_kw}]"
        if bid.side == "supply":
            balance += x
            if x > tol:
                assert bid.price_eur_per_kwh <= mcp + tol, (
                    f"supply at {bid.price_eur_per_kwh} cleared above mcp {mcp}"
                )
            if x < bid.quantity_kw - tol:
                assert bid.price_eur_per_kwh >= mcp - tol, (
                    f"supply at {bid.price_eur_per_kwh} left money on the table at mcp {mcp}"
                )
        else:
            balance -= x
            if x > tol:
                assert bid.price_eur_per_kwh >= mcp - tol
            if x < bid.quantity_kw - tol:
                assert bid.price_eur_per_kwh <= mcp + tol
    assert abs(balance) <= tol, f"supply/demand imbalance {balance}"


def cleared_welfare(bids, outcome):
    w = 0.0
    for bid, x in zip(bids, outcome.cleared_kw):
        w += x * bid.price_eur_per_kwh * (1.0 if bid.side == "demand" else -1.0)
    return w


def test_single_pair_partial_supply():
    bids = [Bid("supply", 4.0, 100.0), Bid("demand", 6.0, 50.0)]
    out = clear(bids)
    assert out.cleared_kw == pytest.approx([50.0, 50.0])
    assert out.mcp == pytest.approx(4.0)
    assert_complementary_slackness(bids, out)


def test_two_supplies_marginal_sets_price():
    bids = [Bid("supply", 2.0, 100.0), Bid("supply", 5.0, 100.0),
            Bid("demand", 10.0, 150.0)]
    out = clear(bids)
    assert out.cleared_kw == pytest.approx([100.0, 50.0, 150.0])
    assert out.mcp == pytest.approx(5.0)
    assert_complementary_slackness(bids, out)


def test_no_intersection_prices_at_gap_midpoint():
    bids = [Bid("supply", 6.0, 100.0), Bid("demand", 4.0, 100.0)]
    out = clear(bids)
    assert out.total_cleared_kw == 0.0
    assert out.mcp == pytest.approx(5.0)
    assert_complementary_slackness(bids, out)


def test_exact_vertex_uses_marginal_supply_price():
    bids = [Bid("supply", 4.0, 100.0), Bid("demand", 6.0, 100.0)]
    out = clear(bids)
    assert out.cleared_kw == pytest.approx([100.0, 100.0])
    assert out.mcp == pytest.approx(4.0)
    assert_complementary_slackness(bids, out)


def test_vertex_price_lifted_by_unserved_demand():
    # Supply is exhausted while a 5.0 demand goes empty; any price below 5
    # would leave that demand wanting to trade.
    bids = [Bid("supply", 4.0, 100.0), Bid("demand", 6.0, 100.0),
            Bid("demand", 5.0, 80.0)]
    out = clear(bids)
    assert out.cleared_kw == pytest.approx([100.0, 100.0, 0.0])
    assert out.mcp == pytest.approx(5.0)
    assert_complementary_slackness(bids, out)


def test_zero_quantity_bid_is_inert():
    bids = [Bid("supply", 1.0, 0.0), Bid("supply", 4.0, 100.0),
            Bid("demand", 6.0, 50.0)]
    out = clear(bids)
    assert out.cleared_kw == pytest.approx([0.0, 50.0, 50.0])
    assert out.mcp == pytest.approx(4.0)


def test_equal_price_rival_clears_before_vpp():
    bids = [
        Bid("supply", 5.0, 100.0, owner="vpp", name="us"),
        Bid("supply", 5.0, 100.0, owner="rival", name="them"),
        Bid("demand", 10.0, 150.0),
    ]
    out = clear(bids)
    assert out.cleared_kw[1] == pytest.approx(100.0), "rival should clear fully on a tie"
    assert out.cleared_kw[0] == pytest.approx(50.0)
    assert_complementary_slackness(bids, out)


def test_demand_side_tie_also_favours_rival():
    bids = [
        Bid("demand", 5.0, 100.0, owner="vpp"),
        Bid("demand", 5.0, 100.0, owner="rival"),
        Bid("supply", 1.0, 150.0),
    ]
    out = clear(bids)
    assert out.cleared_kw[1] == pytest.approx(100.0)
    assert out.cleared_kw[0] == pytest.approx(50.0)


def test_vpp_revenue_signs():
    bids = [
        Bid("supply", 4.0, 100.0, owner="vpp"),
        Bid("demand", 9.0, 40.0, owner="vpp"),
        Bid("demand", 8.0, 100.0),
        Bid("supply", 3.0, 60.0),
    ]
    out = clear(bids)
    rev = vpp_market_revenue(bids, out)
    # Sales earn mcp, purchases pay mcp.
    expected = out.mcp * (out.cleared_kw[0] - out.cleared_kw[1])
    assert rev == pytest.approx(expected)


def test_single_sided_markets_clear_nothing():
    only_supply = [Bid("supply", 3.0, 50.0), Bid("supply", 4.0, 80.0)]
    out = clear(only_supply)
    assert out.total_cleared_kw == 0.0
    assert_complementary_slackness(only_supply, out)

    only_demand = [Bid("demand", 3.0, 50.0)]
    out = clear(only_demand)
    assert out.total_cleared_kw == 0.0
    assert_complementary_slackness(only_demand, out)

    assert clear([]).total_cleared_kw == 0.0


def _random_instance(rng):
    n = int(rng.integers(1, 7))
    bids = []
    for _ in range(n):
        side = "supply" if rng.random() < 0.5 else "demand"
        if rng.random() < 0.5:
            price = float(rng.integers(1, 9))  # grid prices force ties
        else:
            price = float(np.round(rng.uniform(0.0, 10.0), 3))
        qty = 0.0 if rng.random() < 0.05 else float(np.round(rng.uniform(0.0, 200.0), 1))
        bids.append(Bid(side, price, qty))
    return bids


def test_random_instances_match_lp_oracle():
    rng = np.random.default_rng(20240816)
    for k in range(300):
        bids = _random_instance(rng)
        out = clear(bids)
        w_impl = cleared_welfare(bids, out)
        w_lp = lp_oracle_welfare(bids)
        assert w_impl == pytest.approx(w_lp, abs=1e-6), (
            f"instance {k}: welfare {w_impl} vs oracle {w_lp}: {bids}"
        )
        assert_complementary_slackness(bids, out)
        assert out.dual_lo - 1e-9 <= out.mcp <= out.dual_hi + 1e-9


@pytest.fixture(scope="module")
def scenario():
    return load_rival_scenario(bundled_rivals_path())


class TestRivalScenario:
    def test_noise_off_clears_at_anchor(self, scenario):
        for hour in range(24):
            bids = scenario.bids_for(hour, noise=False)
            out = clear(bids)
            expected = scenario.expected_rival_only_price(hour)
            assert out.mcp == pytest.approx(expected, abs=1e-9), f"hour {hour}"
            if hour not in scenario.pinned_hours:
                assert expected == scenario.anchors[hour]

    def test_pinned_hour_prices_at_backstop(self, scenario):
        assert 22 in scenario.pinned_hours
        out = clear(scenario.bids_for(22, noise=False))
        assert out.mcp == pytest.approx(8.0)

    def test_bids_are_deterministic_per_rng(self, scenario):
        a = scenario.bids_for(9, rng=np.random.default_rng(5), noise=True)
        b = scenario.bids_for(9, rng=np.random.default_rng(5), noise=True)
        assert a == b

    def test_jitter_stays_bounded(self, scenario):
        rng = np.random.default_rng(11)
        for _ in range(50):
            bids = scenario.bids_for(10, rng=rng, noise=True)
            anchor_bid = next(b for b in bids if b.name == "s_anchor")
            lo = scenario.anchors[10] * (1 - scenario.price_jitter_frac)
            hi = scenario.anchors[10] * (1 + scenario.price_jitter_frac)
            assert lo - 1e-9 <= anchor_bid.price_eur_per_kwh <= hi + 1e-9

    def test_pinned_backstop_never_jitters(self, scenario):
        rng = np.random.default_rng(3)
        for _ in range(20):
            bids = scenario.bids_for(22, rng=rng, noise=True)
            backstop = next(b for b in bids if b.name == "s_backstop")
            assert backstop.price_eur_per_kwh == 8.0

    def test_unknown_scenario_key_rejected(self, tmp_path):
        f = tmp_path / "rivals.txt"
        f.write_text(
            "[blocks]\ncheap_kw = 10\n[anchors]\nhour anchor bulk_kw\n0 4.0 100\n"
        )
        with pytest.raises(ConfigError):
            load_rival_scenario(f)
