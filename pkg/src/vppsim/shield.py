"""Safety shield: projects a market quantity onto the deliverable interval.

The agent's cleared quantity is a promise the feeder has to keep. Before the
promise is made, the shield replaces any undeliverable quantity with the
nearest deliverable one and charges the agent for the interference, so the
policy learns to stop relying on the correction. A correction below the
activation tolerance still costs its energy but is not counted as an
activation; dispatch itself only balances to about a kilowatt, so trims of
that size carry no information.
"""

from __future__ import annotations

from dataclasses import dataclass


def project_to_interval(u_kw: float, u_min_kw: float, u_max_kw: float) -> float:
    """Closest point of [u_min, u_max] to u."""
    return min(max(u_kw, u_min_kw), u_max_kw)


@dataclass(frozen=True)
class ShieldAction:
    u_bid_kw: float
    u_safe_kw: float
    eps_eur_per_kwh: float
    activation_tol_kw: float

    @property
    def delta_kw(self) -> float:
        return abs(self.u_bid_kw - self.u_safe_kw)

    @property
    def cost_eur(self) -> float:
        return self.eps_eur_per_kwh * self.delta_kw

    @property
    def active(self) -> bool:
        return self.delta_kw > self.activation_tol_kw


class SafetyShield:
    """Quantity projection with a proportional interference charge."""

    def __init__(self, eps_eur_per_kwh: float = 1.0, activation_tol_kw: float = 1.0):
        if eps_eur_per_kwh < 0.0:
            raise ValueError(f"eps must be non-negative, got {eps_eur_per_kwh}")
        if activation_tol_kw < 0.0:
            raise ValueError(f"activation tolerance must be non-negative, "
                             f"got {activation_tol_kw}")
        self.eps_eur_per_kwh = eps_eur_per_kwh
        self.activation_tol_kw = activation_tol_kw

    def apply(self, u_bid_kw: float, u_min_kw: float, u_max_kw: float) -> ShieldAction:
        if u_min_kw > u_max_kw:
            raise ValueError(f"empty interval: [{u_min_kw}, {u_max_kw}]")
        return ShieldAction(
            u_bid_kw=u_bid_kw,
            u_safe_kw=project_to_interval(u_bid_kw, u_min_kw, u_max_kw),
            eps_eur_per_kwh=self.eps_eur_per_kwh,
            activation_tol_kw=self.activation_tol_kw,
        )
