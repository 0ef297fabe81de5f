"""Radial network model and branch-flow power flow.

The solver works on the branch-flow (DistFlow) equations of a radial feeder.
Each non-root bus has exactly one feeding branch, so branch quantities are
indexed by their child bus: entry b of the flow arrays is the branch
parent(b) -> b, and entry 0 is unused.

The sweep alternates a backward pass (accumulate downstream demand, solve the
per-branch quadratic for the squared current magnitude with the sending-end
voltage lagged) and a forward pass (update squared voltages from the root).
At the fixed point the full equation set is satisfied; convergence is judged
by direct substitution of the candidate solution into the equations, not by
the step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .io import ConfigError, parse_file, take


class PowerFlowError(RuntimeError):
    """Power flow failed: no physical solution or no convergence."""


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r_pu: float
    x_pu: float
    s_max_kva: float


@dataclass
class NetworkModel:
    """A rooted radial network. Bus 0 is the slack bus at the interconnection."""

    base_kva: float
    base_kv: float
    vmin_pu: float
    vmax_pu: float
    branches: list[Branch]

    # Derived topology, filled in __post_init__. parent[b] is the feeding bus
    # of b; topo lists non-root buses in root-to-leaf order.
    n_bus: int = field(init=False)
    parent: np.ndarray = field(init=False)
    topo: list[int] = field(init=False)
    children: list[list[int]] = field(init=False)
    r_pu: np.ndarray = field(init=False)
    x_pu: np.ndarray = field(init=False)
    s_max_pu: np.ndarray = field(init=False)

    def __post_init__(self):
        buses = {0}
        for br in self.branches:
            buses.add(br.from_bus)
            buses.add(br.to_bus)
        n = max(buses) + 1
        if buses != set(range(n)):
            raise ConfigError(f"bus numbers must be contiguous from 0; got {sorted(buses)}")
        if len(self.branches) != n - 1:
            raise ConfigError(
                f"a radial network with {n} buses needs {n - 1} branches, "
                f"got {len(self.branches)}"
            )

        adjacency: dict[int, list[tuple[int, Branch]]] = {b: [] for b in range(n)}
        seen_pairs = set()
        for br in self.branches:
            pair = frozenset((br.from_bus, br.to_bus))
            if br.from_bus == br.to_bus or pair in seen_pairs:
                raise ConfigError(f"degenerate or duplicate branch {br.from_bus}-{br.to_bus}")
            seen_pairs.add(pair)
            adjacency[br.from_bus].append((br.to_bus, br))
            adjacency[br.to_bus].append((br.from_bus, br))

        parent = np.full(n, -1, dtype=int)
        branch_of = [None] * n
        order: list[int] = []
        frontier = [0]
        visited = {0}
        while frontier:
            bus = frontier.pop(0)
            for other, br in adjacency[bus]:
                if other in visited:
                    continue
                visited.add(other)
                parent[other] = bus
                branch_of[other] = br
                order.append(other)
                frontier.append(other)
        if len(visited) != n:
            missing = sorted(set(range(n)) - visited)
            raise ConfigError(f"network is not connected; unreachable buses: {missing}")

        self.n_bus = n
        self.parent = parent
        self.topo = order
        self.children = [[] for _ in range(n)]
        for b in order:
            self.children[parent[b]].append(b)
        self.r_pu = np.zeros(n)
        self.x_pu = np.zeros(n)
        self.s_max_pu = np.full(n, np.inf)
        for b in order:
            br = branch_of[b]
            self.r_pu[b] = br.r_pu
            self.x_pu[b] = br.x_pu
            self.s_max_pu[b] = br.s_max_kva / self.base_kva


@dataclass
class PowerFlowSolution:
    converged: bool
    reason: str
    iterations: int
    residual_pu: float
    vsq_pu: np.ndarray
    p_flow_pu: np.ndarray
    q_flow_pu: np.ndarray
    isq_pu: np.ndarray

    base_kva: float = 0.0

    @property
    def v_pu(self) -> np.ndarray:
        return np.sqrt(self.vsq_pu)

    @property
    def pcc_pu(self) -> float:
        # Filled by the solver: active power flowing from the root into the
        # feeder (positive = import from the upstream market).
        return self._pcc_pu

    @property
    def pcc_kw(self) -> float:
        return self._pcc_pu * self.base_kva

    @property
    def losses_kw(self) -> float:
        return self._losses_pu * self.base_kva

    _pcc_pu: float = 0.0
    _losses_pu: float = 0.0


def equation_residual_pu(net: NetworkModel, sol: PowerFlowSolution,
                         p_kw, q_kvar) -> float:
    """Max residual of the branch-flow equations by direct substitution."""
    p = np.asarray(p_kw, dtype=float) / net.base_kva
    q = np.asarray(q_kvar, dtype=float) / net.base_kva
    vsq, P, Q, L = sol.vsq_pu, sol.p_flow_pu, sol.q_flow_pu, sol.isq_pu
    worst = 0.0
    for b in net.topo:
        i = net.parent[b]
        r, x = net.r_pu[b], net.x_pu[b]
        dp = sum(P[k] for k in net.children[b]) - p[b]
        dq = sum(Q[k] for k in net.children[b]) - q[b]
        worst = max(worst, abs(P[b] - (dp + r * L[b])))
        worst = max(worst, abs(Q[b] - (dq + x * L[b])))
        drop = 2.0 * (r * P[b] + x * Q[b]) - (r * r + x * x) * L[b]
        worst = max(worst, abs(vsq[b] - (vsq[i] - drop)))
        worst = max(worst, abs(L[b] * vsq[i] - (P[b] ** 2 + Q[b] ** 2)))
    return worst


def solve_power_flow(net: NetworkModel, p_kw, q_kvar, *, tol: float = 1e-8,
                     max_iter: int = 100, raise_on_fail: bool = True) -> PowerFlowSolution:
    """Solve the branch-flow equations for given bus injections.

    p_kw / q_kvar are net injections per bus (generation positive, load
    negative). The entry for bus 0 is ignored; the root is the slack.
    """
    p = np.asarray(p_kw, dtype=float) / net.base_kva
    q = np.asarray(q_kvar, dtype=float) / net.base_kva
    if p.shape != (net.n_bus,) or q.shape != (net.n_bus,):
        raise ValueError(
            f"injection arrays must have shape ({net.n_bus},); "
            f"got {p.shape} and {q.shape}"
        )

    n = net.n_bus
    vsq = np.ones(n)
    P = np.zeros(n)
    Q = np.zeros(n)
    L = np.zeros(n)
    reason = ""
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        vsq_prev = vsq.copy()
        failed = False
        # Backward: accumulate downstream demand leaf-first, solving the
        # quadratic for the squared current with the sending voltage lagged.
        for b in reversed(net.topo):
            dp = sum(P[k] for k in net.children[b]) - p[b]
            dq = sum(Q[k] for k in net.children[b]) - q[b]
            r, x = net.r_pu[b], net.x_pu[b]
            vi = vsq[net.parent[b]]
            a = r * r + x * x
            bb = 2.0 * (r * dp + x * dq) - vi
            c = dp * dp + dq * dq
            if a == 0.0:
                Lb = 0.0 if c == 0.0 else -c / bb
            else:
                disc = bb * bb - 4.0 * a * c
                if disc < 0.0:
                    reason = (
                        f"no real solution for branch current into bus {b} "
                        "(voltage collapse)"
                    )
                    failed = True
                    break
                Lb = (-bb - math.sqrt(disc)) / (2.0 * a)
            L[b] = Lb
            P[b] = dp + r * Lb
            Q[b] = dq + x * Lb
        if failed:
            break
        # Forward: propagate squared voltages from the root.
        for b in net.topo:
            i = net.parent[b]
            r, x = net.r_pu[b], net.x_pu[b]
            vsq[b] = vsq[i] - 2.0 * (r * P[b] + x * Q[b]) + (r * r + x * x) * L[b]
            if vsq[b] <= 0.0:
                reason = f"squared voltage at bus {b} dropped below zero"
                failed = True
                break
        if failed:
            break
        if np.max(np.abs(vsq - vsq_prev)) < 1e-13:
            converged = True
            break

    sol = PowerFlowSolution(
        converged=False,
        reason=reason,
        iterations=it,
        residual_pu=math.inf,
        vsq_pu=vsq,
        p_flow_pu=P,
        q_flow_pu=Q,
        isq_pu=L,
        base_kva=net.base_kva,
    )
    sol._pcc_pu = float(sum(P[k] for k in net.children[0]))
    sol._losses_pu = float(np.sum(net.r_pu * L))

    if converged:
        sol.residual_pu = equation_residual_pu(net, sol, p_kw, q_kvar)
        sol.converged = sol.residual_pu <= tol
        if not sol.converged:
            sol.reason = f"residual {sol.residual_pu:.3e} above tolerance {tol:.1e}"
    if not sol.converged and raise_on_fail:
        raise PowerFlowError(sol.reason or f"no convergence in {max_iter} sweeps")
    return sol


@dataclass
class LimitReport:
    ok: bool
    voltage_violations: list[tuple[int, float, float]]   # (bus, v_pu, violated bound)
    thermal_violations: list[tuple[int, float, float]]   # (child bus, s_kva, s_max_kva)
    max_voltage_violation_pu: float
    max_thermal_violation_kva: float
    min_voltage_margin_pu: float
    min_thermal_margin_kva: float


def evaluate_limits(net: NetworkModel, sol: PowerFlowSolution, *,
                    vtol_pu: float = 1e-7, stol_kva: float = 1e-3) -> LimitReport:
    """Check bus voltages and branch apparent-power flows against limits."""
    v = sol.v_pu
    volt_viols = []
    v_margin = math.inf
    worst_v = 0.0
    for b in range(1, net.n_bus):
        low, high = net.vmin_pu - v[b], v[b] - net.vmax_pu
        v_margin = min(v_margin, -low, -high)
        if low > vtol_pu:
            volt_viols.append((b, float(v[b]), net.vmin_pu))
            worst_v = max(worst_v, low)
        elif high > vtol_pu:
            volt_viols.append((b, float(v[b]), net.vmax_pu))
            worst_v = max(worst_v, high)

    therm_viols = []
    s_margin = math.inf
    worst_s = 0.0
    for b in net.topo:
        s_kva = math.hypot(sol.p_flow_pu[b], sol.q_flow_pu[b]) * net.base_kva
        s_max = net.s_max_pu[b] * net.base_kva
        if not math.isfinite(s_max):
            continue
        over = s_kva - s_max
        s_margin = min(s_margin, -over)
        if over > stol_kva:
            therm_viols.append((b, s_kva, s_max))
            worst_s = max(worst_s, over)

    return LimitReport(
        ok=not volt_viols and not therm_viols,
        voltage_violations=volt_viols,
        thermal_violations=therm_viols,
        max_voltage_violation_pu=worst_v,
        max_thermal_violation_kva=worst_s,
        min_voltage_margin_pu=v_margin,
        min_thermal_margin_kva=s_margin,
    )


def bundled_network_path():
    return resources.files("vppsim.data").joinpath("network.txt")


def load_network(path) -> NetworkModel:
    doc = parse_file(path)
    take(doc.scalars, {"base_kva": True, "base_kv": True}, context=f"{path} top level")
    limits = take(
        doc.mapping("limits"), {"vmin_pu": True, "vmax_pu": True}, context=f"{path} [limits]"
    )
    table = doc.table("branches")
    expected_cols = ["from_bus", "to_bus", "r_pu", "x_pu", "s_max_kva"]
    if table.columns != expected_cols:
        raise ConfigError(f"{path} [branches]: columns must be {expected_cols}")
    branches = [
        Branch(row["from_bus"], row["to_bus"], float(row["r_pu"]),
               float(row["x_pu"]), float(row["s_max_kva"]))
        for row in table.rows
    ]
    return NetworkModel(
        base_kva=float(doc.scalars["base_kva"]),
        base_kv=float(doc.scalars["base_kv"]),
        vmin_pu=float(limits["vmin_pu"]),
        vmax_pu=float(limits["vmax_pu"]),
        branches=branches,
    )
