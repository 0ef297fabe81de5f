"""Experiment harness: scenario configuration, training, evaluation,
baselines, and report generation.

Reproducibility rules. Every random stream is derived from the scenario seed
with a fixed salt: environment episodes use [seed, episode], exploration
[seed, 7, episode], replay sampling [seed, 11, global_step], and evaluation
episodes [seed, 1000000 + episode]. Keying replay sampling by global step
means a resumed run replays exactly the stream an uninterrupted run would
have used, so checkpoint resume is bit-exact and needs no generator state in
the checkpoint. Artifacts carry no timestamps for the same reason: two runs
of the same config must be byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .agent import DdpgAgent, ReplayBuffer, exploration_noise_scale
from .ders import BUNDLED_FLEETS, bundled_fleet, bundled_load_curves, bundled_res_profiles
from .env import HOURS_PER_EPISODE, BiddingEnv, EpisodeAborted, Variant
from .grid import bundled_network_path, load_network
from .io import ConfigError, parse_file, take
from .market import bundled_rivals_path, load_rival_scenario


class RunError(RuntimeError):
    """A run finished in a state that must not be trusted."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    t = str(value).strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_hidden(text) -> tuple:
    if isinstance(text, str):
        parts = [p for p in text.replace(" ", "").split(",") if p]
        return tuple(int(p) for p in parts)
    return tuple(int(p) for p in text)


@dataclass
class ScenarioConfig:
    """Everything that defines one training or evaluation run."""

    name: str
    fleet: str = "basecase"
    variant: str = "safe"
    episodes: int = 100
    eval_episodes: int = 20
    warmup_episodes: int = 10
    seed: int = 0
    hidden: tuple = (512, 512)
    actor_lr: float = 1e-3
    critic_lr: float = 2e-3
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    buffer_capacity: int = 1_000_000
    reward_scale: float = 1000.0
    checkpoint_every: int = 25
    eps_eur_per_kwh: float = 1.0
    with_forecast: bool = True
    res_noise_frac: float = 0.10
    rival_noise: bool = True
    price_cap_eur_per_kwh: float = 12.0
    qty_lo_frac: float = -0.25
    qty_hi_frac: float = 1.05
    noise_start: float = 0.5
    noise_end: float = 0.1
    noise_horizon: int = 100
    max_abort_frac: float = 0.01

    def __post_init__(self):
        self.variant = Variant.from_token(str(self.variant)).value
        self.hidden = _parse_hidden(self.hidden)
        if self.fleet not in BUNDLED_FLEETS:
            raise ValueError(f"unknown fleet {self.fleet!r}; have {BUNDLED_FLEETS}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.warmup_episodes < 0:
            raise ValueError("warmup_episodes must be >= 0")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if self.qty_hi_frac <= self.qty_lo_frac:
            raise ValueError("qty_hi_frac must exceed qty_lo_frac")

    def to_mapping(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out[f.name] = str(v)
        return out


_FIELD_PARSERS = {
    "name": str, "fleet": str, "variant": str,
    "episodes": int, "eval_episodes": int, "warmup_episodes": int,
    "seed": int, "hidden": _parse_hidden,
    "actor_lr": float, "critic_lr": float, "gamma": float, "tau": float,
    "batch_size": int, "buffer_capacity": int, "reward_scale": float,
    "checkpoint_every": int, "eps_eur_per_kwh": float,
    "with_forecast": _parse_bool, "res_noise_frac": float,
    "rival_noise": _parse_bool, "price_cap_eur_per_kwh": float,
    "qty_lo_frac": float, "qty_hi_frac": float,
    "noise_start": float, "noise_end": float, "noise_horizon": int,
    "max_abort_frac": float,
}


def scenario_from_mapping(raw: dict, *, context: str = "scenario") -> ScenarioConfig:
    take(raw, {k: (k == "name") for k in _FIELD_PARSERS}, context=context)
    kwargs = {k: _FIELD_PARSERS[k](v) for k, v in raw.items()}
    return ScenarioConfig(**kwargs)


def load_scenario(path) -> ScenarioConfig:
    doc = parse_file(path)
    return scenario_from_mapping(doc.mapping("scenario"), context=f"{path} [scenario]")


def make_env(cfg: ScenarioConfig) -> BiddingEnv:
    return BiddingEnv(
        net=load_network(bundled_network_path()),
        fleet=bundled_fleet(cfg.fleet),
        curves=bundled_load_curves(),
        profiles=bundled_res_profiles(),
        rivals=load_rival_scenario(bundled_rivals_path()),
        variant=Variant.from_token(cfg.variant),
        eps_eur_per_kwh=cfg.eps_eur_per_kwh,
        with_forecast=cfg.with_forecast,
        res_noise_frac=cfg.res_noise_frac,
        rival_noise=cfg.rival_noise,
        price_cap_eur_per_kwh=cfg.price_cap_eur_per_kwh,
        qty_lo_frac=cfg.qty_lo_frac,
        qty_hi_frac=cfg.qty_hi_frac,
    )


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def _episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([seed, episode])


def _explore_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([seed, 7, episode])


def _replay_rng(seed: int, global_step: int) -> np.random.Generator:
    return np.random.default_rng([seed, 11, global_step])


def _eval_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1_000_000 + episode])


# ---------------------------------------------------------------------------
# Artifact plumbing
# ---------------------------------------------------------------------------

TRAIN_COLUMNS = [
    "episode", "sigma", "aborted", "steps",
    "reward_total", "r_da_total", "c_vpp_total", "c_shd_total",
    "balancing_total", "profit_total",
    "shield_activations", "infeasible_bids",
    "mcp_hour22", "u_cleared_hour22",
]

HOUR_COLUMNS = [
    "episode", "hour", "price_bid", "q_bid_kw", "u_offer_kw",
    "u_cleared_kw", "u_delivered_kw", "u_min_kw", "u_max_kw",
    "mcp", "mcp_rivals_only", "r_da_eur", "c_vpp_eur", "c_shd_eur",
    "balancing_eur", "reward_eur", "profit_eur",
    "shield_active", "infeasible_bid", "pmc_eur_per_kwh",
]

EPISODE_COLUMNS = [
    "episode", "steps", "reward_total", "r_da_total", "c_vpp_total",
    "c_shd_total", "balancing_total", "profit_total",
    "shield_activations", "infeasible_bids", "mcp_hour22", "u_cleared_hour22",
]


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def _write_meta(out_dir: Path, cfg: ScenarioConfig, *, kind: str, extra: dict | None = None):
    lines = ["[run]", f"kind = {kind}", f"package_version = {__version__}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    lines.append("")
    lines.append("[scenario]")
    for k, v in sorted(cfg.to_mapping().items()):
        lines.append(f"{k} = {v}")
    (out_dir / "meta.txt").write_text("\n".join(lines) + "\n")


def _build_agent(cfg: ScenarioConfig, env: BiddingEnv) -> DdpgAgent:
    return DdpgAgent(
        env.state_dim, env.action_dim, hidden=cfg.hidden,
        actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr,
        gamma=cfg.gamma, tau=cfg.tau, seed=cfg.seed,
    )


def _save_checkpoint(path: Path, agent: DdpgAgent, buffer: ReplayBuffer,
                     episode: int, global_step: int, aborted: int):
    flat = {
        "progress/episode": np.int64(episode),
        "progress/global_step": np.int64(global_step),
        "progress/aborted": np.int64(aborted),
    }
    state = agent.state_dict()
    for net in ("actor", "critic", "actor_target", "critic_target"):
        for i, w in enumerate(state[net]):
            flat[f"{net}/{i}"] = w
    for opt in ("adam_actor", "adam_critic"):
        flat[f"{opt}/t"] = np.int64(state[opt]["t"])
        for i, m in enumerate(state[opt]["m"]):
            flat[f"{opt}/m{i}"] = m
        for i, v in enumerate(state[opt]["v"]):
            flat[f"{opt}/v{i}"] = v
    buf = buffer.state_dict()
    for key in ("states", "actions", "rewards", "next_states", "dones"):
        flat[f"buffer/{key}"] = buf[key]
    flat["buffer/pos"] = np.int64(buf["pos"])
    flat["buffer/size"] = np.int64(buf["size"])
    np.savez_compressed(path, **flat)


def _nets_from_blob(blob, prefix: str) -> list[np.ndarray]:
    out = []
    i = 0
    while f"{prefix}/{i}" in blob:
        out.append(blob[f"{prefix}/{i}"])
        i += 1
    return out


def _load_checkpoint(path: Path, agent: DdpgAgent, buffer: ReplayBuffer | None):
    blob = np.load(path)
    state = {
        net: _nets_from_blob(blob, net)
        for net in ("actor", "critic", "actor_target", "critic_target")
    }
    for opt in ("adam_actor", "adam_critic"):
        ms, vs = [], []
        i = 0
        while f"{opt}/m{i}" in blob:
            ms.append(blob[f"{opt}/m{i}"])
            vs.append(blob[f"{opt}/v{i}"])
            i += 1
        state[opt] = {"t": int(blob[f"{opt}/t"]), "m": ms, "v": vs}
    agent.load_state_dict(state)
    if buffer is not None:
        buffer.load_state_dict({
            "states": blob["buffer/states"],
            "actions": blob["buffer/actions"],
            "rewards": blob["buffer/rewards"],
            "next_states": blob["buffer/next_states"],
            "dones": blob["buffer/dones"],
            "pos": int(blob["buffer/pos"]),
            "size": int(blob["buffer/size"]),
        })
    return {
        "episode": int(blob["progress/episode"]),
        "global_step": int(blob["progress/global_step"]),
        "aborted": int(blob["progress/aborted"]),
    }


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainSummary:
    episodes_run: int
    aborted_episodes: int
    checkpoint_path: Path
    log_path: Path


def _blank_totals() -> dict:
    return {
        "reward_total": 0.0, "r_da_total": 0.0, "c_vpp_total": 0.0,
        "c_shd_total": 0.0, "balancing_total": 0.0, "profit_total": 0.0,
        "shield_activations": 0, "infeasible_bids": 0,
    }


def _accumulate(totals: dict, row: dict):
    totals["reward_total"] += row["reward_eur"]
    totals["r_da_total"] += row["r_da_eur"]
    totals["c_vpp_total"] += row["c_vpp_eur"]
    totals["c_shd_total"] += row["c_shd_eur"]
    totals["balancing_total"] += row["balancing_eur"]
    totals["profit_total"] += row["profit_eur"]
    totals["shield_activations"] += int(row["shield_active"])
    totals["infeasible_bids"] += int(row["infeasible_bid"])


def train_run(cfg: ScenarioConfig, out_dir, *, resume: bool = False) -> TrainSummary:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.npz"
    log_path = out_dir / "train_log.csv"

    env = make_env(cfg)
    agent = _build_agent(cfg, env)
    buffer = ReplayBuffer(cfg.buffer_capacity, env.state_dim, env.action_dim)

    start_ep = 0
    global_step = 0
    aborted = 0
    log_rows: list[dict] = []
    if resume:
        if not ckpt_path.exists():
            raise RunError(f"resume requested but {ckpt_path} does not exist")
        progress = _load_checkpoint(ckpt_path, agent, buffer)
        start_ep = progress["episode"]
        global_step = progress["global_step"]
        aborted = progress["aborted"]
        if log_path.exists():
            with open(log_path, newline="") as fh:
                log_rows = [r for r in csv.DictReader(fh)
                            if int(r["episode"]) < start_ep]

    _write_meta(out_dir, cfg, kind="train")

    for ep in range(start_ep, cfg.episodes):
        sigma = exploration_noise_scale(
            ep, cfg.noise_start, cfg.noise_end, cfg.noise_horizon
        )
        ex_rng = _explore_rng(cfg.seed, ep)
        state = env.reset(_episode_rng(cfg.seed, ep))
        totals = _blank_totals()
        steps = 0
        ep_aborted = 0
        mcp22 = ""
        u22 = ""
        try:
            for _ in range(HOURS_PER_EPISODE):
                if ep < cfg.warmup_episodes:
                    action = ex_rng.uniform(0.0, 1.0, size=env.action_dim)
                else:
                    action = agent.act_explore(state, sigma, ex_rng)
                nxt, reward, done, row = env.step(action)
                buffer.push(state, action, reward / cfg.reward_scale, nxt, done)
                state = nxt
                global_step += 1
                steps += 1
                _accumulate(totals, row)
                if row["hour"] == 22:
                    mcp22 = row["mcp"]
                    u22 = row["u_cleared_kw"]
                if ep >= cfg.warmup_episodes and len(buffer) >= cfg.batch_size:
                    agent.update(
                        buffer.sample(cfg.batch_size, _replay_rng(cfg.seed, global_step))
                    )
        except EpisodeAborted:
            ep_aborted = 1
            aborted += 1

        log_rows.append({
            "episode": ep, "sigma": sigma, "aborted": ep_aborted, "steps": steps,
            "mcp_hour22": mcp22, "u_cleared_hour22": u22, **totals,
        })
        if (ep + 1) % cfg.checkpoint_every == 0 or ep == cfg.episodes - 1:
            _save_checkpoint(ckpt_path, agent, buffer, ep + 1, global_step, aborted)
            _write_csv(log_path, TRAIN_COLUMNS, log_rows)

    if aborted > cfg.max_abort_frac * cfg.episodes:
        raise RunError(
            f"{aborted}/{cfg.episodes} episodes aborted, more than the "
            f"{cfg.max_abort_frac:.0%} allowance; artifacts kept in {out_dir}"
        )
    return TrainSummary(
        episodes_run=cfg.episodes, aborted_episodes=aborted,
        checkpoint_path=ckpt_path, log_path=log_path,
    )


# ---------------------------------------------------------------------------
# Evaluation and baselines
# ---------------------------------------------------------------------------

@dataclass
class EvalSummary:
    episodes: int
    aborted_episodes: int
    mean_profit_eur: float
    mean_reward_eur: float
    mean_r_da_eur: float
    shield_activation_rate: float
    infeasible_rate: float
    mean_mcp_hour22: float
    mean_mcp_rivals_only_hour22: float
    mean_u_cleared_hour22: float


def _summarise(hour_rows: list[dict], episodes: int, aborted: int) -> EvalSummary:
    n = max(len(hour_rows), 1)
    done_eps = max(episodes - aborted, 1)
    h22 = [r for r in hour_rows if r["hour"] == 22]
    n22 = max(len(h22), 1)
    return EvalSummary(
        episodes=episodes,
        aborted_episodes=aborted,
        mean_profit_eur=sum(r["profit_eur"] for r in hour_rows) / done_eps,
        mean_reward_eur=sum(r["reward_eur"] for r in hour_rows) / done_eps,
        mean_r_da_eur=sum(r["r_da_eur"] for r in hour_rows) / done_eps,
        shield_activation_rate=sum(r["shield_active"] for r in hour_rows) / n,
        infeasible_rate=sum(r["infeasible_bid"] for r in hour_rows) / n,
        mean_mcp_hour22=sum(r["mcp"] for r in h22) / n22,
        mean_mcp_rivals_only_hour22=sum(r["mcp_rivals_only"] for r in h22) / n22,
        mean_u_cleared_hour22=sum(r["u_cleared_kw"] for r in h22) / n22,
    )


def _episode_row(ep: int, rows: list[dict]) -> dict:
    totals = _blank_totals()
    mcp22 = ""
    u22 = ""
    for row in rows:
        _accumulate(totals, row)
        if row["hour"] == 22:
            mcp22 = row["mcp"]
            u22 = row["u_cleared_kw"]
    return {"episode": ep, "steps": len(rows),
            "mcp_hour22": mcp22, "u_cleared_hour22": u22, **totals}


def _rollout(env: BiddingEnv, cfg: ScenarioConfig, episodes: int, policy):
    """Run greedy episodes under `policy(env, state) -> action`."""
    hour_rows: list[dict] = []
    episode_rows: list[dict] = []
    aborted = 0
    for k in range(episodes):
        state = env.reset(_eval_rng(cfg.seed, k))
        rows = []
        try:
            done = False
            while not done:
                state, _, done, row = env.step(policy(env, state))
                rows.append(row)
        except EpisodeAborted:
            aborted += 1
            continue
        for row in rows:
            hour_rows.append({"episode": k, **row})
        episode_rows.append(_episode_row(k, rows))
    return hour_rows, episode_rows, aborted


def eval_run(cfg: ScenarioConfig, run_dir, *, episodes: int | None = None,
             checkpoint: Path | None = None) -> EvalSummary:
    """Greedy evaluation of a trained policy, logged next to its run."""
    run_dir = Path(run_dir)
    episodes = episodes if episodes is not None else cfg.eval_episodes
    env = make_env(cfg)
    agent = _build_agent(cfg, env)
    ckpt = Path(checkpoint) if checkpoint is not None else run_dir / "checkpoint.npz"
    if not ckpt.exists():
        raise RunError(f"no checkpoint at {ckpt}; train first")
    _load_checkpoint(ckpt, agent, buffer=None)

    hour_rows, episode_rows, aborted = _rollout(
        env, cfg, episodes, lambda _env, state: agent.act(state)
    )
    _write_csv(run_dir / "eval_hours.csv", HOUR_COLUMNS, hour_rows)
    _write_csv(run_dir / "eval_episodes.csv", EPISODE_COLUMNS, episode_rows)
    return _summarise(hour_rows, episodes, aborted)


BASELINE_POLICIES = ("price_taker", "no_vpp")


def baseline_run(cfg: ScenarioConfig, policy: str, out_dir,
                 *, episodes: int | None = None) -> EvalSummary:
    """Fixed reference policies sharing the evaluation episode streams.

    price_taker offers the full deliverable export at the fleet's highest
    unit cost (sell whenever the market clears above true cost); no_vpp
    stays out of the market entirely, so booked prices are the rival-only
    prices.
    """
    if policy not in BASELINE_POLICIES:
        raise ValueError(f"unknown baseline {policy!r}; have {BASELINE_POLICIES}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = episodes if episodes is not None else cfg.eval_episodes

    cfg_safe = dataclasses.replace(cfg, variant="safe")
    env = make_env(cfg_safe)
    ask = max((u.cost_eur_per_kwh for u in env.fleet.units()), default=0.0)

    def act(env_: BiddingEnv, _state):
        if policy == "no_vpp":
            return env_.action_for(env_.price_cap, 0.0)
        _, u_max = env_.current_interval()
        return env_.action_for(ask, u_max)

    hour_rows, episode_rows, aborted = _rollout(env, cfg_safe, episodes, act)
    _write_csv(out_dir / "baseline_hours.csv", HOUR_COLUMNS, hour_rows)
    _write_csv(out_dir / "baseline_episodes.csv", EPISODE_COLUMNS, episode_rows)
    _write_meta(out_dir, cfg_safe, kind="baseline", extra={"policy": policy})
    return _summarise(hour_rows, episodes, aborted)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _meta_mapping(run_dir: Path) -> dict:
    doc = parse_file(run_dir / "meta.txt")
    out = dict(doc.mapping("run"))
    out.update(doc.mapping("scenario"))
    return out


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else float("nan")


SUMMARY_COLUMNS = [
    "variant", "runs", "seeds", "eval_episodes",
    "eval_profit_per_day_eur", "eval_reward_per_day_eur", "eval_r_da_per_day_eur",
    "train_activations_first10", "train_activations_last10",
    "eval_activation_rate", "eval_infeasible_rate",
    "mcp_hour22", "mcp_rivals_only_hour22", "u_cleared_hour22_kw",
]

HOUR22_COLUMNS = [
    "policy", "mcp_hour22", "mcp_rivals_only_hour22",
    "u_cleared_hour22_kw", "profit_per_day_eur",
]


def write_report(run_dirs, out_dir, *, baseline_dirs=()) -> Path:
    """Aggregate training runs (and optional baselines) into CSV + markdown."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    by_variant: dict[str, list[dict]] = {}
    for run_dir in map(Path, run_dirs):
        meta = _meta_mapping(run_dir)
        eval_path = run_dir / "eval_hours.csv"
        if not eval_path.exists():
            raise RunError(f"{run_dir} has no eval_hours.csv; run eval first")
        entry = {
            "meta": meta,
            "train": _read_csv(run_dir / "train_log.csv"),
            "hours": _read_csv(eval_path),
            "episodes": _read_csv(run_dir / "eval_episodes.csv"),
        }
        by_variant.setdefault(meta["variant"], []).append(entry)

    summary_rows = []
    hour22_rows = []
    for variant in sorted(by_variant):
        entries = by_variant[variant]
        first10, last10 = [], []
        for e in entries:
            train = e["train"]
            head = [r for r in train if int(r["episode"]) < 10]
            tail = [r for r in train if int(r["episode"]) >= len(train) - 10]
            first10.append(_mean(float(r["shield_activations"]) for r in head))
            last10.append(_mean(float(r["shield_activations"]) for r in tail))

        hours = [r for e in entries for r in e["hours"]]
        n_eps = sum(len(e["episodes"]) for e in entries)
        h22 = [r for r in hours if int(r["hour"]) == 22]
        profit_day = sum(float(r["profit_eur"]) for r in hours) / max(n_eps, 1)
        row = {
            "variant": variant,
            "runs": len(entries),
            "seeds": " ".join(str(e["meta"]["seed"]) for e in entries),
            "eval_episodes": n_eps,
            "eval_profit_per_day_eur": profit_day,
            "eval_reward_per_day_eur":
                sum(float(r["reward_eur"]) for r in hours) / max(n_eps, 1),
            "eval_r_da_per_day_eur":
                sum(float(r["r_da_eur"]) for r in hours) / max(n_eps, 1),
            "train_activations_first10": _mean(first10),
            "train_activations_last10": _mean(last10),
            "eval_activation_rate":
                _mean(r["shield_active"] == "True" for r in hours),
            "eval_infeasible_rate":
                _mean(r["infeasible_bid"] == "True" for r in hours),
            "mcp_hour22": _mean(float(r["mcp"]) for r in h22),
            "mcp_rivals_only_hour22":
                _mean(float(r["mcp_rivals_only"]) for r in h22),
            "u_cleared_hour22_kw": _mean(float(r["u_cleared_kw"]) for r in h22),
        }
        summary_rows.append(row)
        hour22_rows.append({
            "policy": variant,
            "mcp_hour22": row["mcp_hour22"],
            "mcp_rivals_only_hour22": row["mcp_rivals_only_hour22"],
            "u_cleared_hour22_kw": row["u_cleared_hour22_kw"],
            "profit_per_day_eur": profit_day,
        })

    for bdir in map(Path, baseline_dirs):
        meta = _meta_mapping(bdir)
        hours = _read_csv(bdir / "baseline_hours.csv")
        eps = _read_csv(bdir / "baseline_episodes.csv")
        h22 = [r for r in hours if int(r["hour"]) == 22]
        hour22_rows.append({
            "policy": meta.get("policy", bdir.name),
            "mcp_hour22": _mean(float(r["mcp"]) for r in h22),
            "mcp_rivals_only_hour22":
                _mean(float(r["mcp_rivals_only"]) for r in h22),
            "u_cleared_hour22_kw": _mean(float(r["u_cleared_kw"]) for r in h22),
            "profit_per_day_eur":
                sum(float(r["profit_eur"]) for r in hours) / max(len(eps), 1),
        })

    _write_csv(out_dir / "variant_summary.csv", SUMMARY_COLUMNS, summary_rows)
    _write_csv(out_dir / "hour22.csv", HOUR22_COLUMNS, hour22_rows)

    lines = ["# Run report", "", "## Variants", ""]
    lines.append("| variant | runs | profit/day (EUR) | activations first10 -> last10 "
                 "| eval activation rate | hour-22 price |")
    lines.append("|---|---|---|---|---|---|")
    for r in summary_rows:
        lines.append(
            f"| {r['variant']} | {r['runs']} | {r['eval_profit_per_day_eur']:.1f} "
            f"| {r['train_activations_first10']:.2f} -> {r['train_activations_last10']:.2f} "
            f"| {r['eval_activation_rate']:.3f} | {r['mcp_hour22']:.3f} |"
        )
    lines += ["", "## Hour 22 (scarcity hour)", ""]
    lines.append("| policy | price | rivals-only price | cleared (kW) | profit/day (EUR) |")
    lines.append("|---|---|---|---|---|")
    for r in hour22_rows:
        lines.append(
            f"| {r['policy']} | {r['mcp_hour22']:.3f} | {r['mcp_rivals_only_hour22']:.3f} "
            f"| {r['u_cleared_hour22_kw']:.1f} | {r['profit_per_day_eur']:.1f} |"
        )
    (out_dir / "report.md").write_text("\n".join(lines) + "\n")
    return out_dir
