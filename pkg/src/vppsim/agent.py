"""Deterministic-policy learner (DDPG) on plain numpy.

The actor maps the observed system state to a point in the unit box, which
the environment rescales to a price-quantity offer. The critic scores
state-action pairs; its gradient with respect to the action input is what
moves the actor, so Mlp.backward returns the input gradient alongside the
parameter gradients.

Everything here is deliberately free of framework dependencies: two dense
ReLU networks, Adam, a ring-buffer replay memory, and Polyak-averaged target
copies. Training math runs in float32 by default; tests exercise the same
code in float64 where gradient checks need the headroom.
"""

from __future__ import annotations

import math

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Mlp:
    """Dense ReLU network with an identity or sigmoid output head.

    params is a flat list [W0, b0, W1, b1, ...]; weight matrices are
    (fan_in, fan_out). Hidden layers use He-initialised weights; final_scale
    shrinks the output layer so fresh policies start near the middle of the
    action box instead of saturated at its corners.
    """

    def __init__(self, sizes, out: str = "identity",
                 rng: np.random.Generator | None = None,
                 final_scale: float = 1.0, dtype=np.float32):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if out not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {out!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = list(sizes)
        self.out = out
        self.dtype = dtype
        self.params: list[np.ndarray] = []
        last = len(sizes) - 2
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = rng.normal(0.0, math.sqrt(2.0 / n_in), size=(n_in, n_out))
            if k == last:
                w *= final_scale
            self.params.append(w.astype(dtype))
            self.params.append(np.zeros(n_out, dtype=dtype))

    def copy(self) -> "Mlp":
        dup = object.__new__(Mlp)
        dup.sizes = list(self.sizes)
        dup.out = self.out
        dup.dtype = self.dtype
        dup.params = [w.copy() for w in self.params]
        return dup

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        acts = [x]
        pres = []
        n_layers = len(self.sizes) - 1
        h = x
        for k in range(n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            pres.append(z)
            if k < n_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.out == "sigmoid":
                h = 1.0 / (1.0 + np.exp(-z))
            else:
                h = z
            acts.append(h)
        cache = (acts, pres, squeeze)
        out = h[0] if squeeze else h
        return out, cache

    def backward(self, cache, dout: np.ndarray):
        """Parameter gradients and the input gradient for upstream chaining."""
        acts, pres, squeeze = cache
        dout = np.asarray(dout, dtype=self.dtype)
        if squeeze and dout.ndim == 1:
            dout = dout[None, :]
        n_layers = len(self.sizes) - 1
        if self.out == "sigmoid":
            y = acts[-1]
            dz = dout * y * (1.0 - y)
        else:
            dz = dout
        grads: list[np.ndarray] = [None] * len(self.params)
        for k in range(n_layers - 1, -1, -1):
            grads[2 * k] = acts[k].T @ dz
            grads[2 * k + 1] = dz.sum(axis=0)
            if k > 0:
                dh = dz @ self.params[2 * k].T
                dz = dh * (pres[k - 1] > 0.0)
        dx = dz @ self.params[0].T
        if squeeze:
            dx = dx[0]
        return grads, dx


class Adam:
    """Standard Adam with bias correction; state is checkpointable."""

    def __init__(self, params_like, lr: float,
                 beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 eps: float = ADAM_EPS):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(w) for w in params_like]
        self.v = [np.zeros_like(w) for w in params_like]

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for w, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            w -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def state_dict(self):
        return {"t": self.t, "m": [a.copy() for a in self.m],
                "v": [a.copy() for a in self.v]}

    def load_state_dict(self, state):
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            dst[...] = src


def exploration_noise_scale(episode: int, start: float = 0.5,
                            end: float = 0.1, horizon: int = 100) -> float:
    """Exponential decay from start to end over horizon episodes."""
    rate = math.log(start / end) / horizon
    return start * math.exp(-rate * episode)


class ReplayBuffer:
    """Fixed-capacity ring buffer over transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 dtype=np.float32):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.actions = np.zeros((capacity, action_dim), dtype=dtype)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.dones = np.zeros(capacity, dtype=dtype)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, done: bool):
        i = self.pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = 1.0 if done else 0.0
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict:
        if batch > self.size:
            raise ValueError(f"asked for {batch} transitions, have {self.size}")
        idx = rng.choice(self.size, size=batch, replace=False)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }

    def state_dict(self):
        return {
            "states": self.states.copy(), "actions": self.actions.copy(),
            "rewards": self.rewards.copy(), "next_states": self.next_states.copy(),
            "dones": self.dones.copy(),
            "pos": self.pos, "size": self.size,
        }

    def load_state_dict(self, state):
        if state["states"].shape != self.states.shape:
            raise ValueError("replay buffer shape mismatch")
        self.states[...] = state["states"]
        self.actions[...] = state["actions"]
        self.rewards[...] = state["rewards"]
        self.next_states[...] = state["next_states"]
        self.dones[...] = state["dones"]
        self.pos = int(state["pos"])
        self.size = int(state["size"])


class DdpgAgent:
    """Actor-critic pair with target copies and Polyak averaging."""

    def __init__(self, state_dim: int, action_dim: int, *,
                 hidden=(512, 512), actor_lr: float = 1e-3,
                 critic_lr: float = 2e-3, gamma: float = 0.99,
                 tau: float = 0.005, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng([seed, 0xDD])
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.gamma = gamma
        self.tau = tau
        self.actor = Mlp([state_dim, *hidden, action_dim], out="sigmoid",
                         rng=rng, final_scale=0.01, dtype=dtype)
        self.critic = Mlp([state_dim + action_dim, *hidden, 1], out="identity",
                          rng=rng, dtype=dtype)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.adam_actor = Adam(self.actor.params, lr=actor_lr)
        self.adam_critic = Adam(self.critic.params, lr=critic_lr)

    def act(self, state: np.ndarray) -> np.ndarray:
        out, _ = self.actor.forward(np.asarray(state, dtype=self.actor.dtype))
        return out

    def act_explore(self, state: np.ndarray, sigma: float,
                    rng: np.random.Generator) -> np.ndarray:
        a = self.act(state)
        noise = rng.normal(0.0, sigma, size=a.shape) if sigma > 0.0 else 0.0
        return np.clip(a + noise, 0.0, 1.0)

    def update(self, batch: dict) -> dict:
        """One gradient step on each network from a sampled batch."""
        dtype = self.actor.dtype
        s = np.asarray(batch["states"], dtype=dtype)
        a = np.asarray(batch["actions"], dtype=dtype)
        r = np.asarray(batch["rewards"], dtype=dtype)
        s2 = np.asarray(batch["next_states"], dtype=dtype)
        d = np.asarray(batch["dones"], dtype=dtype)
        n = s.shape[0]

        a2, _ = self.actor_target.forward(s2)
        q2, _ = self.critic_target.forward(np.concatenate([s2, a2], axis=1))
        y = r[:, None] + self.gamma * (1.0 - d[:, None]) * q2

        q, cache_q = self.critic.forward(np.concatenate([s, a], axis=1))
        td = q - y
        critic_loss = float(np.mean(td**2))
        grads_c, _ = self.critic.backward(cache_q, 2.0 * td / n)
        self.adam_critic.step(self.critic.params, grads_c)

        a_pi, cache_pi = self.actor.forward(s)
        q_pi, cache_qpi = self.critic.forward(np.concatenate([s, a_pi], axis=1))
        # Ascend the critic: pass -1/n through it, keep only the action slice.
        _, dsa = self.critic.backward(cache_qpi, np.full_like(q_pi, -1.0 / n))
        grads_a, _ = self.actor.backward(cache_pi, dsa[:, self.state_dim:])
        self.adam_actor.step(self.actor.params, grads_a)

        self._soft_update(self.actor, self.actor_target)
        self._soft_update(self.critic, self.critic_target)
        return {"critic_loss": critic_loss, "actor_q": float(np.mean(q_pi))}

    def _soft_update(self, online: Mlp, target: Mlp):
        for w, wt in zip(online.params, target.params):
            wt *= 1.0 - self.tau
            wt += self.tau * w

    def state_dict(self) -> dict:
        return {
            "actor": [w.copy() for w in self.actor.params],
            "critic": [w.copy() for w in self.critic.params],
            "actor_target": [w.copy() for w in self.actor_target.params],
            "critic_target": [w.copy() for w in self.critic_target.params],
            "adam_actor": self.adam_actor.state_dict(),
            "adam_critic": self.adam_critic.state_dict(),
        }

    def load_state_dict(self, state: dict):
        for net, key in ((self.actor, "actor"), (self.critic, "critic"),
                         (self.actor_target, "actor_target"),
                         (self.critic_target, "critic_target")):
            if len(net.params) != len(state[key]):
                raise ValueError(f"{key}: parameter count mismatch")
            for dst, src in zip(net.params, state[key]):
                if dst.shape != src.shape:
                    raise ValueError(f"{key}: shape mismatch {dst.shape} vs {src.shape}")
                dst[...] = src
        self.adam_actor.load_state_dict(state["adam_actor"])
        self.adam_critic.load_state_dict(state["adam_critic"])
