"""Drone-BS 3D placement by particle swarm optimization over a penalized utility."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .association import RATE_FLOOR
from .channel import EXPECTED, Environment, dbs_links, footprint_threshold, mbs_access_power
from .scenario import Region

HINGE = "hinge"
VERBATIM = "verbatim"


@dataclass(frozen=True)
class NetworkConfig:
    """Radio and geometry settings shared by every DBS."""

    theta_b: float = 60.0
    mbs_power: float = 46.0
    dbs_power: float = 36.0
    h_min: float = 10.0
    h_max: float = 500.0

    def __post_init__(self):
        if not 0 < self.theta_b < 180:
            raise ValueError("theta_b must lie in (0, 180)")
        if not 0 < self.h_min <= self.h_max:
            raise ValueError("altitude bounds must satisfy 0 < h_min <= h_max")

    @property
    def theta_star(self) -> float:
        return footprint_threshold(self.theta_b)

    @property
    def separation_factor(self) -> float:
        """Minimum horizontal DBS spacing per meter of summed altitude."""
        return 1.0 / np.tan(np.radians(self.theta_star))


@dataclass(frozen=True)
class SwarmConfig:
    swarm_size: int = 30
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    max_iters: int = 60
    penalty_weight: float = 1e3
    v_max_fraction: float = 0.1  # of the region diagonal
    penalty_form: str = HINGE

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if not 0 < self.inertia < 1:
            raise ValueError("inertia must lie in (0, 1)")
        if self.c1 <= 0 or self.c2 <= 0 or self.penalty_weight <= 0:
            raise ValueError("c1, c2 and penalty_weight must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.penalty_form not in (HINGE, VERBATIM):
            raise ValueError(f"penalty_form must be {HINGE!r} or {VERBATIM!r}")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_score: float


@dataclass
class PlacementContext:
    """Everything held fixed while the DBSs move: users, association and alpha."""

    user_xy: np.ndarray
    x: np.ndarray
    alpha: float
    region: Region
    network: NetworkConfig = NetworkConfig()
    env: Environment = Environment()
    rate_floor: float = RATE_FLOOR
    mbs_rx: np.ndarray = field(init=False, repr=False)
    mbs_pos: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.user_xy = np.asarray(self.user_xy, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        mx, my = self.region.mbs_position
        self.mbs_pos = np.array([mx, my, self.env.mbs_height])
        self.mbs_rx = mbs_access_power(self.user_xy, self.mbs_pos, self.network.mbs_power,
                                       self.env, EXPECTED)

    @property
    def lower(self) -> np.ndarray:
        return np.array([*self.region.lower, self.network.h_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([*self.region.upper, self.network.h_max])


def separation_violation(positions, theta_star: float) -> np.ndarray:
    """Required minus actual horizontal distance for each DBS pair j < j'.

    Shape (..., M*(M-1)/2); positive entries are violations.
    """
    p = np.asarray(positions, dtype=float)
    m = p.shape[-2]
    jj, kk = np.triu_indices(m, 1)
    dist = np.hypot(p[..., jj, 0] - p[..., kk, 0], p[..., jj, 1] - p[..., kk, 1])
    need = (p[..., jj, 2] + p[..., kk, 2]) / np.tan(np.radians(theta_star))
    return need - dist


def penalized_utility(positions, ctx: PlacementContext, weight: float = 1e3,
                      form: str = HINGE):
    """Sum-log utility at fixed (x, alpha) for candidate DBS positions, minus penalties.

    ``positions`` has shape (M, 3) or (P, M, 3) for a batch of candidates.
    The hinge form subtracts ``weight * sum(max(0, v)**2)`` over separation,
    footprint and backhaul violations; the verbatim form subtracts the
    signed slacks unweighted.
    """
    p = np.asarray(positions, dtype=float)
    single = p.ndim == 2
    if single:
        p = p[None]
    net = ctx.network
    theta_star = net.theta_star
    x = ctx.x
    load = x.sum(axis=0)
    share = np.where(load > 0, (1.0 - ctx.alpha) / np.where(load > 0, load, 1.0), 0.0)

    gamma, theta, backhaul = dbs_links(ctx.user_xy, p, net.dbs_power, net.theta_b, ctx.mbs_pos,
                                       ctx.mbs_rx, net.mbs_power, ctx.env, EXPECTED)
    r_dbs = np.log2(1.0 + gamma)  # (P, N, M)
    r_mbs = np.log2(1.0 + ctx.mbs_rx / ctx.env.noise_mw)
    rate = x[:, 0] * share[0] * r_mbs + np.sum(x[:, 1:] * share[1:] * r_dbs, axis=-1)
    value = np.sum(np.log(np.maximum(rate, ctx.rate_floor)), axis=-1)

    sep = separation_violation(p, theta_star)
    foot = x[:, 1:] * (theta_star - theta)
    carried = np.sum(x[:, 1:] * share[1:] * r_dbs, axis=-2)
    bh = carried - ctx.alpha * backhaul
    if form == HINGE:
        pen = (np.sum(np.maximum(sep, 0.0) ** 2, axis=-1)
               + np.sum(np.maximum(foot, 0.0) ** 2, axis=(-2, -1))
               + np.sum(np.maximum(bh, 0.0) ** 2, axis=-1))
        value = value - weight * pen
    elif form == VERBATIM:
        # ordered pairs j != j', as in the printed penalty
        value = value - 2.0 * np.sum(-sep * np.tan(np.radians(theta_star)), axis=-1)
        value = value - np.sum(-bh + np.sum(foot, axis=-2), axis=-1)
    else:
        raise ValueError(f"unknown penalty form {form!r}")
    return float(value[0]) if single else value


def pso_optimize(initial_positions, ctx: PlacementContext, cfg: SwarmConfig = SwarmConfig(),
                 rng=None):
    """Global-best PSO over DBS positions.

    Particle 0 starts exactly at ``initial_positions``; the others start at
    uniform perturbations of it within one velocity limit. Returns
    ``(best_positions, best_score, history)`` where ``history`` holds the
    global-best score after initialization and after each iteration.
    """
    rng = np.random.default_rng(rng)
    x0 = np.asarray(initial_positions, dtype=float)
    lo = np.broadcast_to(ctx.lower, x0.shape)
    hi = np.broadcast_to(ctx.upper, x0.shape)
    v_max = cfg.v_max_fraction * ctx.region.diagonal
    p = np.clip(x0 + rng.uniform(-v_max, v_max, (cfg.swarm_size, *x0.shape)), lo, hi)
    p[0] = x0
    v = rng.uniform(-v_max, v_max, p.shape) * 0.1
    v[0] = 0.0

    def score(pos):
        return penalized_utility(pos, ctx, cfg.penalty_weight, cfg.penalty_form)

    pbest, pbest_score = p.copy(), score(p)
    g = int(np.argmax(pbest_score))
    gbest, gbest_score = pbest[g].copy(), float(pbest_score[g])
    history = [gbest_score]
    for _ in range(cfg.max_iters):
        u1 = rng.random(p.shape)
        u2 = rng.random(p.shape)
        v = cfg.inertia * v + cfg.c1 * u1 * (pbest - p) + cfg.c2 * u2 * (gbest - p)
        v = np.clip(v, -v_max, v_max)
        p = np.clip(p + v, lo, hi)
        s = score(p)
        better = s > pbest_score
        pbest[better] = p[better]
        pbest_score[better] = s[better]
        g = int(np.argmax(pbest_score))
        if pbest_score[g] > gbest_score:
            gbest, gbest_score = pbest[g].copy(), float(pbest_score[g])
        history.append(gbest_score)
    return gbest, gbest_score, history


def enforce_separation(positions, network: NetworkConfig, region: Region, max_rounds: int = 50):
    """Repair DBS positions so no two antenna footprints overlap.

    Offending pairs first have their altitudes scaled down (not below
    ``h_min``); pairs that still overlap are pushed apart horizontally.
    """
    p = np.array(positions, dtype=float).reshape(-1, 3)
    m = len(p)
    if m < 2:
        return p
    k = network.separation_factor
    lo, hi = region.lower, region.upper
    for _ in range(max_rounds):
        changed = False
        for j in range(m):
            for l in range(j + 1, m):
                vec = p[l, :2] - p[j, :2]
                dist = float(np.hypot(*vec))
                need = (p[j, 2] + p[l, 2]) * k
                if need <= dist:
                    continue
                changed = True
                scale = dist / need
                p[j, 2] = max(network.h_min, p[j, 2] * scale)
                p[l, 2] = max(network.h_min, p[l, 2] * scale)
                need = (p[j, 2] + p[l, 2]) * k
                if need > dist:
                    u = vec / dist if dist > 0 else np.array([1.0, 0.0])
                    push = 0.5 * (need - dist) * (1.0 + 1e-9) + 1e-9
                    p[j, :2] = np.clip(p[j, :2] - push * u, lo, hi)
                    p[l, :2] = np.clip(p[l, :2] + push * u, lo, hi)
        if not changed:
            break
    return p
