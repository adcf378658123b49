"""Joint placement, association and bandwidth split.

Alternates the fixed-alpha association subproblem with the closed-form
backhaul share at fixed DBS positions, then moves the DBSs with PSO against
the frozen association, and repeats while the utility keeps improving.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .association import (RATE_FLOOR, Association, UtilityReport, evaluate, feasible_sets,
                          improve_association, optimal_alpha, round_association,
                          solve_relaxed)
from .channel import EXPECTED, Environment, LinkMatrix, build_link_matrix, make_dbs, make_mbs
from .constraints import violations
from .placement import (NetworkConfig, PlacementContext, SwarmConfig, enforce_separation,
                        pso_optimize)
from .scenario import Region, User, kmeans_init

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlgoConfig:
    """Stopping rules; ``epsilon`` and ``nu`` are relative to |utility|."""

    epsilon: float = 1e-3
    nu: float = 1e-3
    alpha_init: float = 0.5
    max_inner: int = 20
    max_outer: int = 10
    rate_floor: float = RATE_FLOOR
    fw_tol: float = 1e-6
    local_search: bool = True

    def __post_init__(self):
        if self.epsilon <= 0 or self.nu <= 0:
            raise ValueError("epsilon and nu must be positive")
        if not 0.0 <= self.alpha_init < 1.0:
            raise ValueError("alpha_init must lie in [0, 1)")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass
class Solution:
    dbs_positions: np.ndarray
    association: Association
    alpha: float
    report: UtilityReport
    link: LinkMatrix
    trace: list = field(default_factory=list)
    pso_histories: list = field(default_factory=list)

    @property
    def utility(self) -> float:
        return self.report.utility

    @property
    def serving_bs(self) -> np.ndarray:
        return self.association.serving_bs

    def outer_checkpoints(self) -> list[float]:
        return [u for stage, _, _, u, _ in self.trace if stage == "outer"]


def _link(xy, positions, region, env, network):
    bss = [make_mbs(region.mbs_position, env, network.mbs_power)]
    if len(positions):
        bss += make_dbs(positions, network.theta_b, network.dbs_power)
    return build_link_matrix(xy, bss, env, EXPECTED)


def _inner_loop(link, feasible, alpha, cfg: AlgoConfig, trace, outer):
    """Subproblem / master alternation at fixed positions; returns the best iterate."""
    best = None
    prev = -np.inf
    for t in range(cfg.max_inner):
        relaxed = solve_relaxed(link, feasible, alpha, tol=cfg.fw_tol)
        xb = round_association(relaxed.association.x, link, feasible, alpha)
        if cfg.local_search:
            xb, alpha = improve_association(xb, link, feasible)
            xb = Association(xb, alpha, True)
        else:
            alpha = optimal_alpha(xb, link)
        report = evaluate(xb.x, alpha, link, cfg.rate_floor)
        u = report.utility
        trace.append(("inner", outer, t, u, alpha))
        _emit("inner", outer, t, u, alpha)
        if best is None or u > best[2].utility:
            best = (xb.x, alpha, report)
        if u - prev < cfg.epsilon * abs(u):
            break
        prev = u
    return best


def _emit(stage, outer, t, u, alpha):
    if log.isEnabledFor(logging.DEBUG):
        log.debug(json.dumps({"stage": stage, "t_outer": outer, "t": t, "utility": u, "alpha": alpha}))


def run(users, region: Region = Region(), num_dbs: int = 3, env: Environment = Environment(),
        cfg: AlgoConfig = AlgoConfig(), swarm_cfg: SwarmConfig = SwarmConfig(), rng=None,
        network: NetworkConfig = NetworkConfig()) -> Solution:
    """Place ``num_dbs`` drone BSs and associate ``users``.

    The best feasible iterate seen is returned, so outer checkpoint utilities
    never decrease.
    """
    if num_dbs < 0:
        raise ValueError("num_dbs must be non-negative")
    rng = np.random.default_rng(rng)
    users = list(users)
    xy = np.array([u.position for u in users], dtype=float).reshape(-1, 2)
    tau = np.array([u.tau for u in users], dtype=int)
    theta_star = network.theta_star
    trace: list = []
    histories: list = []

    if num_dbs == 0:
        positions = np.empty((0, 3))
    else:
        positions = kmeans_init(users, num_dbs, rng, network.theta_b, network.h_min, network.h_max)
        positions = enforce_separation(positions, network, region)

    best = None
    prev_outer = -np.inf
    for outer in range(cfg.max_outer):
        link = _link(xy, positions, region, env, network)
        feasible = feasible_sets(tau, link, theta_star)
        # backhaul rates change with the placement, so alpha restarts each round
        x, alpha, report = _inner_loop(link, feasible, cfg.alpha_init, cfg, trace, outer)
        u = report.utility
        if not violations(x, alpha, link, tau, positions, theta_star):
            if best is None or u > best.utility:
                best = Solution(positions.copy(), Association(x, alpha, True), alpha, report, link)
        if best is not None:
            trace.append(("outer", outer, 0, best.utility, best.alpha))
            _emit("outer", outer, 0, best.utility, best.alpha)
        if num_dbs == 0 or outer + 1 == cfg.max_outer:
            break
        if outer > 0 and u - prev_outer < cfg.nu * abs(u):
            break
        prev_outer = u
        ctx = PlacementContext(xy, x, alpha, region, network, env, cfg.rate_floor)
        moved, _, history = pso_optimize(positions, ctx, swarm_cfg, rng)
        histories.append(history)
        positions = enforce_separation(moved, network, region)

    if best is None:
        raise AssertionError("no feasible iterate was produced")
    best.trace = trace
    best.pso_histories = histories
    return best
