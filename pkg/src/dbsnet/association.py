"""User-BS association and access/backhaul bandwidth split.

For a fixed backhaul share ``alpha`` the relaxed association problem is

    max_x  sum_ij x_ij log(r_ij (1 - alpha)) - sum_j S_j log S_j,   S_j = sum_i x_ij

over row-stochastic ``x`` restricted to each user's feasible BSs and to the
linearized backhaul constraints

    (1 - alpha) sum_i x_ij r_ij <= alpha r_j0 S_j      for every DBS j.

It is solved with away-step Frank-Wolfe and exact line search; the duality
gap certifies the returned objective.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .channel import LinkMatrix

RATE_FLOOR = 1e-12
_S_FLOOR = 1e-300


class InfeasibleError(RuntimeError):
    """No bandwidth split can satisfy the backhaul constraints."""


@dataclass
class Association:
    """Association matrix ``x`` (N, M+1), column 0 the MBS, and backhaul share ``alpha``."""

    x: np.ndarray
    alpha: float
    binary: bool = False

    @property
    def serving_bs(self) -> np.ndarray:
        return np.argmax(self.x, axis=1)

    def loads(self) -> np.ndarray:
        return self.x.sum(axis=0)


@dataclass
class UtilityReport:
    per_user_rate: np.ndarray
    utility: float
    backhaul_slack: np.ndarray
    shares: np.ndarray


class RelaxedSolution(NamedTuple):
    association: Association
    objective: float
    gap: float
    iterations: int


def _taus(users) -> np.ndarray:
    if isinstance(users, np.ndarray):
        return users.astype(int)
    return np.array([u.tau for u in users], dtype=int)


def feasible_sets(users, link: LinkMatrix, theta_star: float) -> np.ndarray:
    """Boolean (N, M+1) mask of BSs each user may associate with.

    The MBS is always allowed. A DBS is allowed for delay-tolerant users whose
    elevation angle reaches ``theta_star``.
    """
    tau = _taus(users)
    mask = np.ones(link.r.shape, dtype=bool)
    mask[:, 1:] = (link.elevation >= theta_star) & (link.r[:, 1:] > 0) & (tau[:, None] == 0)
    return mask


def backhaul_weights(link: LinkMatrix, alpha: float) -> np.ndarray:
    """Coefficients ``w`` with the backhaul constraint reading sum_i x_ij w_ij <= 0."""
    w = (1.0 - alpha) * link.r[:, 1:] - alpha * link.backhaul_rate[None, :]
    return w


def _xlogx(s):
    return np.where(s > 0, s * np.log(np.maximum(s, _S_FLOOR)), 0.0)


def relaxed_objective(x, link: LinkMatrix, alpha: float, mask=None) -> float:
    """sum_ij x_ij log(r_ij (1-alpha) / S_j) for a (possibly fractional) x."""
    c = _log_rates(link, alpha, np.ones_like(x, dtype=bool) if mask is None else mask)
    return float(np.sum(x * c) - np.sum(_xlogx(x.sum(axis=0))))


def _log_rates(link, alpha, mask):
    with np.errstate(divide="ignore"):
        c = np.log(link.r * (1.0 - alpha))
    return np.where(mask, c, 0.0)


class _LinearOracle:
    """Maximizes a linear function over the association polytope.

    The row-wise argmax is exact whenever it happens to respect the backhaul
    rows; otherwise the full LP goes to HiGHS dual simplex.
    """

    def __init__(self, mask, w):
        self.mask = mask
        self.w = w
        self.idx = np.argwhere(mask)
        n, m1 = mask.shape
        nv = len(self.idx)
        self.a_eq = csr_matrix((np.ones(nv), (self.idx[:, 0], np.arange(nv))), shape=(n, nv))
        dbs = self.idx[:, 1] > 0
        ks = np.flatnonzero(dbs)
        self.a_ub = csr_matrix((w[self.idx[ks, 0], self.idx[ks, 1] - 1], (self.idx[ks, 1] - 1, ks)),
                               shape=(m1 - 1, nv))
        self.scale = 1e-10 * max(1.0, float(np.abs(w).max(initial=0.0)))
        self.lp_calls = 0

    def __call__(self, g):
        n = g.shape[0]
        gm = np.where(self.mask, g, -np.inf)
        pick = np.argmax(gm, axis=1)
        s = np.zeros_like(g)
        s[np.arange(n), pick] = 1.0
        if g.shape[1] == 1 or np.all(np.sum(s[:, 1:] * self.w, axis=0) <= self.scale):
            return s
        self.lp_calls += 1
        cost = -g[self.idx[:, 0], self.idx[:, 1]]
        res = linprog(cost, A_ub=self.a_ub, b_ub=np.zeros(self.a_ub.shape[0]),
                      A_eq=self.a_eq, b_eq=np.ones(n), bounds=(0, None), method="highs-ds")
        if res.status != 0:
            raise AssertionError(f"association LP failed: {res.message}")
        s = np.zeros_like(g)
        s[self.idx[:, 0], self.idx[:, 1]] = np.clip(res.x, 0.0, 1.0)
        return s / s.sum(axis=1, keepdims=True)


def _line_search(x_s, d_s, cd, gamma_max, iters=60):
    """Maximize the concave step function on [0, gamma_max] by safeguarded Newton.

    ``x_s``/``d_s`` are column loads and their change along the direction,
    ``cd`` the linear-term derivative (constant in the step).
    """
    active = d_s != 0

    def deriv(gm):
        s = x_s[active] + gm * d_s[active]
        with np.errstate(divide="ignore"):
            logs = np.log(np.maximum(s, 0.0))
        return cd - np.sum(d_s[active] * (logs + 1.0)), np.sum(d_s[active] ** 2 / np.maximum(s, _S_FLOOR))

    if not np.any(active):
        return gamma_max if cd > 0 else 0.0
    hi_val, _ = deriv(gamma_max)
    if hi_val >= 0:
        return gamma_max
    lo, hi = 0.0, gamma_max
    lo_val, _ = deriv(0.0)
    if lo_val <= 0:
        return 0.0
    gm = 0.5 * gamma_max
    for _ in range(iters):
        val, curv = deriv(gm)
        if val > 0:
            lo = gm
        else:
            hi = gm
        if abs(val) < 1e-14 or hi - lo < 1e-15 * max(1.0, gamma_max):
            break
        step = gm + val / curv if curv > 0 else 0.5 * (lo + hi)
        gm = step if lo < step < hi else 0.5 * (lo + hi)
    return gm


def solve_relaxed(link: LinkMatrix, feasible: np.ndarray, alpha: float, tol: float = 1e-6,
                  max_iter: int = 5000) -> RelaxedSolution:
    """Fractional association maximizing the fixed-alpha subproblem.

    Stops once the Frank-Wolfe duality gap falls below ``tol * max(1, |f|)``,
    so the returned objective is within that margin of the optimum.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if np.any(link.r[:, 0] <= 0):
        raise ValueError("every user needs a positive MBS rate")
    mask = np.asarray(feasible, dtype=bool)
    n, m1 = mask.shape
    c = _log_rates(link, alpha, mask)
    w = backhaul_weights(link, alpha)
    oracle = _LinearOracle(mask, w)

    x = np.zeros((n, m1))
    x[:, 0] = 1.0
    vertices = [x.copy()]
    weights = [1.0]
    gap = np.inf
    f = float(np.sum(x * c) - np.sum(_xlogx(x.sum(axis=0))))
    it = 0
    for it in range(1, max_iter + 1):
        load = x.sum(axis=0)
        grad = c - np.log(np.maximum(load, _S_FLOOR)) - 1.0
        grad = np.where(mask, grad, 0.0)
        s = oracle(grad)
        gap = float(np.sum(grad * (s - x)))
        if gap <= tol * max(1.0, abs(f)):
            break
        stack = np.asarray(vertices)
        scores = np.einsum("kij,ij->k", stack, grad)
        away = int(np.argmin(scores))
        away_gap = float(np.sum(grad * x) - scores[away])
        if gap >= away_gap or len(vertices) == 1:
            d, gamma_max, fw_step = s - x, 1.0, True
        else:
            wa = weights[away]
            d, gamma_max, fw_step = x - vertices[away], wa / (1.0 - wa), False
        gamma = _line_search(load, d.sum(axis=0), float(np.sum(c * d)), gamma_max)
        if gamma <= 0.0:
            if fw_step:
                break
            # away direction exhausted; fall back to a plain FW step
            d, gamma_max, fw_step = s - x, 1.0, True
            gamma = _line_search(load, d.sum(axis=0), float(np.sum(c * d)), 1.0)
            if gamma <= 0.0:
                break
        if fw_step:
            weights = [(1.0 - gamma) * wt for wt in weights]
            for k, v in enumerate(vertices):
                if np.array_equal(v, s):
                    weights[k] += gamma
                    break
            else:
                vertices.append(s)
                weights.append(gamma)
        else:
            weights = [(1.0 + gamma) * wt for wt in weights]
            weights[away] -= gamma
        keep = [k for k, wt in enumerate(weights) if wt > 1e-15]
        vertices = [vertices[k] for k in keep]
        weights = [weights[k] for k in keep]
        x = x + gamma * d
        x = np.where(mask, np.maximum(x, 0.0), 0.0)
        f = float(np.sum(x * c) - np.sum(_xlogx(x.sum(axis=0))))
    return RelaxedSolution(Association(x, alpha, False), f, gap, it)


def backhaul_violation(x, link: LinkMatrix, alpha: float) -> np.ndarray:
    """Per-DBS value of (1-alpha) sum_i x_ij r_ij - alpha r_j0 S_j (feasible when <= 0)."""
    return np.sum(x[:, 1:] * backhaul_weights(link, alpha), axis=0)


def round_association(x_frac, link: LinkMatrix, feasible: np.ndarray, alpha: float) -> Association:
    """Binary association by per-user argmax, then backhaul repair toward the MBS.

    Ties go to the lowest BS index. While a DBS overloads its backhaul, its
    member with the smallest fractional weight among those whose access rate
    exceeds the backhaul-share rate is handed to the MBS.
    """
    x_frac = np.asarray(x_frac, dtype=float)
    n = x_frac.shape[0]
    pick = np.argmax(np.where(feasible, x_frac, -1.0), axis=1)
    x = np.zeros_like(x_frac)
    x[np.arange(n), pick] = 1.0
    w = backhaul_weights(link, alpha)
    tol = 1e-12 * max(1.0, float(np.abs(w).max(initial=0.0)))
    for j in range(1, x.shape[1]):
        while np.sum(x[:, j] * w[:, j - 1]) > tol:
            members = np.flatnonzero((x[:, j] == 1.0) & (w[:, j - 1] > 0))
            worst = members[np.argmin(x_frac[members, j])]
            x[worst, j] = 0.0
            x[worst, 0] = 1.0
    return Association(x, alpha, True)


def optimal_alpha(x, link: LinkMatrix) -> float:
    """Smallest backhaul share making every DBS's backhaul carry its access traffic."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    load = x[:, 1:].sum(axis=0)
    used = load > 0
    if not np.any(used):
        return 0.0
    mean_rate = np.sum(x[:, 1:] * link.r[:, 1:], axis=0)[used] / load[used]
    r0 = link.backhaul_rate[used]
    if np.any(r0 <= 0):
        raise InfeasibleError("a loaded DBS has no backhaul capacity")
    return float(max(0.0, np.max(mean_rate / (mean_rate + r0))))


def bandwidth_shares(x, alpha: float) -> np.ndarray:
    load = x.sum(axis=0)
    return np.where(x > 0, x * (1.0 - alpha) / np.where(load > 0, load, 1.0), 0.0)


def evaluate(x, alpha: float, link: LinkMatrix, rate_floor: float = RATE_FLOOR) -> UtilityReport:
    """Per-user rates under equal per-BS sharing, and the sum-log utility."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    y = bandwidth_shares(x, alpha)
    rij = y * link.r
    rates = rij.sum(axis=1)
    utility = float(np.sum(np.log(np.maximum(rates, rate_floor))))
    slack = alpha * link.backhaul_rate - rij[:, 1:].sum(axis=0)
    return UtilityReport(rates, utility, slack, y)


def _binary_utility_terms(assign, logr, r, m1):
    n = np.bincount(assign, minlength=m1).astype(float)
    rows = np.arange(len(assign))
    lsum = np.bincount(assign, weights=logr[rows, assign], minlength=m1)
    tsum = np.bincount(assign, weights=r[rows, assign], minlength=m1)
    return n, lsum, tsum


def _utility_from_sums(n, lsum, tsum, backhaul, n_users):
    """Sum-log utility (and optimal alpha) from per-BS count / log-rate / rate sums.

    Leading axes of the inputs index candidate associations; the last axis is the BS.
    """
    dn = n[..., 1:]
    safe = np.where(dn > 0, dn, 1.0)
    mean = tsum[..., 1:] / safe
    ratio = np.where(dn > 0, mean / (mean + backhaul), 0.0)
    alpha = np.maximum(0.0, ratio.max(axis=-1, initial=0.0))
    u = (lsum.sum(axis=-1) - np.sum(np.where(n > 0, n * np.log(np.where(n > 0, n, 1.0)), 0.0), axis=-1)
         + n_users * np.log1p(-alpha))
    return u, alpha


def improve_association(x, link: LinkMatrix, feasible: np.ndarray, max_rounds: int = 1000):
    """Best-improvement local search over binary associations.

    Neighbors are single-user moves and two-user swaps between BSs, each
    scored with its own closed-form optimal alpha. Returns ``(x, alpha)``.
    """
    x = np.asarray(getattr(x, "x", x), dtype=float)
    n_users, m1 = x.shape
    if m1 == 1 or np.any(link.backhaul_rate <= 0):
        return x, optimal_alpha(x, link)
    # infeasible entries are masked out of every candidate below
    logr = np.where(feasible, np.log(np.where(feasible, link.r, 1.0)), 0.0)
    r = np.where(feasible, link.r, 0.0)
    backhaul = link.backhaul_rate
    assign = np.argmax(x, axis=1)
    rows = np.arange(n_users)
    eye = np.eye(m1)
    n, lsum, tsum = _binary_utility_terms(assign, logr, r, m1)
    current, _ = _utility_from_sums(n, lsum, tsum, backhaul, n_users)
    for _ in range(max_rounds):
        a_onehot = eye[assign]  # (N, M+1)
        own_l = logr[rows, assign][:, None]
        own_t = r[rows, assign][:, None]
        # move user i to BS b
        mv_n = n - a_onehot[:, None, :] + eye[None]
        mv_l = lsum - own_l[:, :, None] * a_onehot[:, None, :] + (logr[:, :, None] * eye[None])
        mv_t = tsum - own_t[:, :, None] * a_onehot[:, None, :] + (r[:, :, None] * eye[None])
        mv_u, _ = _utility_from_sums(mv_n, mv_l, mv_t, backhaul, n_users)
        mv_u = np.where(feasible & (eye[assign] == 0), mv_u, -np.inf)
        # swap users i and k
        # swap: user i takes user k's BS and vice versa
        li = logr[:, assign]  # li[i, k] = log rate of user i at user k's BS
        ti = r[:, assign]
        at_k = eye[assign][None, :, :]
        at_i = eye[assign][:, None, :]
        sw_l = lsum + (li - own_l.T)[:, :, None] * at_k + (li.T - own_l)[:, :, None] * at_i
        sw_t = tsum + (ti - own_t.T)[:, :, None] * at_k + (ti.T - own_t)[:, :, None] * at_i
        sw_n = np.broadcast_to(n, sw_l.shape)
        sw_u, _ = _utility_from_sums(sw_n, sw_l, sw_t, backhaul, n_users)
        ok = (assign[:, None] != assign[None, :]) & feasible[:, assign] & feasible[:, assign].T
        sw_u = np.where(ok, sw_u, -np.inf)
        best_mv = np.unravel_index(np.argmax(mv_u), mv_u.shape)
        best_sw = np.unravel_index(np.argmax(sw_u), sw_u.shape)
        gain_mv, gain_sw = mv_u[best_mv] - current, sw_u[best_sw] - current
        tol = 1e-12 * max(1.0, abs(current))
        if max(gain_mv, gain_sw) <= tol:
            break
        if gain_mv >= gain_sw:
            assign[best_mv[0]] = best_mv[1]
        else:
            i, k = best_sw
            assign[i], assign[k] = assign[k], assign[i]
        n, lsum, tsum = _binary_utility_terms(assign, logr, r, m1)
        current, _ = _utility_from_sums(n, lsum, tsum, backhaul, n_users)
    out = eye[assign]
    return out, optimal_alpha(out, link)
