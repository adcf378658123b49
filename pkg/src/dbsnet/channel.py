"""Propagation, antenna and link-rate models for the MBS / drone-BS downlink.

DBS access links use free-space loss plus an elevation-dependent excess loss
(LoS/NLoS mixture). MBS access links use the 3GPP macro model. DBS backhaul
links to the MBS are free-space only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

EXPECTED = "expected"
SAMPLED = "sampled"
_MODES = (EXPECTED, SAMPLED)


class ConfigurationError(ValueError):
    """Raised for an inconsistent network or scenario configuration."""


@dataclass(frozen=True)
class Environment:
    """Urban air-to-ground environment and link-budget constants."""

    a: float = 9.61
    b: float = 0.16
    mu_los: float = 1.0
    k_los: float = 10.39
    l_los: float = 0.05
    mu_nlos: float = 20.0
    k_nlos: float = 29.6
    l_nlos: float = 0.03
    f_c: float = 2e9
    c: float = SPEED_OF_LIGHT
    mbs_shadow_sigma: float = 10.0
    noise_psd: float = -174.0  # dBm/Hz
    system_bandwidth: float = 10e6  # Hz
    mbs_height: float = 25.0
    exclude_mbs_interference: bool = False

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError("a and b must be positive")
        if not self.mu_los < self.mu_nlos:
            raise ConfigurationError("mu_los must be below mu_nlos")
        if min(self.k_los, self.l_los, self.k_nlos, self.l_nlos) <= 0:
            raise ConfigurationError("k_* and l_* must be positive")
        if self.f_c <= 0 or self.c <= 0 or self.system_bandwidth <= 0:
            raise ConfigurationError("f_c, c and system_bandwidth must be positive")

    @property
    def noise_dbm(self) -> float:
        return self.noise_psd + 10.0 * np.log10(self.system_bandwidth)

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_dbm / 10.0)


@dataclass(frozen=True)
class BaseStation:
    """A macro BS (id 0, omni antenna) or a drone BS (directional antenna).

    ``position`` is (x, y, altitude) in meters; ``theta_b`` is the half-power
    beamwidth in degrees and is ``None`` for the omni MBS.
    """

    id: int
    kind: str
    position: tuple[float, float, float]
    tx_power: float
    theta_b: float | None = None

    def __post_init__(self):
        if self.kind not in ("MBS", "DBS"):
            raise ConfigurationError(f"unknown base-station kind {self.kind!r}")
        if self.kind == "MBS":
            if self.id != 0:
                raise ConfigurationError("the MBS must have id 0")
        else:
            if self.id < 1:
                raise ConfigurationError("DBS ids start at 1")
            if self.theta_b is None or not 0 < self.theta_b < 180:
                raise ConfigurationError("DBS beamwidth must lie in (0, 180) degrees")
            if self.position[2] <= 0:
                raise ConfigurationError("DBS altitude must be positive")


def make_mbs(xy: Sequence[float], env: Environment = Environment(), tx_power: float = 46.0) -> BaseStation:
    return BaseStation(0, "MBS", (float(xy[0]), float(xy[1]), env.mbs_height), tx_power)


def make_dbs(positions, theta_b: float, tx_power: float = 36.0) -> list[BaseStation]:
    return [
        BaseStation(j + 1, "DBS", tuple(float(v) for v in p), tx_power, theta_b)
        for j, p in enumerate(np.asarray(positions, dtype=float).reshape(-1, 3))
    ]


@dataclass(frozen=True)
class LinkMatrix:
    """Per-(user, BS) link quantities; column 0 is the MBS.

    r : (N, M+1) spectral efficiency, bits/s/Hz
    gamma : (N, M+1) linear SINR (SNR for the MBS column)
    backhaul_rate : (M,) MBS-to-DBS spectral efficiency
    elevation : (N, M) user-to-DBS elevation angle, degrees
    """

    r: np.ndarray
    gamma: np.ndarray
    backhaul_rate: np.ndarray
    elevation: np.ndarray = field(repr=False)

    @property
    def num_users(self) -> int:
        return self.r.shape[0]

    @property
    def num_dbs(self) -> int:
        return self.r.shape[1] - 1


def _check_mode(mode: str):
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def fspl_db(d, f_c: float, c: float = SPEED_OF_LIGHT):
    """Friis free-space path loss in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or f_c <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    out = 20.0 * np.log10(4.0 * np.pi * f_c * d / c)
    return float(out) if out.ndim == 0 else out


def elevation_angle(user_xy, dbs_pos):
    """Elevation angle in degrees from ground user(s) to a DBS; 90 directly beneath."""
    user_xy = np.asarray(user_xy, dtype=float)
    dbs_pos = np.asarray(dbs_pos, dtype=float)
    delta = np.hypot(user_xy[..., 0] - dbs_pos[..., 0], user_xy[..., 1] - dbs_pos[..., 1])
    out = np.degrees(np.arctan2(dbs_pos[..., 2], delta))
    return float(out) if out.ndim == 0 else out


def p_los(theta, env: Environment = Environment()):
    """Probability of a line-of-sight air-to-ground link at elevation ``theta`` (deg)."""
    theta = np.asarray(theta, dtype=float)
    out = 1.0 / (1.0 + env.a * np.exp(-env.b * (theta - env.a)))
    return float(out) if out.ndim == 0 else out


def a2g_excess_loss(theta, env: Environment = Environment(), mode: str = EXPECTED, rng=None):
    """Excess air-to-ground loss in dB on top of free-space loss.

    In expected mode the LoS/NLoS means are weighted by the LoS probability.
    In sampled mode the link class is drawn first, then a Gaussian loss with
    spread ``k * exp(-l * theta)``.
    """
    _check_mode(mode)
    theta = np.asarray(theta, dtype=float)
    pl = p_los(theta, env)
    if mode == EXPECTED:
        out = pl * env.mu_los + (1.0 - pl) * env.mu_nlos
    else:
        rng = np.random.default_rng(rng)
        los = rng.random(theta.shape) < pl
        mu = np.where(los, env.mu_los, env.mu_nlos)
        sigma = np.where(los, env.k_los * np.exp(-env.l_los * theta),
                         env.k_nlos * np.exp(-env.l_nlos * theta))
        out = mu + sigma * rng.standard_normal(theta.shape)
    return float(out) if np.ndim(out) == 0 else out


def footprint_threshold(theta_b: float) -> float:
    """Minimum elevation angle (deg) inside a DBS antenna footprint."""
    return 90.0 - theta_b / 2.0


def antenna_gain(theta, theta_b: float):
    """Linear directional-antenna gain: 30000/theta_b**2 inside the cone, else 0."""
    theta = np.asarray(theta, dtype=float)
    out = np.where(theta >= footprint_threshold(theta_b), 30000.0 / theta_b**2, 0.0)
    return float(out) if out.ndim == 0 else out


def mbs_path_loss_db(d, mode: str = EXPECTED, env: Environment = Environment(), rng=None):
    """3GPP TR 36.942 macro path loss with optional lognormal shadowing."""
    _check_mode(mode)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 128.1 + 37.6 * np.log10(d / 1000.0)
    if mode == SAMPLED:
        out = out + env.mbs_shadow_sigma * np.random.default_rng(rng).standard_normal(d.shape)
    return float(out) if np.ndim(out) == 0 else out


def _db_to_lin(x):
    return 10.0 ** (np.asarray(x) / 10.0)


def mbs_access_power(user_xy, mbs_pos, tx_power: float, env: Environment,
                     mode: str = EXPECTED, rng=None) -> np.ndarray:
    """Received MBS power (mW) at each user."""
    user_xy = np.asarray(user_xy, dtype=float)
    d = np.sqrt(np.sum((user_xy - mbs_pos[:2]) ** 2, axis=-1) + mbs_pos[2] ** 2)
    return _db_to_lin(tx_power - mbs_path_loss_db(d, mode, env, rng))


def dbs_links(user_xy, dbs_pos, dbs_power, theta_b, mbs_pos, mbs_rx, p0: float,
              env: Environment, mode: str = EXPECTED, rng=None):
    """Vectorized DBS-side link quantities.

    ``dbs_pos`` may carry leading batch dimensions, shape (..., M, 3), so a
    whole swarm of candidate placements is evaluated in one call. ``mbs_rx``
    is the received MBS power at each user, shape (N,).

    Returns (gamma (..., N, M), elevation (..., N, M), backhaul_rate (..., M)).
    """
    user_xy = np.asarray(user_xy, dtype=float)
    dbs_pos = np.asarray(dbs_pos, dtype=float)
    dbs_power = np.broadcast_to(np.asarray(dbs_power, dtype=float), dbs_pos.shape[-2:-1])
    noise = env.noise_mw

    dx = user_xy[:, 0, None] - dbs_pos[..., None, :, 0]
    dy = user_xy[:, 1, None] - dbs_pos[..., None, :, 1]
    h = dbs_pos[..., None, :, 2]
    delta2 = dx * dx + dy * dy
    theta = np.degrees(np.arctan2(h, np.sqrt(delta2)))
    d3 = np.sqrt(delta2 + h * h)
    loss = fspl_db(d3, env.f_c, env.c) + a2g_excess_loss(theta, env, mode, rng)
    gain = np.where(theta >= footprint_threshold(theta_b), 30000.0 / theta_b**2, 0.0)
    rx = _db_to_lin(dbs_power - loss) * gain

    interference = rx.sum(axis=-1, keepdims=True) - rx
    if not env.exclude_mbs_interference:
        interference = interference + mbs_rx[:, None]
    gamma = rx / (interference + noise)

    bh_d = np.sqrt(np.sum((dbs_pos - mbs_pos) ** 2, axis=-1))
    bh_snr = _db_to_lin(p0 - fspl_db(np.maximum(bh_d, 1e-3), env.f_c, env.c)) / noise
    return gamma, theta, np.log2(1.0 + bh_snr)


def build_link_matrix(users, bss: Sequence[BaseStation], env: Environment = Environment(),
                      mode: str = EXPECTED, rng=None) -> LinkMatrix:
    """Assemble SINR / rate matrices for users against the MBS and every DBS.

    ``users`` is a sequence of objects with a ``position`` attribute or an
    (N, 2) array of ground positions.
    """
    _check_mode(mode)
    mbs = [bs for bs in bss if bs.kind == "MBS"]
    if len(mbs) != 1:
        raise ConfigurationError(f"expected exactly one MBS, found {len(mbs)}")
    mbs = mbs[0]
    dbss = sorted((bs for bs in bss if bs.kind == "DBS"), key=lambda bs: bs.id)
    if [bs.id for bs in dbss] != list(range(1, len(dbss) + 1)):
        raise ConfigurationError("DBS ids must be 1..M")
    beams = {bs.theta_b for bs in dbss}
    if len(beams) > 1:
        raise ConfigurationError("all DBSs must share one beamwidth")
    rng = np.random.default_rng(rng) if mode == SAMPLED else None

    xy = user_positions(users)
    mbs_pos = np.asarray(mbs.position, dtype=float)
    mbs_rx = mbs_access_power(xy, mbs_pos, mbs.tx_power, env, mode, rng)
    n = len(xy)
    gamma = np.empty((n, len(dbss) + 1))
    gamma[:, 0] = mbs_rx / env.noise_mw
    if dbss:
        pos = np.array([bs.position for bs in dbss], dtype=float)
        power = np.array([bs.tx_power for bs in dbss])
        g, theta, backhaul = dbs_links(xy, pos, power, dbss[0].theta_b, mbs_pos, mbs_rx,
                                       mbs.tx_power, env, mode, rng)
        gamma[:, 1:] = g
    else:
        theta = np.empty((n, 0))
        backhaul = np.empty(0)
    return LinkMatrix(np.log2(1.0 + gamma), gamma, backhaul, theta)


def user_positions(users) -> np.ndarray:
    if isinstance(users, np.ndarray):
        return np.asarray(users, dtype=float).reshape(-1, 2)
    return np.array([u.position for u in users], dtype=float).reshape(-1, 2)
