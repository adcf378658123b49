"""User drops, spatial heterogeneity, and initial DBS placement."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2

from .channel import ConfigurationError, footprint_threshold

COV_POISSON_NORMALIZER = 0.529


class GenerationError(RuntimeError):
    """The point process could not produce the requested number of users."""


@dataclass(frozen=True)
class User:
    id: int
    position: tuple[float, float]
    tau: int = 0


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle ``[x0, x0+width] x [y0, y0+height]``; MBS at the center."""

    width: float = 500.0
    height: float = 500.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError("region dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def mbs_position(self) -> tuple[float, float]:
        return (self.origin[0] + self.width / 2, self.origin[1] + self.height / 2)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + (self.width, self.height)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    def contains(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.all((xy >= self.lower) & (xy <= self.upper), axis=-1)


@dataclass(frozen=True)
class MaternConfig:
    """Matérn cluster process: Poisson parents, Poisson daughters uniform in a disk."""

    parent_intensity: float
    cluster_radius: float
    daughters_per_cluster_mean: float
    total_users: int = 60

    def __post_init__(self):
        if min(self.parent_intensity, self.cluster_radius, self.daughters_per_cluster_mean) <= 0:
            raise ConfigurationError("Matérn parameters must be positive")
        if self.total_users < 1:
            raise ConfigurationError("total_users must be positive")


def matern_points(cfg: MaternConfig, region: Region, rng) -> np.ndarray:
    """One realization of the cluster process restricted to ``region``."""
    n_parents = rng.poisson(cfg.parent_intensity * region.area)
    parents = region.lower + rng.random((n_parents, 2)) * (region.width, region.height)
    counts = rng.poisson(cfg.daughters_per_cluster_mean, n_parents)
    centers = np.repeat(parents, counts, axis=0)
    rad = cfg.cluster_radius * np.sqrt(rng.random(len(centers)))
    ang = 2 * np.pi * rng.random(len(centers))
    pts = centers + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    return pts[region.contains(pts)]


def generate_users(cfg: MaternConfig, region: Region = Region(), p_delay: float = 0.2,
                   rng=None, max_attempts: int = 1000) -> list[User]:
    """Draw exactly ``cfg.total_users`` users from the cluster process.

    Realizations with too few in-region points are redrawn; the first one with
    enough points is thinned uniformly at random down to the target count.
    Each user is delay-sensitive with probability ``p_delay``.
    """
    if not 0.0 <= p_delay <= 1.0:
        raise ValueError("p_delay must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    for _ in range(max_attempts):
        pts = matern_points(cfg, region, rng)
        if len(pts) >= cfg.total_users:
            break
    else:
        raise GenerationError(
            f"no realization reached {cfg.total_users} users in {max_attempts} attempts")
    keep = np.sort(rng.choice(len(pts), cfg.total_users, replace=False))
    return _make_users(pts[keep], rng.random(cfg.total_users) < p_delay)


def uniform_users(n: int, region: Region = Region(), p_delay: float = 0.2, rng=None) -> list[User]:
    """``n`` users placed independently and uniformly (the Poisson reference case)."""
    rng = np.random.default_rng(rng)
    pts = region.lower + rng.random((n, 2)) * (region.width, region.height)
    return _make_users(pts, rng.random(n) < p_delay)


def _make_users(pts, tau):
    return [User(i, (float(p[0]), float(p[1])), int(t)) for i, (p, t) in enumerate(zip(pts, tau))]


def voronoi_areas(xy, region: Region = Region(), grid_resolution: int = 500) -> np.ndarray:
    """Discrete Voronoi cell areas: each grid cell goes to its nearest user.

    Ties go to the lowest user index.
    """
    xy = np.asarray(xy, dtype=float)
    res = grid_resolution
    cx = region.origin[0] + (np.arange(res) + 0.5) * region.width / res
    cy = region.origin[1] + (np.arange(res) + 0.5) * region.height / res
    owner = np.empty((res, res), dtype=np.intp)
    # row blocks keep the distance tensor small
    block = max(1, 2_000_000 // max(1, res * len(xy)))
    for start in range(0, res, block):
        rows = cy[start:start + block]
        d2 = (cx[None, :, None] - xy[:, 0]) ** 2 + (rows[:, None, None] - xy[:, 1]) ** 2
        owner[start:start + block] = np.argmin(d2, axis=-1)
    cell = (region.width / res) * (region.height / res)
    return np.bincount(owner.ravel(), minlength=len(xy)) * cell


def compute_cov(users, region: Region = Region(), grid_resolution: int = 500) -> float:
    """Normalized coefficient of variation of the users' Voronoi cell areas.

    About 1 for a Poisson drop, larger for clustered users.
    """
    xy = np.array([u.position for u in users], dtype=float) if not isinstance(users, np.ndarray) else users
    if len(xy) < 2:
        raise ValueError("at least two users are required")
    if grid_resolution < 100:
        raise ValueError("grid_resolution must be at least 100")
    areas = voronoi_areas(xy, region, grid_resolution)
    return float(areas.std() / areas.mean() / COV_POISSON_NORMALIZER)


def kmeans_init(users, num_dbs: int, rng=None, theta_b: float = 60.0,
                h_min: float = 10.0, h_max: float = 500.0) -> np.ndarray:
    """Initial DBS positions, shape (num_dbs, 3), from k-means on user locations.

    The altitude of each DBS is chosen so its antenna footprint reaches the
    90th-percentile member distance of its cluster.
    """
    xy = np.array([u.position for u in users], dtype=float).reshape(-1, 2)
    if num_dbs < 1 or len(xy) == 0:
        raise ConfigurationError("k-means needs num_dbs >= 1 and at least one user")
    if num_dbs > len(xy):
        raise ConfigurationError(f"num_dbs={num_dbs} exceeds the number of users ({len(xy)})")
    rng = np.random.default_rng(rng)
    if num_dbs == 1:
        centroids, labels = xy.mean(axis=0, keepdims=True), np.zeros(len(xy), dtype=int)
    else:
        with warnings.catch_warnings():
            # an emptied cluster keeps its previous centroid
            warnings.simplefilter("ignore", UserWarning)
            centroids, labels = kmeans2(xy, num_dbs, iter=100, minit="++", seed=rng, missing="warn")
    tan_star = np.tan(np.radians(footprint_threshold(theta_b)))
    out = np.empty((num_dbs, 3))
    for k in range(num_dbs):
        members = xy[labels == k]
        if len(members):
            radius = np.percentile(np.linalg.norm(members - centroids[k], axis=1), 90)
        else:
            radius = 0.0
        out[k, :2] = centroids[k]
        out[k, 2] = np.clip(radius * tan_star, h_min, h_max)
    return out


def write_users_csv(users, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x_m", "y_m", "tau"])
        for u in users:
            w.writerow([u.id, repr(u.position[0]), repr(u.position[1]), u.tau])
    return path


def read_users_csv(path) -> list[User]:
    with Path(path).open(newline="") as fh:
        return [User(int(row["id"]), (float(row["x_m"]), float(row["y_m"])), int(row["tau"]))
                for row in csv.DictReader(fh)]
