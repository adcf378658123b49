"""Loading, defaulting and range-checking of experiment configuration files."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .channel import Environment
from .orchestrator import AlgoConfig
from .placement import HINGE, VERBATIM, NetworkConfig, SwarmConfig
from .scenario import MaternConfig, Region

EXPERIMENTS = ("rate-cdf", "association-count", "beamwidth-sweep", "single-run")

_AREA = Region().area

# target mean CoV over 200 drops of 60 users in the default 500 m x 500 m region
DEFAULT_PRESETS = {
    "low": {"target_cov": 1.4, "parent_intensity": 25 / _AREA, "cluster_radius": 110.0,
            "daughters_per_cluster_mean": 2.9},
    "mid": {"target_cov": 2.3, "parent_intensity": 10 / _AREA, "cluster_radius": 30.0,
            "daughters_per_cluster_mean": 7.2},
    "high": {"target_cov": 3.3, "parent_intensity": 2 / _AREA, "cluster_radius": 90.0,
             "daughters_per_cluster_mean": 30.0},
}

_EXPERIMENT_DEFAULTS = {
    "rate-cdf": {"target_cov": ["low", "high"], "num_dbs": [3], "theta_b": [60.0]},
    "association-count": {"target_cov": ["low", "mid", "high"], "num_dbs": [3], "theta_b": [60.0]},
    "beamwidth-sweep": {"target_cov": ["mid"], "num_dbs": [2, 3], "theta_b": [40.0, 60.0, 80.0]},
    "single-run": {"target_cov": ["high"], "num_dbs": [3], "theta_b": [60.0]},
}

INF = float("inf")

# key: (kind, low, high, low_inclusive, high_inclusive)
_RULES = {
    "environment": {
        "a": ("float", 0, INF, False, True), "b": ("float", 0, INF, False, True),
        "mu_los": ("float", -INF, INF, True, True), "mu_nlos": ("float", -INF, INF, True, True),
        "k_los": ("float", 0, INF, False, True), "l_los": ("float", 0, INF, False, True),
        "k_nlos": ("float", 0, INF, False, True), "l_nlos": ("float", 0, INF, False, True),
        "f_c": ("float", 0, INF, False, True), "c": ("float", 0, INF, False, True),
        "mbs_shadow_sigma": ("float", 0, INF, True, True),
        "noise_psd": ("float", -INF, INF, True, True),
        "system_bandwidth": ("float", 0, INF, False, True),
        "mbs_height": ("float", 0, INF, False, True),
        "exclude_mbs_interference": ("bool",),
    },
    "region": {
        "width": ("float", 0, INF, False, True), "height": ("float", 0, INF, False, True),
        "origin": ("pair",),
    },
    "network": {
        "mbs_power": ("float", -INF, INF, True, True), "dbs_power": ("float", -INF, INF, True, True),
        "h_min": ("float", 0, INF, False, True), "h_max": ("float", 0, INF, False, True),
    },
    "algorithm": {
        "epsilon": ("float", 0, INF, False, True), "nu": ("float", 0, INF, False, True),
        "alpha_init": ("float", 0, 1, True, False),
        "max_inner": ("int", 1, INF, True, True), "max_outer": ("int", 1, INF, True, True),
        "rate_floor": ("float", 0, INF, False, True), "fw_tol": ("float", 0, INF, False, True),
        "local_search": ("bool",),
    },
    "swarm": {
        "swarm_size": ("int", 2, INF, True, True), "inertia": ("float", 0, 1, False, False),
        "c1": ("float", 0, INF, False, True), "c2": ("float", 0, INF, False, True),
        "max_iters": ("int", 0, INF, True, True), "penalty_weight": ("float", 0, INF, False, True),
        "v_max_fraction": ("float", 0, INF, False, True), "penalty_form": ("choice", (HINGE, VERBATIM)),
    },
    "experiment": {
        "name": ("choice", EXPERIMENTS), "seeds": ("int", 1, INF, True, True),
        "master_seed": ("int", 0, INF, True, True), "num_users": ("int", 2, INF, True, True),
        "p_delay": ("float", 0, 1, True, True), "workers": ("int", 1, INF, True, True),
        "output_dir": ("str",),
        "target_cov": ("list", "str"), "num_dbs": ("list", "int", 0), "theta_b": ("list", "theta"),
    },
}
_PRESET_RULES = {
    "target_cov": ("float", 0, INF, False, True),
    "parent_intensity": ("float", 0, INF, False, True),
    "cluster_radius": ("float", 0, INF, False, True),
    "daughters_per_cluster_mean": ("float", 0, INF, False, True),
}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration value."""


@dataclass(frozen=True)
class Preset:
    target_cov: float
    matern: MaternConfig


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment: what to run plus every model parameter."""

    name: str = "single-run"
    seeds: int = 100
    master_seed: int = 0
    target_cov: tuple[str, ...] = ("high",)
    num_dbs: tuple[int, ...] = (3,)
    theta_b: tuple[float, ...] = (60.0,)
    output_dir: str = "results"
    num_users: int = 60
    p_delay: float = 0.2
    workers: int = 1
    environment: Environment = Environment()
    region: Region = Region()
    network: NetworkConfig = NetworkConfig()
    algorithm: AlgoConfig = AlgoConfig()
    swarm: SwarmConfig = SwarmConfig()
    presets: dict = field(default_factory=dict)

    def preset(self, label: str) -> Preset:
        try:
            return self.presets[label]
        except KeyError:
            raise ConfigError(f"unknown CoV preset {label!r}; available: {sorted(self.presets)}") from None

    def network_for(self, theta_b: float) -> NetworkConfig:
        return replace(self.network, theta_b=float(theta_b))

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("name", "seeds", "master_seed", "output_dir",
                                             "num_users", "p_delay", "workers")}
        out["target_cov"] = list(self.target_cov)
        out["num_dbs"] = list(self.num_dbs)
        out["theta_b"] = list(self.theta_b)
        network = asdict(self.network)
        network.pop("theta_b")
        region = asdict(self.region)
        region["origin"] = list(region["origin"])
        return {
            "environment": asdict(self.environment),
            "region": region,
            "network": network,
            "algorithm": asdict(self.algorithm),
            "swarm": asdict(self.swarm),
            "matern_presets": {
                k: {"target_cov": p.target_cov, "parent_intensity": p.matern.parent_intensity,
                    "cluster_radius": p.matern.cluster_radius,
                    "daughters_per_cluster_mean": p.matern.daughters_per_cluster_mean}
                for k, p in sorted(self.presets.items())},
            "experiment": out,
        }


def _check_scalar(path, value, rule):
    kind = rule[0]
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind == "choice":
        if value not in rule[1]:
            raise ConfigError(f"{path}: {value!r} not one of {list(rule[1])}")
        return value
    if kind == "pair":
        if (not isinstance(value, (list, tuple)) or len(value) != 2
                or not all(_is_number(v) for v in value)):
            raise ConfigError(f"{path}: expected [x, y], got {value!r}")
        return (float(value[0]), float(value[1]))
    if kind == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if kind == "float" and not _is_number(value):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    lo, hi, lo_in, hi_in = rule[1:]
    ok_lo = value >= lo if lo_in else value > lo
    ok_hi = value <= hi if hi_in else value < hi
    if not (ok_lo and ok_hi):
        interval = f"{'[' if lo_in else '('}{lo}, {hi}{']' if hi_in else ')'}"
        raise ConfigError(f"{path}={value!r} outside allowed range {interval}")
    return float(value) if kind == "float" else value


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_list(path, value, rule):
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{path}: list must be nonempty")
    kind = rule[1]
    out = []
    for k, item in enumerate(items):
        p = f"{path}[{k}]" if isinstance(value, list) else path
        if kind == "str":
            out.append(str(_check_scalar(p, item, ("str",))))
        elif kind == "int":
            out.append(_check_scalar(p, item, ("int", rule[2], INF, True, True)))
        else:
            out.append(_check_scalar(p, item, ("float", 0, 180, False, False)))
    return tuple(out)


def _section(raw, name):
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected an object")
    rules = _RULES[name]
    out = {}
    for key, value in sec.items():
        if key not in rules:
            raise ConfigError(f"{name}.{key}: unknown key; allowed: {sorted(rules)}")
        rule = rules[key]
        if rule[0] == "list":
            out[key] = _check_list(f"{name}.{key}", value, rule)
        else:
            out[key] = _check_scalar(f"{name}.{key}", value, rule)
    return out


def resolve(raw: dict) -> ExperimentSpec:
    """Validate a parsed configuration mapping and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    allowed = set(_RULES) | {"matern_presets"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown section; allowed: {sorted(allowed)}")
    sections = {name: _section(raw, name) for name in _RULES}

    presets_raw = {k: dict(v) for k, v in DEFAULT_PRESETS.items()}
    user_presets = raw.get("matern_presets", {})
    if not isinstance(user_presets, dict):
        raise ConfigError("matern_presets: expected an object")
    for label, body in user_presets.items():
        if not isinstance(body, dict):
            raise ConfigError(f"matern_presets.{label}: expected an object")
        merged = dict(presets_raw.get(label, {}))
        for key, value in body.items():
            if key not in _PRESET_RULES:
                raise ConfigError(f"matern_presets.{label}.{key}: unknown key; allowed: {sorted(_PRESET_RULES)}")
            merged[key] = _check_scalar(f"matern_presets.{label}.{key}", value, _PRESET_RULES[key])
        missing = set(_PRESET_RULES) - set(merged)
        if missing:
            raise ConfigError(f"matern_presets.{label}: missing {sorted(missing)}")
        presets_raw[label] = merged

    exp = sections["experiment"]
    name = exp.get("name", "single-run")
    defaults = _EXPERIMENT_DEFAULTS[name]
    num_users = exp.get("num_users", 60)
    presets = {
        label: Preset(p["target_cov"], MaternConfig(p["parent_intensity"], p["cluster_radius"],
                                                    p["daughters_per_cluster_mean"], num_users))
        for label, p in presets_raw.items()}

    env_kw = sections["environment"]
    env_defaults = Environment()
    if env_kw.get("mu_los", env_defaults.mu_los) >= env_kw.get("mu_nlos", env_defaults.mu_nlos):
        raise ConfigError("environment.mu_los must be below environment.mu_nlos")
    net_kw = sections["network"]
    if net_kw.get("h_min", 10.0) > net_kw.get("h_max", 500.0):
        raise ConfigError("network.h_min must not exceed network.h_max")

    spec = ExperimentSpec(
        name=name,
        seeds=exp.get("seeds", 100),
        master_seed=exp.get("master_seed", 0),
        target_cov=tuple(exp.get("target_cov", defaults["target_cov"])),
        num_dbs=tuple(exp.get("num_dbs", defaults["num_dbs"])),
        theta_b=tuple(float(t) for t in exp.get("theta_b", defaults["theta_b"])),
        output_dir=exp.get("output_dir", "results"),
        num_users=num_users,
        p_delay=exp.get("p_delay", 0.2),
        workers=exp.get("workers", 1),
        environment=Environment(**env_kw),
        region=Region(**sections["region"]),
        network=NetworkConfig(**net_kw),
        algorithm=AlgoConfig(**sections["algorithm"]),
        swarm=SwarmConfig(**sections["swarm"]),
        presets=presets,
    )
    for label in spec.target_cov:
        spec.preset(label)
    return spec


def load_raw(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def validate_config(path) -> ExperimentSpec:
    """Parse a JSON config file into a normalized, fully defaulted ExperimentSpec."""
    return resolve(load_raw(path))


def nearest_preset(spec: ExperimentSpec, value) -> str:
    """Preset key for a label, or for a numeric CoV the preset with the closest target."""
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            spec.preset(value)
            return value
    return min(spec.presets, key=lambda k: (abs(spec.presets[k].target_cov - value), k))

