"""Experiment configuration files: schema, validation, construction.

Configs are TOML (or JSON) with five sections: plant, estimator, mpc,
bounds, run (plus an optional sweep section for seed counts).  The
plant names one of the shipped presets; the mpc section must spell out
N, Q, R so a config is a complete record of the experiment it ran.
Unknown sections or keys are rejected before anything is built.
"""

import dataclasses
import hashlib
import json

import numpy as np
import toml

from .geom import HPolytope
from .sim.quadrotor import WindField, quadrotor_setup
from .sim.run import Experiment, matched_experiment, unmatched_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "build_experiment",
    "sweep_targets",
    "config_hash",
]

PRESETS = ("matched", "unmatched", "quadrotor")

# section -> key -> allowed types (bool checked before int: bool is an int)
SCHEMA = {
    "plant": {
        "preset": str, "w1": float, "w2": float, "sigma2": float,
        "theta_deg": float, "v0": float, "ell": float, "offset": float,
    },
    "estimator": {
        "kind": str, "delta": float, "warm_k": int, "prior_bound": float,
    },
    "mpc": {
        "N": int, "Q": list, "R": list, "feedback_mode": str,
        "x_lo": list, "x_hi": list, "u_lo": list, "u_hi": list,
        "input_bound": float,
    },
    "bounds": {
        "clamp_fhat": bool, "refresh": str,
    },
    "run": {
        "steps": int, "episodes": int, "controller": str, "seed": int,
    },
    "sweep": {
        "seeds": int,
    },
}
REQUIRED = {"plant": ("preset",), "mpc": ("N", "Q", "R")}

# config keys that sweep/envelope commands may vary
SWEEPABLE = {
    "w1": ("plant", "w1"),
    "w2": ("plant", "w2"),
    "sigma2": ("plant", "sigma2"),
    "theta_deg": ("plant", "theta_deg"),
    "warm_k": ("estimator", "warm_k"),
    "input_bound": ("mpc", "input_bound"),
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Validated config: one dict per section, unknown keys rejected."""

    plant: dict
    estimator: dict
    mpc: dict
    bounds: dict
    run: dict
    sweep: dict

    def section(self, name):
        return getattr(self, name)

    def canonical(self):
        """Nested dict with sorted keys and plain-python values."""
        out = {}
        for name in SCHEMA:
            sec = self.section(name)
            if sec:
                out[name] = {k: sec[k] for k in sorted(sec)}
        return out

    def replace_key(self, section, key, value):
        sec = dict(self.section(section))
        sec[key] = value
        return dataclasses.replace(self, **{section: sec})


def _check_type(section, key, value, expected):
    if expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is bool:
        ok = isinstance(value, bool)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(
            f"[{section}] {key}: expected {expected.__name__}, "
            f"got {type(value).__name__}")


def _validate(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    for name in raw:
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"section [{name}] must be a table")
        for key, value in raw[name].items():
            if key not in SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
            _check_type(name, key, value, SCHEMA[name][key])
    for name, keys in REQUIRED.items():
        for key in keys:
            if key not in raw.get(name, {}):
                raise ConfigError(f"missing required key {key!r} "
                                  f"in section [{name}]")
    preset = raw["plant"]["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"unknown plant preset {preset!r}")
    return ExperimentConfig(
        plant=dict(raw.get("plant", {})),
        estimator=dict(raw.get("estimator", {})),
        mpc=dict(raw.get("mpc", {})),
        bounds=dict(raw.get("bounds", {})),
        run=dict(raw.get("run", {})),
        sweep=dict(raw.get("sweep", {})),
    )


def load_config(path):
    """Parse and validate a TOML or JSON config file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if str(path).endswith(".json"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: line {exc.lineno}: {exc.msg}") from exc
    else:
        try:
            raw = toml.loads(text)
        except toml.TomlDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return _validate(raw)


def _matrix(cfg_mpc, key, rows, cols):
    value = cfg_mpc[key]
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[mpc] {key}: not a numeric matrix") from exc
    if M.shape != (rows, cols):
        raise ConfigError(f"[mpc] {key}: expected shape "
                          f"{(rows, cols)}, got {M.shape}")
    return M


def _poly_override(cfg_mpc, lo_key, hi_key, dim, default):
    if lo_key in cfg_mpc or hi_key in cfg_mpc:
        if lo_key not in cfg_mpc or hi_key not in cfg_mpc:
            raise ConfigError(f"[mpc] {lo_key}/{hi_key} must come together")
        lo = np.array(cfg_mpc[lo_key], dtype=float)
        hi = np.array(cfg_mpc[hi_key], dtype=float)
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise ConfigError(f"[mpc] {lo_key}/{hi_key}: expected "
                              f"{dim} entries")
        return HPolytope.from_bounds(lo, hi)
    return default


def _integrator_experiment(cfg):
    preset = cfg.plant["preset"]
    for key in ("theta_deg", "v0", "ell", "offset"):
        if key in cfg.plant:
            raise ConfigError(f"[plant] {key} only applies to preset "
                              "'quadrotor'")
    plant_kw = {k: v for k, v in cfg.plant.items()
                if k in ("w1", "w2", "sigma2")}
    est_kw = {("estimator" if k == "kind" else k): v
              for k, v in cfg.estimator.items()}
    if preset == "matched":
        if "w2" in plant_kw:
            raise ConfigError("[plant] w2 only applies to preset "
                              "'unmatched'")
        exp = matched_experiment(N=cfg.mpc["N"], **plant_kw, **est_kw)
    else:
        exp = unmatched_experiment(N=cfg.mpc["N"], **plant_kw, **est_kw)
    mpc = exp.mpc
    mpc = dataclasses.replace(
        mpc,
        Q=_matrix(cfg.mpc, "Q", 2, 2),
        R=_matrix(cfg.mpc, "R", 1, 1),
        X=_poly_override(cfg.mpc, "x_lo", "x_hi", 2, mpc.X),
        U=_poly_override(cfg.mpc, "u_lo", "u_hi", 1, mpc.U),
        feedback_mode=cfg.mpc.get("feedback_mode", mpc.feedback_mode),
    )
    if "input_bound" in cfg.mpc:
        raise ConfigError("[mpc] input_bound only applies to preset "
                          "'quadrotor'")
    return dataclasses.replace(exp, mpc=mpc), None


def _quadrotor_experiment(cfg):
    for key in ("w1", "w2"):
        if key in cfg.plant:
            raise ConfigError(f"[plant] {key} does not apply to preset "
                              "'quadrotor'")
    for key in ("x_lo", "x_hi", "u_lo", "u_hi"):
        if key in cfg.mpc:
            raise ConfigError(f"[mpc] {key} does not apply to preset "
                              "'quadrotor' (pose bounds are fixed)")
    wind_kw = {k: v for k, v in cfg.plant.items()
               if k in ("theta_deg", "v0", "ell", "offset")}
    wind = WindField(**wind_kw) if wind_kw else None
    setup_kw = {}
    if "sigma2" in cfg.plant:
        setup_kw["sigma2"] = cfg.plant["sigma2"]
    if "warm_k" in cfg.estimator:
        setup_kw["warm_k"] = cfg.estimator["warm_k"]
    if "delta" in cfg.estimator:
        setup_kw["delta"] = cfg.estimator["delta"]
    if cfg.estimator.get("kind", "blr") != "blr":
        raise ConfigError("[estimator] quadrotor preset requires kind "
                          "'blr'")
    if "input_bound" in cfg.mpc:
        setup_kw["input_bound"] = cfg.mpc["input_bound"]
    if "feedback_mode" in cfg.mpc:
        setup_kw["feedback_mode"] = cfg.mpc["feedback_mode"]
    seed = cfg.run.get("seed", 0)
    exp, wind = quadrotor_setup(wind=wind, seed=seed, **setup_kw)
    mpc = dataclasses.replace(
        exp.mpc,
        Q=_matrix(cfg.mpc, "Q", 6, 6),
        R=_matrix(cfg.mpc, "R", 2, 2),
        N=cfg.mpc["N"],
    )
    return dataclasses.replace(exp, mpc=mpc), wind


def build_experiment(cfg, seed=None):
    """Experiment (and the wind field for the quadrotor preset).

    `seed` overrides the config's run seed; it flows into plant
    construction only for the quadrotor (feature draw, wind fit).
    """
    if seed is not None:
        cfg = cfg.replace_key("run", "seed", int(seed))
    if cfg.plant["preset"] == "quadrotor":
        exp, wind = _quadrotor_experiment(cfg)
    else:
        exp, wind = _integrator_experiment(cfg)
    if "steps" in cfg.run:
        exp = dataclasses.replace(exp, steps=cfg.run["steps"])
    if "refresh" in cfg.bounds:
        if cfg.bounds["refresh"] not in ("episode", "step"):
            raise ConfigError("[bounds] refresh must be 'episode' or "
                              "'step'")
        exp = dataclasses.replace(exp, refresh=cfg.bounds["refresh"])
    if cfg.bounds.get("clamp_fhat", False):
        exp = dataclasses.replace(exp, clamp_fhat=True)
    return exp, wind


def sweep_targets(cfg, param):
    """Section/key pair a sweep parameter writes to, or ConfigError."""
    if param not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter {param!r} "
                          f"(known: {', '.join(sorted(SWEEPABLE))})")
    section, key = SWEEPABLE[param]
    if cfg.plant["preset"] == "quadrotor" and param in ("w1", "w2"):
        raise ConfigError(f"{param!r} does not apply to the quadrotor "
                          "preset")
    if cfg.plant["preset"] != "quadrotor" and param == "theta_deg":
        raise ConfigError("theta_deg only applies to the quadrotor preset")
    return section, key


def config_hash(cfg):
    """Stable hash of the canonicalized config."""
    blob = json.dumps(cfg.canonical(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
