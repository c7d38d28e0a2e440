"""JSON run configuration: parsing, validation, resolution and hashing.

Frequencies in config files are plain Hz; they are converted to rad/s here
and nowhere else.  Named presets live in the ``presets`` package directory
and can be referenced by name (``target8``) instead of a path.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dynamics import SolverSettings
from .errors import ConfigError, DomainError
from .params import (
    RUBIDIUM_GAMMA_E,
    RUBIDIUM_GAMMA_R,
    NoiseModel,
    dressed_params,
    hz,
    to_hz,
)
from .trajectories import RunConfig

SECTIONS = {
    "physical": {
        "omega_p_hz",
        "omega_c_hz",
        "delta_s_hz",
        "omega_s_hz",
        "delta_hz",
        "gamma_e_hz",
        "gamma_r_hz",
        "n_target",
        "loss_branching",
        "delta_p_hz_override",
    },
    "noise": {"sigma_delta_l_hz", "nbar_initial"},
    "run": {
        "trajectories",
        "horizon_s",
        "dt_out_s",
        "seed",
        "n_cap",
        "delta_l_grid_points",
        "stabilization_eps",
    },
    "solver": {
        "plateau_tol",
        "max_horizon_factor",
        "window_factor",
        "consecutive_windows",
        "max_excitations",
        "atom_cap",
    },
    "sweep": {"sigmas_hz"},
}
REQUIRED_PHYSICAL = ("omega_p_hz", "omega_c_hz", "delta_s_hz", "n_target")


@dataclass(frozen=True)
class ResolvedConfig:
    """A validated configuration with derived dressing and probe settings."""

    run: RunConfig
    sweep_sigmas: tuple = ()
    source: dict = field(default_factory=dict)

    @property
    def params(self):
        return self.run.params

    def resolved(self):
        """Fully resolved document, in Hz, sufficient to re-run exactly."""
        p = self.run.params
        s = self.run.solver
        doc = {
            "physical": {
                "omega_p_hz": to_hz(p.omega_p),
                "omega_c_hz": to_hz(p.omega_c),
                "delta_s_hz": to_hz(p.delta_s),
                "omega_s_hz": to_hz(p.omega_s),
                "delta_hz": to_hz(p.delta),
                "delta_p_hz_override": to_hz(p.delta_p),
                "gamma_e_hz": to_hz(p.gamma_e),
                "gamma_r_hz": to_hz(p.gamma_r),
                "n_target": p.n_target,
                "loss_branching": p.loss_branching,
            },
            "noise": {
                "sigma_delta_l_hz": to_hz(self.run.noise.sigma_delta_l),
                "nbar_initial": self.run.noise.nbar_initial,
            },
            "run": {
                "trajectories": self.run.trajectories,
                "horizon_s": self.run.horizon,
                "dt_out_s": self.run.dt_out,
                "seed": self.run.seed,
                "n_cap": self.run.n_cap,
                "delta_l_grid_points": self.run.grid_points,
                "stabilization_eps": self.run.stabilization_eps,
            },
            "solver": s.to_dict(),
        }
        if self.sweep_sigmas:
            doc["sweep"] = {"sigmas_hz": [to_hz(x) for x in self.sweep_sigmas]}
        return doc

    def sha256(self):
        return config_hash(self.resolved())


def config_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def preset_names():
    root = resources.files("subpoisson") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_document(ref):
    """Read a config from a path, or from a preset name such as ``baseline``."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        name = ref[:-5] if ref.endswith(".json") else ref
        res = resources.files("subpoisson") / "presets" / f"{name}.json"
        if not res.is_file():
            raise ConfigError(
                f"no config file or preset named {ref!r}; presets: {', '.join(preset_names())}"
            )
        text = res.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{ref}: top level must be an object")
    return doc


def _check_keys(doc):
    for section, body in doc.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        for key in body:
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section {section!r}")


def _number(body, key, section, default=None, kind=float):
    if key not in body:
        if default is None:
            raise ConfigError(f"missing required key {key!r} in section {section!r}")
        return default
    value = body[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(doc, seed=None):
    """Validate a config document and resolve it into a :class:`ResolvedConfig`.

    ``seed`` overrides ``run.seed`` when given.
    """
    _check_keys(doc)
    phys = doc.get("physical")
    if phys is None:
        raise ConfigError("missing section 'physical'")
    for key in REQUIRED_PHYSICAL:
        if key not in phys:
            raise ConfigError(f"missing required key {key!r} in section 'physical'")
    if "omega_s_hz" not in phys and "delta_hz" not in phys:
        raise ConfigError("physical needs omega_s_hz or delta_hz")

    opt = lambda key: hz(_number(phys, key, "physical")) if key in phys else None  # noqa: E731
    noise = doc.get("noise", {})
    run = doc.get("run", {})
    solver = doc.get("solver", {})
    try:
        params = dressed_params(
            omega_p=hz(_number(phys, "omega_p_hz", "physical")),
            omega_c=hz(_number(phys, "omega_c_hz", "physical")),
            delta_s=hz(_number(phys, "delta_s_hz", "physical")),
            n_target=_number(phys, "n_target", "physical", kind=int),
            omega_s=opt("omega_s_hz"),
            delta=opt("delta_hz"),
            gamma_e=hz(_number(phys, "gamma_e_hz", "physical", to_hz(RUBIDIUM_GAMMA_E))),
            gamma_r=hz(_number(phys, "gamma_r_hz", "physical", to_hz(RUBIDIUM_GAMMA_R))),
            delta_p=opt("delta_p_hz_override"),
            loss_branching=_number(phys, "loss_branching", "physical", 1.0),
        )
        noise_model = NoiseModel(
            sigma_delta_l=hz(_number(noise, "sigma_delta_l_hz", "noise", 0.0)),
            nbar_initial=_number(noise, "nbar_initial", "noise", float(params.n_target) * 3),
        )
        defaults = SolverSettings()
        # null keeps the full basis
        max_exc = solver.get("max_excitations", defaults.max_excitations)
        if "max_excitations" in solver and max_exc is not None:
            max_exc = _number(solver, "max_excitations", "solver", kind=int)
        settings = SolverSettings(
            plateau_tol=_number(solver, "plateau_tol", "solver", defaults.plateau_tol),
            max_horizon_factor=_number(
                solver, "max_horizon_factor", "solver", defaults.max_horizon_factor
            ),
            window_factor=_number(solver, "window_factor", "solver", defaults.window_factor),
            consecutive_windows=_number(
                solver, "consecutive_windows", "solver", defaults.consecutive_windows, int
            ),
            max_excitations=max_exc,
            atom_cap=_number(solver, "atom_cap", "solver", defaults.atom_cap, int),
        )
        n_cap = run.get("n_cap")
        run_cfg = RunConfig(
            params=params,
            noise=noise_model,
            trajectories=_number(run, "trajectories", "run", 20000, int),
            horizon=_number(run, "horizon_s", "run", 500e-6),
            dt_out=_number(run, "dt_out_s", "run", 1e-6),
            seed=seed if seed is not None else _number(run, "seed", "run", 0, int),
            grid_points=_number(run, "delta_l_grid_points", "run", 25, int),
            n_cap=None if n_cap is None else _number(run, "n_cap", "run", kind=int),
            stabilization_eps=_number(run, "stabilization_eps", "run", 0.1),
            solver=settings,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None

    sigmas = doc.get("sweep", {}).get("sigmas_hz", [])
    if not isinstance(sigmas, list) or any(
        isinstance(s, bool) or not isinstance(s, (int, float)) or s < 0 for s in sigmas
    ):
        raise ConfigError("sweep.sigmas_hz must be a list of non-negative numbers")
    return ResolvedConfig(run_cfg, tuple(hz(float(s)) for s in sigmas), doc)


def load_config(ref, seed=None):
    return parse_config(load_document(ref), seed=seed)
