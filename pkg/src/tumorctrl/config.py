"""Run configuration: YAML parsing, assumption validation, field building.

The configuration is one human-readable YAML tree.  Every key has a
default (see default_config_dict); the resolved tree is frozen into the
run directory as config.lock.yaml, whose SHA-256 is the run's identity.
Violations of the model assumptions raise ConfigInvalid naming the
assumption (A1, A5, A7, ...); structural problems name the key path.
"""

import copy
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from . import fieldio
from .controls import ControlPair, constant_controls
from .errors import ConfigInvalid
from .forward import ModelParams, SolverConfig
from .functionals import CostSpec
from .grid import Grid, ScalarField
from .noise import AdditiveNoiseSpec, MultiplicativeNoiseSpec
from .optimize import ArmijoOptions, OptimOptions
from .potential import PotentialSpec


def default_config_dict():
    return {
        "grid": {"shape": [64], "lengths": [1.0]},
        "params": {"P": 0.5, "a": 0.1, "alpha": 0.8, "b": 0.5, "c": 0.4,
                   "A": 0.01, "B": 1.0},
        "potential": {"kind": "quartic", "C2": 1.0},
        "noise": {"g0": 0.01, "s": 2.0, "n_modes": 8, "c0": 0.0, "q": 0.5},
        "solver": {"dt": 0.015625, "n_steps": 16, "stabilization": None,
                   "picard_max": 1, "picard_tol": 1e-9,
                   "yosida_lambda": None, "clamp_sigma": False},
        "initial": {
            "phi": {"kind": "cosine", "amplitude": 0.3, "mode": 1,
                    "offset": 0.0},
            "sigma": {"kind": "constant", "value": 0.5},
        },
        "controls": {
            "u": {"kind": "constant", "value": 0.5},
            "w": {"kind": "constant", "value": 0.5},
        },
        "cost": {"beta1": 1.0, "beta2": 0.5, "beta3": 0.1,
                 "beta4": 1.0, "beta5": 1.0,
                 "phi_Q": {"kind": "constant", "value": -0.4},
                 "phi_T": {"kind": "constant", "value": -0.6}},
        "optim": {"max_iters": 200, "tol_kkt": 1e-6, "ensemble": 4,
                  "armijo": {"tau0": 1.0, "shrink": 0.5, "c1": 1e-4,
                             "max_backtracks": 60}},
        "seed": 1234,
        "stride": 1,
        "validation_bypass": False,
    }


def _merge(defaults, user, path=""):
    """Defaults overridden by user keys; unknown keys are rejected."""
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigInvalid("config", f"unknown key {here}")
        if isinstance(defaults[key], dict) and isinstance(val, dict):
            out[key] = _merge(defaults[key], val, here)
        else:
            out[key] = val
    return out


def _need(tree, path):
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node or \
                node[part] is None:
            raise ConfigInvalid("config", f"missing required key {path}")
        node = node[part]
    return node


def build_field(grid: Grid, spec, where) -> ScalarField:
    """Construct a field from its config node: constant, cosine or file."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigInvalid("config", f"{where} must set kind")
    kind = spec["kind"]
    if kind == "constant":
        if "value" not in spec:
            raise ConfigInvalid("config", f"missing required key "
                                f"{where}.value")
        return ScalarField(grid, np.full(grid.shape, float(spec["value"])))
    if kind == "cosine":
        amp = float(spec.get("amplitude", 1.0))
        off = float(spec.get("offset", 0.0))
        mode = spec.get("mode", 1)
        modes = ([int(mode)] * grid.dim if np.isscalar(mode)
                 else [int(m) for m in mode])
        if len(modes) != grid.dim:
            raise ConfigInvalid("config", f"{where}.mode rank mismatch")
        values = np.full(grid.shape, amp)
        for ax, m in enumerate(modes):
            x = grid.axis_centers(ax)
            sh = [1] * grid.dim
            sh[ax] = grid.shape[ax]
            values = values * np.cos(
                np.pi * m * x / grid.lengths[ax]).reshape(sh)
        return ScalarField(grid, values + off)
    if kind == "file":
        if "path" not in spec:
            raise ConfigInvalid("config", f"missing required key "
                                f"{where}.path")
        f = fieldio.load_field(spec["path"])
        if f.grid != grid:
            raise ConfigInvalid(
                "config", f"{where}: file grid {f.grid} != run grid {grid}")
        return f
    raise ConfigInvalid("config", f"{where}.kind {kind!r} not one of "
                        f"constant/cosine/file")


@dataclass
class RunConfig:
    """Fully resolved and validated run setup."""

    raw: dict
    grid: Grid
    params: ModelParams
    potential: PotentialSpec
    add_spec: AdditiveNoiseSpec
    mult_spec: Optional[MultiplicativeNoiseSpec]
    solver: SolverConfig
    phi0: ScalarField
    sigma0: ScalarField
    controls: ControlPair
    cost: CostSpec
    optim: OptimOptions
    ensemble: int
    seed: int
    stride: int
    bypass: bool

    def lock_text(self):
        return yaml.safe_dump(self.raw, sort_keys=True,
                              default_flow_style=False)

    def config_hash(self):
        return hashlib.sha256(self.lock_text().encode()).hexdigest()


def resolve_config(user: dict, overrides: Optional[dict] = None) -> RunConfig:
    tree = _merge(default_config_dict(), user or {})
    for key, val in (overrides or {}).items():
        node = tree
        parts = key.split(".")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = val

    gtree = tree["grid"]
    try:
        grid = Grid(_need(tree, "grid.shape"), _need(tree, "grid.lengths"))
    except ValueError as exc:
        raise ConfigInvalid("grid", str(exc))

    ptree = tree["params"]
    for key in ("P", "a", "alpha", "b", "c", "A", "B"):
        _need(tree, f"params.{key}")
    params = ModelParams(P=float(ptree["P"]), a=float(ptree["a"]),
                         alpha=float(ptree["alpha"]), b=float(ptree["b"]),
                         c=float(ptree["c"]), A=float(ptree["A"]),
                         B=float(ptree["B"]))
    bypass = bool(tree["validation_bypass"])
    params.validate(bypass=bypass)

    pot_tree = tree["potential"]
    if pot_tree.get("kind") != "quartic":
        raise ConfigInvalid(
            "A2", f"potential.kind must be 'quartic', "
            f"got {pot_tree.get('kind')!r}")
    potential_spec = PotentialSpec(kind="quartic",
                                   C2=float(pot_tree.get("C2", 1.0)))
    if potential_spec.C2 != 1.0:
        raise ConfigInvalid("A2", "the quartic well has C2 = 1")

    ntree = tree["noise"]
    try:
        add_spec = AdditiveNoiseSpec(g0=float(ntree["g0"]),
                                     s=float(ntree["s"]),
                                     n_modes=int(ntree["n_modes"]))
    except ValueError as exc:
        raise ConfigInvalid("A3", str(exc))
    try:
        mult_spec = MultiplicativeNoiseSpec(c0=float(ntree["c0"]),
                                            q=float(ntree["q"]),
                                            n_modes=int(ntree["n_modes"]))
    except ValueError as exc:
        raise ConfigInvalid("A4", str(exc))
    if add_spec.n_modes > grid.size:
        raise ConfigInvalid("A3", f"n_modes {add_spec.n_modes} exceeds grid "
                            f"size {grid.size}")

    stree = tree["solver"]
    try:
        solver = SolverConfig(
            dt=float(_need(tree, "solver.dt")),
            n_steps=int(_need(tree, "solver.n_steps")),
            stabilization=(None if stree["stabilization"] is None
                           else float(stree["stabilization"])),
            picard_max=int(stree["picard_max"]),
            picard_tol=float(stree["picard_tol"]),
            yosida_lambda=(None if stree["yosida_lambda"] is None
                           else float(stree["yosida_lambda"])),
            clamp_sigma=bool(stree["clamp_sigma"]))
    except ValueError as exc:
        raise ConfigInvalid("solver", str(exc))

    phi0 = build_field(grid, _need(tree, "initial.phi"), "initial.phi")
    sigma0 = build_field(grid, _need(tree, "initial.sigma"), "initial.sigma")
    if not np.isfinite(potential_value_sum(phi0)):
        raise ConfigInvalid("A6", "psi(phi0) must be finite")
    if not bypass and (sigma0.values.min() < 0 or sigma0.values.max() > 1):
        raise ConfigInvalid("A7", "sigma0 must lie in [0,1] a.e.")

    u0 = build_field(grid, _need(tree, "controls.u"), "controls.u")
    w0 = build_field(grid, _need(tree, "controls.w"), "controls.w")
    controls = ControlPair(
        np.broadcast_to(u0.values, (solver.n_steps,) + grid.shape).copy(),
        np.broadcast_to(w0.values, (solver.n_steps,) + grid.shape).copy())
    controls.validate_box(bypass=bypass)

    ctree = tree["cost"]
    betas = {k: float(ctree[k]) for k in
             ("beta1", "beta2", "beta3", "beta4", "beta5")}
    if min(betas.values()) < 0:
        raise ConfigInvalid("cost", "betas must be nonnegative")
    phi_Q = (build_field(grid, ctree["phi_Q"], "cost.phi_Q").values
             if ctree["phi_Q"] is not None else None)
    phi_T = (build_field(grid, ctree["phi_T"], "cost.phi_T").values
             if ctree["phi_T"] is not None else None)
    cost = CostSpec(phi_Q=phi_Q, phi_T=phi_T, **betas)

    otree = tree["optim"]
    atree = otree["armijo"]
    optim = OptimOptions(
        max_iters=int(otree["max_iters"]),
        tol_kkt=float(otree["tol_kkt"]),
        armijo=ArmijoOptions(tau0=float(atree["tau0"]),
                             shrink=float(atree["shrink"]),
                             c1=float(atree["c1"]),
                             max_backtracks=int(atree["max_backtracks"])))

    return RunConfig(raw=tree, grid=grid, params=params,
                     potential=potential_spec, add_spec=add_spec,
                     mult_spec=mult_spec, solver=solver, phi0=phi0,
                     sigma0=sigma0, controls=controls, cost=cost,
                     optim=optim, ensemble=int(otree["ensemble"]),
                     seed=int(tree["seed"]), stride=int(tree["stride"]),
                     bypass=bypass)


def potential_value_sum(phi0: ScalarField):
    from . import potential as pot
    return float(np.sum(pot.psi(phi0.values)))


def load_config(path, overrides=None) -> RunConfig:
    try:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigInvalid("config", f"cannot read {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigInvalid("config", f"{path}: not valid YAML: {exc}")
    if not isinstance(user, dict):
        raise ConfigInvalid("config", f"{path}: top level must be a mapping")
    return resolve_config(user, overrides)
