"""Deterministic run-directory emission.

Everything written here is a pure function of (config, seed): floats are
rendered with repr (shortest round-trip), rows are emitted in fixed
order, and nothing carries a timestamp.  Wall-clock metadata goes to
meta.json only, which byte-comparisons must exclude.
"""

import json
import os
import time

from . import fieldio
from .grid import ScalarField


def fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def prepare_out_dir(out_dir, run_config):
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "fields"), exist_ok=True)
    write_text(os.path.join(out_dir, "config.lock.yaml"),
               run_config.lock_text())


def write_meta(out_dir, command, extra=None):
    meta = {"command": command, "created_at": time.strftime(
        "%Y-%m-%dT%H:%M:%S", time.gmtime())}
    meta.update(extra or {})
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_diagnostics(out_dir, traj):
    d = traj.diagnostics
    n_steps = traj.n_steps
    rows = []
    for n in range(n_steps + 1):
        rows.append([
            n, float(traj.times[n]), float(d["mass"][n]),
            float(d["phi_norm"][n]), float(d["energy"][n]),
            float(d["sigma_mean"][n]), float(d["sigma_min"][n]),
            float(d["sigma_max"][n]),
            float(d["clamped_mass"][n - 1]) if n > 0 else 0.0,
            float(d["mass_residual"][n - 1]) if n > 0 else 0.0,
            int(d["picard_iters"][n - 1]) if n > 0 else 0,
            float(d["picard_residual"][n - 1]) if n > 0 else 0.0,
        ])
    write_csv(os.path.join(out_dir, "diagnostics.csv"),
              ["step", "t", "mass", "phi_norm", "energy", "sigma_mean",
               "sigma_min", "sigma_max", "clamped_mass", "mass_residual",
               "picard_iters", "picard_residual"], rows)


def write_snapshots(out_dir, traj):
    fdir = os.path.join(out_dir, "fields")
    for k, n in enumerate(traj.stored_steps):
        for name, stack in (("phi", traj.phi), ("mu", traj.mu),
                            ("sigma", traj.sigma)):
            fieldio.save_field(
                os.path.join(fdir, f"{name}_{int(n):06d}.pfb"),
                ScalarField(traj.grid, stack[k]))


def write_controls(out_dir, grid, controls):
    cdir = os.path.join(out_dir, "controls")
    os.makedirs(cdir, exist_ok=True)
    for n in range(controls.n_steps):
        fieldio.save_field(os.path.join(cdir, f"u_{n:06d}.pfb"),
                           ScalarField(grid, controls.u[n]))
        fieldio.save_field(os.path.join(cdir, f"w_{n:06d}.pfb"),
                           ScalarField(grid, controls.w[n]))
