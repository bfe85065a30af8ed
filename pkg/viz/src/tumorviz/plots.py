"""Figure generation from run artifacts.

Figures are deterministic: fixed style, the Agg backend, no timestamps,
and the PNG Software tag stripped, so re-running on the same inputs
reproduces files byte for byte.  Every figure carries the run's config
hash in the lower right corner.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .artifacts import ArtifactError, index_run, read_csv_table, read_field

RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "tumorviz",
}

PNG_META = {"Software": None}  # strip the writer tag for byte stability


def _stamp(fig, index):
    fig.text(0.99, 0.01, f"cfg {index.config_hash[:12]}",
             ha="right", va="bottom", fontsize=6, color="0.4")


def _save(fig, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)
    return path


def _axes_for_field(ax, field, label):
    if field.dim == 1:
        x = (np.arange(field.values.size) + 0.5) * field.spacings[0]
        ax.plot(x, field.values, lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel(label)
    elif field.dim == 2:
        ny, nx = field.values.shape
        extent = (0, nx * field.spacings[1], 0, ny * field.spacings[0])
        im = ax.imshow(field.values, origin="lower", extent=extent,
                       aspect="auto", cmap="viridis")
        ax.figure.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(label, fontsize=9)
    else:
        raise ArtifactError("3D fields are not plotted; export slices")


def plot_fields(run_dir, out_dir, times=None):
    """Phase and nutrient snapshots, one figure per stored step.

    ``times`` selects the nearest stored steps by time stamp (the
    diagnostics table provides the step -> time map); by default every
    stored step is rendered.
    """
    index = index_run(run_dir)
    steps = index.field_steps.get("phi", [])
    if not steps:
        raise ArtifactError(
            f"{os.path.join(run_dir, 'fields')}: no phi field files")
    if times is not None:
        table = read_csv_table(os.path.join(run_dir, "diagnostics.csv"))
        tmap = dict(zip(table["step"].astype(int), table["t"]))
        chosen = []
        for t in times:
            have = [s for s in steps if s in tmap]
            if not have:
                raise ArtifactError(
                    f"{run_dir}: no stored steps with time stamps")
            chosen.append(min(have, key=lambda s: abs(tmap[s] - t)))
        steps = sorted(set(chosen))
    written = []
    with plt.rc_context(RC):
        for step in steps:
            names = [n for n in ("phi", "sigma")
                     if step in index.field_steps.get(n, [])]
            fig, axes = plt.subplots(1, len(names),
                                     figsize=(4.0 * len(names), 3.4))
            axes = np.atleast_1d(axes)
            for ax, name in zip(axes, names):
                field = read_field(index.field_path(name, step))
                _axes_for_field(ax, field, name)
            fig.suptitle(f"state at step {step}", fontsize=10)
            _stamp(fig, index)
            fig.tight_layout(rect=(0, 0.02, 1, 0.97))
            written.append(_save(fig, out_dir, f"state_{step:06d}.png"))
    return written


def plot_diagnostics(run_dir, out_dir):
    """Energy, mass and nutrient-bound curves from diagnostics.csv."""
    index = index_run(run_dir)
    table = read_csv_table(os.path.join(run_dir, "diagnostics.csv"))
    t = table["t"]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(6.4, 7.0))
        axes[0].plot(t, table["energy"], lw=1.2)
        axes[0].set_ylabel("free energy")
        axes[1].plot(t, table["mass"], lw=1.2)
        axes[1].set_ylabel("mean phase")
        axes[2].plot(t, table["sigma_min"], lw=1.0, label="min")
        axes[2].plot(t, table["sigma_mean"], lw=1.0, label="mean")
        axes[2].plot(t, table["sigma_max"], lw=1.0, label="max")
        axes[2].axhline(0.0, color="0.6", lw=0.6)
        axes[2].axhline(1.0, color="0.6", lw=0.6)
        axes[2].set_ylabel("nutrient bounds")
        axes[2].set_xlabel("t")
        axes[2].legend(loc="best", fontsize=7)
        _stamp(fig, index)
        fig.tight_layout()
        return [_save(fig, out_dir, "diagnostics.png")]


def plot_optim(run_dir, out_dir):
    """Cost descent and stationarity residual per optimizer iterate."""
    index = index_run(run_dir)
    table = read_csv_table(os.path.join(run_dir, "optim.csv"))
    it = table["iter"]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.4))
        axes[0].plot(it, table["cost"], marker="o", ms=3, lw=1.0)
        axes[0].set_ylabel("sampled cost")
        axes[1].semilogy(it, np.maximum(table["kkt"], 1e-300),
                         marker="o", ms=3, lw=1.0)
        axes[1].set_ylabel("KKT residual")
        axes[1].set_xlabel("iteration")
        _stamp(fig, index)
        fig.tight_layout()
        return [_save(fig, out_dir, "optim.png")]
