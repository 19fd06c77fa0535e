"""Figures written next to the numeric outputs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 4.5
params = {
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "font.family": "serif",
    "font.size": 8,
    "mathtext.fontset": "stix",
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

# PNG metadata would otherwise carry the matplotlib version string
_METADATA = {"Software": None}


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, metadata=_METADATA)
    plt.close(fig)


def plot_profile(y, values, ylabel, path: Path, extended=None, title=None):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(y, values, "-", color="#2b8cbe")
        if extended is not None and np.any(extended):
            ax.plot(np.asarray(y)[extended], np.asarray(values)[extended], "o", color="#e34a33",
                    label="extended endpoint")
            ax.legend()
        ax.set_xlabel("$y$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_history(history, path: Path):
    hist = np.asarray(history, dtype=float)
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        k = np.arange(1, len(hist) + 1)
        pos = hist > 0
        ax.semilogy(k[pos], hist[pos], "o-", color="#08589e")
        ax.set_xlabel("outer iteration $k$")
        ax.set_ylabel(r"$\|h_{k}-h_{k-1}\|_{H^4}$")
        _save(fig, path)


def plot_midplane(state, path: Path):
    """Streamwise velocity and pressure on the plane y = 0."""
    layout = state.layout
    j = layout.shape[1] // 2
    U1 = state.U_interior[0]
    u = 0.5 * (U1[1:] + U1[:-1])[:, j, :]
    P = state.P[:, j, :]
    solid = layout.domain.solid[:, j, :]
    xc, _, zc = layout.domain.centers
    with plt.rc_context(params):
        fig, axes = plt.subplots(2, 1, figsize=(fig_width, 1.2 * fig_width * golden_mean), sharex=True)
        for ax, field, label in ((axes[0], u, "$u_1$"), (axes[1], P, "$p$")):
            data = np.ma.masked_where(solid, field).T
            mesh = ax.pcolormesh(xc, zc, data, shading="nearest", cmap="viridis")
            fig.colorbar(mesh, ax=ax, label=label)
            ax.set_ylabel("$z$")
            ax.set_aspect("equal")
            ax.grid(False)
        axes[1].set_xlabel("$x$")
        _save(fig, path)


def plot_table(xs, series: dict, xlabel: str, path: Path, logy: bool = False):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for name, ys in series.items():
            (ax.semilogy if logy else ax.plot)(xs, ys, "o-", label=name)
        ax.set_xlabel(xlabel)
        ax.legend()
        _save(fig, path)


def render_figures(results, out_dir) -> list:
    """Render the figures that the available results support; returns relative paths."""
    out = Path(out_dir)
    figdir = out / "figures"
    made = []

    def target(name):
        figdir.mkdir(parents=True, exist_ok=True)
        made.append(f"figures/{name}")
        return figdir / name

    if results.beam is not None:
        plot_profile(results.beam.grid.nodes, results.beam.values, "$h(y)$", target("beam.png"))
    if results.lift is not None:
        plot_profile(results.lift.grid.nodes, results.lift.values, "$L(y)$", target("lift.png"),
                     extended=np.asarray(results.lift.extended, dtype=bool))
    if results.history:
        plot_history(results.history, target("history.png"))
    if results.state is not None:
        plot_midplane(results.state, target("midplane.png"))
    if "sweep" in results.tables:
        header, cols = results.tables["sweep"]
        table = dict(zip(header, cols))
        plot_table(table["gamma"], {r"$\|h^*\|_{H^4}$": table["h_norm_H4"], r"$\|U\|_2$": table["velocity_norm"]},
                   r"$\gamma$", target("sweep.png"))
    return made
