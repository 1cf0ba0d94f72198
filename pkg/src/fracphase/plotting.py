"""Figures for the CLI reports, rendered off-screen with the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 3.8)


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_layer(layer, path) -> str:
    g = layer.field.grid
    x = g.axis_coords(0)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(x, layer.field.values, lw=1.2)
    ax.axhline(0.0, color="0.7", lw=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(f"transition layer, s = {layer.s:g}")
    return _save(fig, path)


def plot_scan(report, metric: str, path, normalize_eps: bool = False) -> str:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    logy = True
    for s, series in report.plot_data(metric).items():
        eps = np.array([e for e, _ in series])
        val = np.array([v for _, v in series], dtype=float)
        if normalize_eps:
            val = val / eps
        ax.plot(eps, val, "o-", label=f"s = {s:g}")
        if np.any(val <= 0):
            logy = False
    ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel(f"{metric} / eps" if normalize_eps else metric)
    ax.set_title(report.kind.replace("_", " "))
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_planelike(result, path) -> str:
    geom = result.geometry
    u = result.field.values
    t = geom.t
    sigma = np.arange(geom.n_sigma) * geom.h
    fig, ax = plt.subplots(figsize=FIGSIZE)
    im = ax.pcolormesh(sigma, t, u, shading="nearest", cmap="RdBu_r", vmin=-1, vmax=1)
    ax.contour(sigma, t, u, levels=[-0.9, 0.0, 0.9], colors=["k"], linewidths=[0.5, 1.0, 0.5])
    ax.axhline(0.0, color="0.4", lw=0.6, ls="--")
    ax.axhline(geom.M, color="0.4", lw=0.6, ls="--")
    ax.set_xlabel("transverse coordinate")
    ax.set_ylabel("t")
    p = geom.p
    ax.set_title(f"omega = ({p[0]}, {p[1]}), M = {geom.M:g}")
    fig.colorbar(im, ax=ax)
    return _save(fig, path)


def plot_orbit(orbit, path) -> str:
    x = orbit.field.grid.axis_coords(0)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(x, orbit.field.values, lw=1.2, label="u")
    ax2 = ax.twinx()
    ax2.plot(x, orbit.modulation(x), color="0.6", lw=0.8, label="a(x)")
    ax2.set_ylabel("a(x)")
    for b in orbit.markers:
        ax.axvline(b, color="C3", lw=0.6, ls=":")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title("orbit through wells " + ", ".join(str(z) for z in orbit.wells))
    return _save(fig, path)
