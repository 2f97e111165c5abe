"""Optional PNG figures next to the CSV artifacts (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["plot_field", "plot_radial", "plot_history", "plot_thin_annulus", "plot_angular"]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    _pyplot().close(fig)
    return path


def plot_field(path, field, title="u") -> Path:
    """Field on the reduced (s, t) plane, with the Dirichlet zeros on both profiles."""
    plt = _pyplot()
    g = field.grid
    s, t, u = g.s, g.t, field.full()
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    pc = ax.pcolormesh(s, t, u, shading="gouraud", cmap="viridis")
    fig.colorbar(pc, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    ax.set_title(title)
    return _save(fig, path)


def plot_radial(path, r, u, label="shooting", overlay=None) -> Path:
    """Radial profile; ``overlay`` is an optional (r, u, label) triple."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(r, u, lw=1.5, label=label)
    if overlay is not None:
        ax.plot(overlay[0], overlay[1], ".", ms=3, label=overlay[2])
    ax.set_xlabel("r")
    ax.set_ylabel("u")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_history(path, history: dict) -> Path:
    plt = _pyplot()
    res = np.asarray(history.get("el_residual", []), dtype=float)
    en = np.asarray(history.get("energy", []), dtype=float)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    if res.size:
        a1.semilogy(res)
    a1.set_xlabel("iteration")
    a1.set_ylabel("el_residual")
    if en.size:
        a2.plot(en)
    a2.set_xlabel("iteration")
    a2.set_ylabel("energy")
    fig.tight_layout()
    return _save(fig, path)


def plot_thin_annulus(path, rows) -> Path:
    plt = _pyplot()
    R = [row.R for row in rows]
    q = [row.lambda_over_R2 for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(R, q, "o-", label=r"$\lambda_R / R^2$")
    ax.axhline(np.pi**2, color="k", ls="--", lw=1, label=r"$\pi^2$")
    ax.set_xlabel("R")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_angular(path, eig) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(eig.theta, eig.psi1)
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel(r"$\psi_1$")
    ax.set_title(f"mu1 = {eig.mu1:.6g}")
    return _save(fig, path)
