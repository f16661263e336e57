"""Plain-text data files and PNG figures for pipeline outputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Field  # noqa: E402


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_history(history: Sequence, path) -> None:
    """Solver progress: iteration, energy, residual, obstacle contacts."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "energy", "residual", "contacts"])
        for it, E, res, contacts in history:
            w.writerow([it, repr(float(E)), repr(float(res)), contacts])


def write_columns(path, header: str, *cols) -> None:
    """Whitespace-separated columns with a '#' header, readable by gnuplot."""
    arr = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in arr:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def write_profile(u: Field, path) -> None:
    """Node coordinates followed by the value (one line per node)."""
    dom = u.domain
    X = dom.coords().reshape(-1, dom.n)
    names = " ".join(f"x{i + 1}" for i in range(dom.n))
    write_columns(path, f"{names} u", *X.T, u.values.ravel())


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def plot_field(u: Field, path, title: str = "", others: Sequence = ()) -> None:
    """Line plot for 1-D fields, image plot (first two axes, others at index 0) otherwise."""
    dom = u.domain
    fig, ax = plt.subplots(figsize=(6, 4))
    if dom.n == 1:
        x = dom.axis_coords(0)
        ax.plot(x, u.values, lw=1.5, label="u")
        for label, f in others:
            ax.plot(x, f.values, lw=1.0, ls="--", label=label)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        if others:
            ax.legend()
    else:
        vals = u.values.reshape(dom.shape[0], dom.shape[1], -1)[:, :, 0]
        x0, x1 = dom.axis_coords(0), dom.axis_coords(1)
        im = ax.imshow(vals.T, origin="lower", aspect="auto",
                       extent=(x0[0], x0[-1], x1[0], x1[-1]), cmap="viridis")
        fig.colorbar(im, ax=ax, label="u")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    ax.set_title(title)
    _save(fig, path)


def plot_history(history: Sequence, path) -> None:
    it = [h[0] for h in history]
    res = [max(h[2], 1e-300) for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(it, res)
    ax.set_xlabel("sweep")
    ax.set_ylabel("projected residual")
    _save(fig, path)


def plot_strips(index, dist_lower, dist_upper, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(index, np.maximum(dist_lower, 1e-300), "o-", ms=3, label="|U - v| on strip")
    ax.semilogy(index, np.maximum(dist_upper, 1e-300), "s-", ms=3, label="|U - w| on strip")
    ax.set_xlabel("strip index i")
    ax.set_ylabel("L2 distance")
    ax.legend()
    _save(fig, path)


def plot_orbit(values: Sequence[float], gaps: Sequence, path, title: str = "") -> None:
    """Orbit values on the circle [0, 1) with detected gaps shaded."""
    fig, ax = plt.subplots(figsize=(6, 2.4))
    v = np.mod(np.asarray(values, dtype=float), 1.0)
    ax.plot(v, np.zeros_like(v), "|", ms=18, color="k")
    for g in gaps:
        lo, hi = g.lower, g.upper
        if hi <= 1.0:
            ax.axvspan(lo, hi, color="tab:red", alpha=0.25)
        else:
            ax.axvspan(lo, 1.0, color="tab:red", alpha=0.25)
            ax.axvspan(0.0, hi - 1.0, color="tab:red", alpha=0.25)
    ax.set_xlim(0, 1)
    ax.set_yticks([])
    ax.set_xlabel("orbit value at the origin (mod 1)")
    ax.set_title(title)
    _save(fig, path)
