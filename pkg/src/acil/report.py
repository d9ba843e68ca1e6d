"""Episode artifacts: summary files, plot-ready CSVs and rendered figures."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .engine import EpisodeLog

PLOT_COLUMNS = ("t", "B_f", "u_norm", "lambda_hat")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v).replace("\n", " ")


def write_summary(path, summary: dict) -> None:
    """One ``key=value`` pair per line, floats written with full precision."""
    with open(path, "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k}={format_value(v)}\n")


def read_summary(path) -> dict:
    """Inverse of :func:`write_summary`; numbers and booleans are converted back."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        k, _, v = line.partition("=")
        if v in ("true", "false"):
            out[k] = v == "true"
            continue
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def plot_data(log: EpisodeLog, decimation: int = 1) -> np.ndarray:
    """Columns t, B_f, ||u||, lambda_hat sampled like the trajectory CSV."""
    idx = list(range(0, len(log), decimation))
    if idx[-1] != len(log) - 1:
        idx.append(len(log) - 1)
    return np.column_stack([log.t[idx], log.B[idx], np.linalg.norm(log.u[idx], axis=1),
                            log.lam[idx]])


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def write_plot_data(path, log: EpisodeLog, decimation: int = 1) -> None:
    write_table(path, PLOT_COLUMNS, plot_data(log, decimation))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def aligned(header, rows) -> str:
    """Plain-text table with right-aligned columns."""
    cells = [[str(h) for h in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- figures --------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_episode(log: EpisodeLog, path, title: str = "") -> None:
    """Four stacked panels: state norm, control norm, multiplier, barrier value."""
    plt = _pyplot()
    t = log.t
    fig, axes = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
    axes[0].plot(t, log.x, lw=1)
    axes[0].plot(t, np.linalg.norm(log.x, axis=1), "k--", lw=1, label="||x||")
    axes[0].set_ylabel("state")
    axes[0].legend(loc="upper right")
    axes[1].plot(t, np.linalg.norm(log.u, axis=1), lw=1)
    axes[1].set_ylabel("||u||")
    axes[2].plot(t, log.lam, lw=1)
    axes[2].set_ylabel("lambda_hat")
    axes[3].plot(t, log.B, lw=1)
    axes[3].set_ylabel("B_f")
    axes[3].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_plane(log: EpisodeLog, path, radius: float | None = None, centers=None,
                 mine_radius: float = 1.0) -> None:
    """Planar trajectory with the safe-set boundary and any circular obstacles."""
    if log.n != 2:
        raise ValueError("planar plot needs a two-dimensional state")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 6))
    ang = np.linspace(0.0, 2.0 * math.pi, 200)
    if radius is not None:
        ax.plot(radius * np.cos(ang), radius * np.sin(ang), "r:", lw=1)
    for c in np.zeros((0, 2)) if centers is None else np.asarray(centers):
        ax.fill(c[0] + mine_radius * np.cos(ang), c[1] + mine_radius * np.sin(ang),
                color="0.6")
    ax.plot(log.x[:, 0], log.x[:, 1], lw=1.2)
    ax.plot(*log.x[0], "go")
    ax.plot(0, 0, "k+")
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_sweep(parameter: str, values, costs, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(values, costs, "o-")
    ax.set_xscale("log" if min(values) > 0 else "linear")
    ax.set_xlabel(parameter)
    ax.set_ylabel("total cost")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
