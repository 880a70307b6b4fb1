"""Figures rendered from the CSV tables written by the CLI.

Plotting reads only the saved table, so the numeric output never depends on it.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .results import read_csv  # noqa: E402


def _col(rows, key):
    return np.array([r.get(key, np.nan) if isinstance(r.get(key), float) else np.nan for r in rows])


def _spectrum(ax, rows):
    ax.stem(_col(rows, "level"), _col(rows, "energy"))
    ax.set(xlabel="level k", ylabel="E_k - E_0 (GHz)")


def _rates(ax, rows):
    w = _col(rows, "omega_osc")
    for key in ("r_0", "r_1", "r_cd"):
        ax.plot(w, _col(rows, key), ".", ms=2, label=key)
    if rows and "r_cd_extracted" in rows[0]:
        ax.plot(w, _col(rows, "r_cd_extracted"), "k-", lw=0.8, label="r_cd extracted")
    ax.set(xlabel="omega_osc (GHz)", ylabel="rate", ylim=(-0.05, 0.05))
    ax.legend()


def _design(ax, rows):
    ax.plot(_col(rows, "omega_osc"), _col(rows, "t_min"), ".")
    ax.set(xlabel="omega_osc (GHz)", ylabel="T_min (ns)")


def _gate(ax, rows, csv_path):
    traj = csv_path.with_name("gate_trajectory.csv")
    if not traj.exists():
        ax.text(0.5, 0.5, "no trajectory recorded", ha="center", transform=ax.transAxes)
        return
    _, trows = read_csv(traj)
    t = _col(trows, "t_ns")
    for b in (0, 1):
        amp = np.hypot(_col(trows, f"alpha_cond_{b}_re"), _col(trows, f"alpha_cond_{b}_im"))
        ax.plot(t, amp, label=f"|alpha| on branch {b}")
    ax.set(xlabel="t (ns)", ylabel="coherent amplitude")
    ax.legend()


def _infidelity_vs(ax, rows, xkey, ykeys):
    x = _col(rows, xkey)
    for key in ykeys:
        y = _col(rows, key)
        if np.any(np.isfinite(y)):
            ax.semilogy(x, y, "o-", label=key)
    ax.set(xlabel=xkey, ylabel="infidelity")
    ax.legend()


def _toy(ax, rows):
    ax.plot(_col(rows, "ratio"), _col(rows, "displacement_length"), "o")
    ax.set(xlabel="|r_i - r_mu| / r_CD", ylabel="displacement length")


def render(csv_path) -> Path:
    """Write ``<stem>.png`` next to a CSV produced by the CLI."""
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    _, rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 3.5), layout="constrained")
    command = meta["command"]
    if command == "spectrum":
        _spectrum(ax, rows)
    elif command == "rates":
        _rates(ax, rows)
    elif command == "design":
        _design(ax, rows)
    elif command == "gate":
        _gate(ax, rows, csv_path)
    elif command == "sweep":
        xkey = "flux_deviation" if meta.get("sweep") == "flux_deviation" else "gate_time"
        _infidelity_vs(ax, rows, xkey, ["infidelity"])
    elif command == "budget":
        _infidelity_vs(ax, rows, "T", ["infid_full", "infid_on_res", "leakage_fluxonium_only"])
    elif command == "toy":
        _toy(ax, rows)
    ax.set_title(command)
    out = csv_path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
