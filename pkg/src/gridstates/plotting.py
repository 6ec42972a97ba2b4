"""Figure rendering for the experiment drivers (headless, PNG files).

Figures are a convenience view of the CSV tables, never the canonical
output; every plot can be rebuilt from table.csv alone.
"""

from __future__ import annotations

import os
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_COLORS = {1: "tab:blue", 2: "tab:orange", 3: "tab:green", 4: "tab:red", 5: "tab:purple", 6: "tab:brown"}


def render(experiment: str, table, extras: dict, out_dir: str) -> List[str]:
    paths = []
    fn = _RENDERERS.get(experiment)
    if fn is not None:
        path = os.path.join(out_dir, "figure.png")
        fig = fn(table)
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    for name, payload in extras.items():
        if not name.startswith("wigner"):
            continue
        xs, ps, w = payload
        path = os.path.join(out_dir, f"{name}.png")
        fig = plot_wigner(xs, ps, w, title=name)
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def plot_wigner(xs, ps, w, title: str = ""):
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    vmax = float(np.max(np.abs(w)))
    # rows follow x, columns follow p; put x on the horizontal axis
    mesh = ax.pcolormesh(xs, ps, np.asarray(w).T, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="auto")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="W(x, p)")
    return fig


def _ok_rows(table):
    names = [c[0] for c in table.columns]
    if "status" not in names:
        return table.rows
    i = names.index("status")
    return [r for r in table.rows if r[i] == "ok"]


def _cols(table, rows, *names):
    idx = [[c[0] for c in table.columns].index(n) for n in names]
    return [np.array([r[i] for r in rows]) for i in idx]


def _plot_table1(table):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    rows = [r for r in _ok_rows(table) if r[1] == "shift_error"]
    n, pu, po, pf = _cols(table, rows, "n", "perror_u", "perror_opt_dist", "perror_flat")
    ax1.semilogy(n, pu, "o-", label="optimized u")
    ax1.semilogy(n, po, "s--", label="optimal distribution")
    ax1.semilogy(n, pf, "^:", label="flat")
    ax1.set_xlabel("rounds N")
    ax1.set_ylabel("P_error")
    ax1.legend(fontsize=8)
    rows = [r for r in _ok_rows(table) if r[1] == "delta_p"]
    n, du, do, df = _cols(table, rows, "n", "delta_p_db_u", "delta_p_db_opt_dist", "delta_p_db_flat")
    ax2.plot(n, du, "o-", label="optimized u")
    ax2.plot(n, do, "s--", label="optimal distribution")
    ax2.plot(n, df, "^:", label="flat")
    ax2.set_xlabel("rounds N")
    ax2.set_ylabel("Delta_P (dB)")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_fig2(table):
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    rows = _ok_rows(table)
    for n in sorted(set(r[0] for r in rows)):
        sub = [r for r in rows if r[0] == n]
        x, dp, dx = _cols(table, sub, "input_db", "delta_p_db", "delta_x_db")
        order = np.argsort(x)
        ax.plot(x[order], dp[order], "o-", color=_COLORS.get(n), label=f"N={n}")
        ax.plot(x[order], dx[order], "--", color=_COLORS.get(n), alpha=0.5)
    lims = ax.get_xlim()
    ax.plot(lims, lims, "k:", lw=0.8, label="input")
    ax.set_xlabel("input squeezing (dB)")
    ax.set_ylabel("Delta_P solid / Delta_X dashed (dB)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_fig4(table):
    rows = _ok_rows(table)
    channels = sorted(set(r[0] for r in rows))
    fig, axes = plt.subplots(1, max(len(channels), 1), figsize=(3.6 * max(len(channels), 1), 3.4), squeeze=False)
    for ax, ch in zip(axes[0], channels):
        sub = [r for r in rows if r[0] == ch]
        for n in sorted(set(r[2] for r in sub)):
            for post, style in ((1, "-"), (0, "--")):
                pts = [r for r in sub if r[2] == n and r[3] == post]
                if not pts:
                    continue
                g, dp = _cols(table, pts, "gamma_t", "delta_p_db")
                order = np.argsort(g)
                ax.semilogx(g[order], dp[order], style, marker=".", color=_COLORS.get(n),
                            label=f"N={n} {'PS' if post else 'no PS'}")
        ax.set_title(ch, fontsize=9)
        ax.set_xlabel("gamma T")
        ax.set_ylabel("Delta_P (dB)")
        ax.legend(fontsize=6)
    fig.tight_layout()
    return fig


def _plot_fig5(table):
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    rows = _ok_rows(table)
    for n in sorted(set(r[0] for r in rows)):
        sub = [r for r in rows if r[0] == n]
        x, ps, pm, pa = _cols(table, sub, "input_db", "perror_protocol", "perror_matched", "perror_asymptote")
        order = np.argsort(x)
        ax.semilogy(x[order], ps[order], "o-", color=_COLORS.get(n), label=f"N={n}")
        ax.semilogy(x[order], pm[order], "--", color=_COLORS.get(n), alpha=0.6)
        ax.axhline(pa[0], color=_COLORS.get(n), ls=":", lw=0.8)
    ax.set_xlabel("input squeezing (dB)")
    ax.set_ylabel("P_error (solid sim, dashed comb, dotted ideal)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_fig6(table):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    rows = _ok_rows(table)
    n, ml, dx, dp = _cols(table, rows, "n", "max_logical", "delta_x_db", "delta_p_db")
    ax1.bar(n, ml, color="tab:blue")
    ax1.axhline(0.95, color="k", ls=":", lw=0.8)
    ax1.set_xlabel("rounds N")
    ax1.set_ylabel("max |<U_L>|")
    ax2.plot(n, dx, "o-", label="Delta_X")
    ax2.plot(n, dp, "s--", label="Delta_P")
    ax2.set_xlabel("rounds N")
    ax2.set_ylabel("dB")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_fig7(table):
    rows = _ok_rows(table)
    presets = sorted(set(r[0] for r in rows))
    fig, axes = plt.subplots(2, max(len(presets), 1), figsize=(4.4 * max(len(presets), 1), 6.2), squeeze=False)
    for col, preset in enumerate(presets):
        sub = [r for r in rows if r[0] == preset]
        ax, axs = axes[0][col], axes[1][col]
        for n in sorted(set(r[1] for r in sub)):
            for post, style in ((1, "-"), (0, "--")):
                pts = [r for r in sub if r[1] == n and r[3] == post]
                if not pts:
                    continue
                x, dp, sc = _cols(table, pts, "input_db", "delta_p_db", "success")
                order = np.argsort(x)
                ax.plot(x[order], dp[order], style, marker=".", color=_COLORS.get(n),
                        label=f"N={n} {'PS' if post else 'no PS'}")
                if post:
                    axs.plot(x[order], sc[order], style, marker=".", color=_COLORS.get(n))
        ax.set_title(preset, fontsize=9)
        ax.set_ylabel("Delta_P (dB)")
        ax.legend(fontsize=6)
        axs.set_xlabel("input squeezing (dB)")
        axs.set_ylabel("success probability")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "table1": _plot_table1,
    "fig2_sweep": _plot_fig2,
    "fig4_noise": _plot_fig4,
    "fig5_shift_error": _plot_fig5,
    "fig6_vacuum": _plot_fig6,
    "fig7_realistic": _plot_fig7,
    # prepare: only the Wigner panel, handled via extras
}
