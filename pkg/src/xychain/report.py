"""Matplotlib figures written next to the tabular CLI outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write  # noqa: E402


def _save(fig, path):
    import io as _io

    buf = _io.BytesIO()
    fmt = str(path).rsplit(".", 1)[-1].lower() if "." in str(path) else "png"
    fig.savefig(buf, format=fmt, dpi=120, bbox_inches="tight", metadata=_metadata(fmt))
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def _metadata(fmt):
    if fmt == "png":
        return {"Software": None}
    if fmt in ("pdf", "svg"):
        return {"Creator": None, "Date": None} if fmt == "pdf" else {"Date": None}
    return None


def plot_series(series, path, fit=None):
    """|value| against L on a log scale, with sign markers and an optional fit curve."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    Ls, vals = series.Ls, series.values
    mag = np.abs(vals)
    ok = mag > 0
    pos, neg = ok & (vals > 0), ok & (vals < 0)
    ax.semilogy(Ls[pos], mag[pos], "o", ms=3, color="tab:red", label="positive")
    ax.semilogy(Ls[neg], mag[neg], "s", ms=3, color="tab:blue", label="negative")
    if fit is not None and fit.model in ("exponential", "powerlaw"):
        x = np.linspace(fit.window[0], fit.window[1], 100)
        A = fit.prefactors["A"]
        y = A * np.exp(-fit.exponents["beta"] * x) if fit.model == "exponential" else A * x ** (-fit.exponents["alpha"])
        ax.semilogy(x, y, "k-", lw=1, label=fit.model)
    elif fit is not None and fit.model == "biexponential":
        for branch, parity in (("U", 0), ("L", 1)):
            x = np.arange(fit.window[0], fit.window[1] + 1)
            x = x[x % 2 == parity]
            ax.semilogy(x, fit.prefactors[f"A_{branch}"] * np.exp(-fit.exponents[f"beta_{branch}"] * x),
                        "k-" if branch == "U" else "k--", lw=1, label=f"branch {branch}")
    ax.set_xlabel("L")
    ax.set_ylabel(f"|{series.quantity}|")
    ax.set_title(f"gamma={series.gamma:g}, h={series.h:g}")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_case_map(casemap, path, arcs=None):
    """Case labels on the grid with fitted arcs overlaid."""
    codes = {"Case1": 1, "Case2": 2, "Case3": 3, "Case4": 4, "Case5": 5, "Unclassifiable": 0}
    img = np.vectorize(codes.get, otypes=[float])(casemap.labels)
    g = casemap.grid
    fig, ax = plt.subplots(figsize=(5, 4.5))
    cmap = matplotlib.colormaps["tab10"].resampled(6)
    im = ax.imshow(img.T, origin="lower", cmap=cmap, vmin=-0.5, vmax=5.5, aspect="auto",
                   extent=(g.gamma_min, g.gamma_max, g.h_min, g.h_max), interpolation="nearest")
    fig.colorbar(im, ax=ax, ticks=range(6), label="case (0 = unclassifiable)")
    if arcs is not None:
        t = np.linspace(0, np.pi / 2, 200)
        for a in arcs.arcs:
            ax.plot(np.cos(t), a.h0 * np.sin(t), "k-", lw=0.8)
    ax.set_xlim(g.gamma_min, g.gamma_max)
    ax.set_ylim(g.h_min, g.h_max)
    ax.set_xlabel("gamma")
    ax.set_ylabel("h")
    ax.set_title(f"L={casemap.L}")
    _save(fig, path)


def plot_sign_map(signmap, path, curves=()):
    """Clamped field with zero curves overlaid."""
    g = signmap.grid
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(np.where(signmap.signs == 0, np.nan, signmap.clamped).T, origin="lower",
                   cmap="RdBu_r", vmin=-signmap.delta, vmax=signmap.delta, aspect="auto",
                   extent=(g.gamma_min, g.gamma_max, g.h_min, g.h_max), interpolation="nearest")
    fig.colorbar(im, ax=ax, label=signmap.quantity)
    for c in curves:
        ax.plot(c.points[:, 0], c.points[:, 1], "w.", ms=1)
    ax.set_xlabel("gamma")
    ax.set_ylabel("h")
    ax.set_title(f"{signmap.quantity}, L={signmap.L}")
    _save(fig, path)


def plot_em_compare(rows, path):
    """|exact| and Euler-Maclaurin estimates of the sector gap against L."""
    rows = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    labels = ("exact", "closed form, leading", "closed form, two terms", "Euler-Maclaurin")
    styles = ("ko", "b--", "g-.", "r-")
    for col, lab, st in zip(range(1, 5), labels, styles):
        ax.loglog(rows[:, 0], np.abs(rows[:, col]), st, ms=3, label=lab)
    ax.set_xlabel("L")
    ax.set_ylabel("|E_NS - E_R|")
    ax.legend(fontsize=7)
    _save(fig, path)
