"""Figures written next to the CSV/JSON outputs (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FLOOR, DecayFit  # noqa: E402

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    p = Path(path)
    fig.savefig(p)
    plt.close(fig)
    return p


def plot_norms(record, path, columns: list[str] | None = None, title: str = "") -> Path:
    """Semilog plot of the norm columns of a run."""
    if columns is None:
        columns = [c for c in record.columns
                   if c.endswith(("_norm", "_grad", "_energy")) or c in ("lyapunov", "wave_energy")]
    t = record.t
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for c in columns:
            y = np.asarray(record[c], dtype=float)
            if np.any(y > 0):
                ax.semilogy(t, np.where(y > 0, y, np.nan), label=c, lw=1.2)
        ax.set_xlabel("t")
        ax.set_title(title)
        if columns:
            ax.legend(fontsize="small", ncol=2)
        return _save(fig, path)


def plot_fit(t, values, fit: DecayFit, path, label: str = "series", guaranteed: float | None = None) -> Path:
    """The fitted series with its fit line and, optionally, the guaranteed slope."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(t, np.where(y > FLOOR, y, np.nan), "k-", lw=1.0, label=label)
        if np.isfinite(fit.fitted_rate):
            lo, hi = fit.window
            tw = t[(t >= lo) & (t <= hi)]
            ax.semilogy(tw, np.exp(fit.line(tw)), "C3--", lw=1.5,
                        label=f"fit: rate {fit.fitted_rate:.4g}, r$^2$ {fit.r_squared:.4f}")
            if guaranteed is not None and tw.size:
                y0 = np.exp(fit.line(tw[0]))
                ax.semilogy(tw, y0 * np.exp(-guaranteed * (tw - tw[0])), "C0:", lw=1.5,
                            label=f"guaranteed rate {guaranteed:.4g}")
            ax.axvspan(lo, hi, color="0.9", zorder=0)
        ax.set_xlabel("t")
        ax.legend(fontsize="small")
        return _save(fig, path)


def plot_sweep(values, rates, verdicts, path, axis: str) -> Path:
    """Fitted rate against the swept parameter, marked by verdict."""
    colors = {"PASS": "C2", "FAIL": "C3", "NOT_APPLICABLE": "0.5"}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        x = np.asarray(values, dtype=float)
        r = np.asarray(rates, dtype=float)
        ax.plot(x, r, "k-", lw=0.8)
        for xi, ri, v in zip(x, r, verdicts):
            ax.plot(xi, ri, "o", color=colors.get(v, "C1"))
        ax.set_xlabel(axis)
        ax.set_ylabel("fitted rate")
        return _save(fig, path)
