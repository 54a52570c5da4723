"""Figure rendering for the report path.

Every curve or solver run can drop a PNG next to its CSV/result file; the
data files stay the canonical output, figures are a convenience layer.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_curve_figure(curve, path, kinks=None, title="", xlabel="parameter",
                      ylabel="value") -> Path:
    """Line plot of a ScanCurve; kink locations and infeasible points marked."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ok = np.array([f == "ok" for f in curve.flags])
    ax.plot(curve.parameter[ok], curve.values[ok], lw=1.2, color="tab:blue")
    if (~ok).any():
        ymin = np.nanmin(curve.values[ok]) if ok.any() else 0.0
        ax.plot(curve.parameter[~ok], np.full((~ok).sum(), ymin), "x",
                color="tab:red", ms=5, label="infeasible")
        ax.legend(frameon=False, fontsize=8)
    if kinks is not None:
        for kink in kinks.kinks:
            ax.axvline(kink.location, color="tab:orange", ls="--", lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_report_figure(report, path, title="") -> Path:
    """Two panels: occupation profile (density diagonal) and spectrum."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    diag = np.real(np.diag(report.density))
    ax0.bar(np.arange(len(diag)), diag, color="tab:blue", width=0.8)
    ax0.set_xlabel("orbital / site")
    ax0.set_ylabel("occupation")
    ax0.set_ylim(0.0, 1.05)
    eps = np.asarray(report.spectrum, dtype=float)
    ax1.hlines(eps, 0.1, 0.9, color="tab:green", lw=1.4)
    if report.mu is not None:
        ax1.axhline(0.0 if report.kappa is not None else report.mu, color="tab:red",
                    ls=":", lw=1.0)
    ax1.set_xticks([])
    ax1.set_ylabel("quasiparticle energy" if report.kappa is not None else "orbital energy")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
