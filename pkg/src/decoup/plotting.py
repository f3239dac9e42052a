"""Deterministic SVG figures (fixed hash salt, no timestamp)."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .caps import CapFamily  # noqa: E402
from .harness import GrowthFit, RatioRecord  # noqa: E402

_RC = {"svg.hashsalt": "decoup", "svg.fonttype": "none"}


def _save(fig, path: Path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_family(family: CapFamily, path: str | Path) -> None:
    """Axis-pair projections of the family (one panel per pair; a strip for d = 1)."""
    path = Path(path)
    if family.d == 1:
        fig, ax = plt.subplots(figsize=(6, 1.6))
        for iv in family.axis_lists[0]:
            lo, hi = iv.bounds
            ax.add_patch(Rectangle((lo, 0), hi - lo, 1, fill=False, lw=0.6))
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_yticks([])
        ax.set_xlabel("xi_1")
    else:
        pairs = list(itertools.combinations(range(family.d), 2))
        fig, axes = plt.subplots(1, len(pairs), figsize=(3.2 * len(pairs), 3.2), squeeze=False)
        for ax, (a, b) in zip(axes[0], pairs):
            for ia in family.axis_lists[a]:
                for ib in family.axis_lists[b]:
                    (x0, x1), (y0, y1) = ia.bounds, ib.bounds
                    ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, lw=0.4))
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
            ax.set_aspect("equal")
            ax.set_xlabel(f"xi_{a + 1}")
            ax.set_ylabel(f"xi_{b + 1}")
    fig.suptitle(family.family_id)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(records: Sequence[RatioRecord], fits: Sequence[GrowthFit], path: str | Path) -> None:
    """Log-log ratio against R, one curve per (p, ensemble)."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    groups = sorted({(r.p, r.ensemble) for r in records if r.status == "ok"})
    for p, ens in groups:
        rs = [r for r in records if r.status == "ok" and r.p == p and r.ensemble == ens]
        line = ax.errorbar([r.R for r in rs], [r.ratio for r in rs],
                           yerr=[r.ratio_stderr for r in rs], fmt="o", ms=3, alpha=0.6)
        fit = next((f for f in fits if f.p == p and f.ensemble == ens), None)
        label = f"p={p:.3g} {ens}"
        if fit is not None:
            ax.plot(fit.Rs, fit.medians, "-", color=line[0].get_color())
            label += f" (eps={fit.epsilon:.3f})"
        line.set_label(label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("decoupling ratio")
    if groups:
        ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, Path(path))
