"""Figure rendering for run reports.

Every scenario that writes a CSV time series also renders a small summary
figure next to it, so a run directory is self-describing without external
plotting tools.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_timeseries(path, rows, columns, *, title: str = "",
                    logy: bool = True) -> None:
    """Render selected CSV columns against t into a PNG file."""
    if not rows:
        return
    t = [float(r["t"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for col in columns:
        y = [float(r[col]) for r in rows]
        if logy and all(v > 0 for v in y):
            ax.semilogy(t, y, label=col)
        else:
            ax.plot(t, y, label=col)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(path, epsilons, errors, *, title: str = "") -> None:
    """Log-log error-versus-epsilon plot with a reference slope."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(epsilons, errors, "o-", label="observed")
    if len(epsilons) >= 2 and min(errors) > 0:
        ref = [errors[0] * (e / epsilons[0]) ** 3 for e in epsilons]
        ax.loglog(epsilons, ref, "--", label="slope 3 reference")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
