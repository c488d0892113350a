"""V(t) figures written next to the CSV output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = {"converged": "tab:blue", "flatlined": "tab:red", "undecided": "tab:gray"}


def plot_lyapunov(results, path, title: str = "") -> None:
    """Semilog V(t) for every sample, colored by verdict."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for r in results:
        if r.lyapunov is None:
            continue
        ax.semilogy(r.times, r.lyapunov.clip(min=1e-30), lw=0.7,
                    color=COLORS.get(r.verdict, "k"), alpha=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$V(\rho(t), \rho_d(t))$")
    if title:
        ax.set_title(title, fontsize=10)
    handles = [plt.Line2D([], [], color=c, label=k) for k, c in COLORS.items()]
    ax.legend(handles=handles, fontsize=8, loc="lower left")
    fig.tight_layout()
    # fixed metadata keeps the PNG byte-identical between runs
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
