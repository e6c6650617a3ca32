"""Figure rendering for experiment reports.

Each renderer takes a stats object and the report file path and drops
PNG figures alongside it, returning the created paths.  Rendering is
optional everywhere; the delimited output never depends on it.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .hypercube import RpmpStats
from .line_poisson import LineStats, busy_cycle_pdf, mean_distance_log_bound


def render_rpmp_figures(stats: RpmpStats, out_path: Path) -> list[Path]:
    base = Path(out_path).with_suffix("")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    xs = np.asarray(stats.matching_distance_samples)
    if xs.size:
        ax1.hist(xs, bins=min(40, max(5, int(math.sqrt(xs.size)))),
                 color="tab:blue", alpha=0.75)
        ax1.axvline(xs.mean(), color="tab:red", lw=1.5,
                    label=f"mean {xs.mean():.4g}")
        ax1.legend()
    ax1.set_xlabel("sampled pair distance")
    ax1.set_ylabel("count")
    ax1.set_title(f"n={stats.config.n}, k={stats.config.k}, "
                  f"{stats.config.metric}")

    labels = ["multiple\npartners", "non-unique\nmatching", "certificate\nboth sides"]
    values = [stats.fraction_multiple_partners,
              stats.fraction_nonunique_matching,
              stats.fraction_cert_both]
    ax2.bar(labels, values, color=["tab:orange", "tab:green", "tab:purple"])
    ax2.set_ylim(0, 1)
    ax2.set_ylabel("fraction of trials / agents")
    ax2.set_title(f"{stats.config.trials} trials")

    fig.tight_layout()
    target = base.parent / f"{base.name}_rpmp.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return [target]


def render_line_figures(stats: LineStats, out_path: Path) -> list[Path]:
    base = Path(out_path).with_suffix("")
    lam, mu = stats.config.lam, stats.config.mu
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(14, 4))

    sizes = stats.class_sizes()
    if sizes.size:
        kmax = int(sizes.max())
        ks = np.arange(1, kmax + 1)
        freq = np.array([(sizes == k).sum() for k in ks]) / sizes.size
        ax1.bar(ks, freq, color="tab:blue", alpha=0.7, label="observed")
        rho = lam / mu
        ax1.plot(ks, (1 - rho) * rho ** (ks - 1), "o-", color="tab:red",
                 ms=4, label="geometric")
        ax1.set_yscale("log")
        ax1.legend()
    ax1.set_xlabel("blues per wave")
    ax1.set_ylabel("frequency")
    ax1.set_title("wave class sizes")

    fq = stats.queue_samples("fq")
    if fq.size:
        ax2.hist(fq, bins=80, density=True, color="tab:blue", alpha=0.7,
                 label="forward queue")
        ts = np.linspace(fq.min() if fq.min() > 0 else 1e-9, fq.max(), 400)
        ax2.plot(ts, busy_cycle_pdf(lam, mu, ts), color="tab:red",
                 label="busy cycle pdf")
        ax2.legend()
    ax2.set_xlabel("matching distance")
    ax2.set_title("queue distances")

    xs = stats.stable_samples()
    if xs.size:
        ax3.hist(xs, bins=80, density=True, color="tab:blue", alpha=0.7)
        ax3.axvline(xs.mean(), color="tab:red", lw=1.5,
                    label=f"mean {xs.mean():.4g}")
        ax3.axvline(mean_distance_log_bound(lam, mu), color="tab:green",
                    lw=1.5, ls="--", label="log bound")
        ax3.set_yscale("log")
        ax3.legend()
    ax3.set_xlabel("matching distance")
    ax3.set_title("stable matching distances")

    fig.suptitle(f"lam={lam}, mu={mu}, window={stats.config.window:g}")
    fig.tight_layout()
    target = base.parent / f"{base.name}_line.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return [target]
