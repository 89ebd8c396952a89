"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_DPI = 150


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_distribution(path, states, pi, contributions, title=""):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.semilogy(states, pi, marker=".", lw=1)
    ax1.set_ylabel("pi(n)")
    ax1.grid(True, alpha=0.3)
    if title:
        ax1.set_title(title)
    ax2.plot(states, contributions, marker=".", lw=1, color="tab:orange")
    ax2.set_xlabel("state n")
    ax2.set_ylabel("pi(n) f(n)")
    ax2.grid(True, alpha=0.3)
    return _finish(fig, Path(path))


def save_candidates(path, etas, best_index, mode="min"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(range(len(etas)), etas, ".", ms=4, alpha=0.7)
    ax.plot([best_index], [etas[best_index]], "r*", ms=14,
            label=f"{mode} = {etas[best_index]:.6g}")
    ax.set_xlabel("candidate (enumeration order)")
    ax.set_ylabel("eta")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def save_modulus(path, ks, max_diffs, max_bounds):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(ks, [max(d, 1e-300) for d in max_diffs], "o-", label="max |eta diff|")
    ax.semilogy(ks, [max(b, 1e-300) for b in max_bounds], "s--", label="max bound")
    ax.set_xlabel("agreement prefix k")
    ax.set_ylabel("neighborhood modulus")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def save_stream(path, averages, eta_star):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(range(1, len(averages) + 1), averages, lw=1)
    ax.axhline(eta_star, color="r", ls="--", lw=1, label=f"optimum {eta_star}")
    ax.set_xlabel("block")
    ax.set_ylabel("running average")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def save_batches(path, batch_means, mean, lo, hi, analytic=None):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(range(1, len(batch_means) + 1), batch_means, "o-", ms=4, label="batch means")
    ax.axhline(mean, color="k", lw=1, label=f"estimate {mean:.6g}")
    ax.axhspan(lo, hi, color="k", alpha=0.15, label="95% CI")
    if analytic is not None:
        ax.axhline(analytic, color="r", ls="--", lw=1, label=f"analytic {analytic:.6g}")
    ax.set_xlabel("batch")
    ax.set_ylabel("time-average cost")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))
