"""Figure rendering for the CLI report paths.

Everything draws through the Agg backend straight to files; nothing ever
opens a window.  Each function takes the same row tuples the CSV writers
emit, so figures and delimited output always agree.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _save(fig, directory: str, name: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def cross_moment_figure(rows, directory: str) -> list[str]:
    """Curves of two-time product moments over the lag grid.

    rows: (tau, pair, method, value).  One figure per process family
    (population / intensity), exact curves solid, simulation dotted.
    """
    series = defaultdict(list)
    for tau, pair, method, value in rows:
        series[(pair, method)].append((float(tau), float(value)))
    paths = []
    for family, tag in (("Q", "population"), ("L", "intensity")):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        drew = False
        for (pair, method), pts in sorted(series.items()):
            if not pair.startswith(family):
                continue
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            style = "-" if method == "FD" else ":"
            ax.plot(xs, ys, style, label=f"{pair} ({method})")
            drew = True
        if not drew:
            plt.close(fig)
            continue
        ax.set_xlabel("lag")
        ax.set_ylabel("product moment")
        ax.set_title(f"Two-time {tag} moments")
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        paths.append(_save(fig, directory, f"cross_{tag}.png"))
    return paths


def compare_figure(rows, directory: str) -> list[str]:
    """Error-vs-parameter panels from comparison rows.

    rows: (order, method, param, runtime_s, mae, mre).
    """
    fd = defaultdict(list)
    mc = defaultdict(list)
    for order, method, param, _rt, _mae, mre in rows:
        if method == "FD":
            fd[order].append((float(param), float(mre)))
        elif method == "MC":
            mc[order].append((float(param), float(mre)))
    paths = []
    for data, xlabel, name in ((fd, "step width h", "fd_error"), (mc, "replications", "mc_error")):
        if not data:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for order, pts in sorted(data.items()):
            pts.sort()
            ax.loglog([p[0] for p in pts], [max(p[1], 1e-300) for p in pts],
                      "o-", label=f"order {order}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("summed relative error")
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        paths.append(_save(fig, directory, f"{name}.png"))
    return paths


def nearly_unstable_figure(rows, directory: str) -> list[str]:
    """Gamma-limit distance against the criticality index."""
    pts = sorted((float(t), float(d)) for t, d in rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], "o-")
    ax.set_xlabel("criticality index")
    ax.set_ylabel("sup transform distance")
    ax.grid(True, which="both", alpha=0.3)
    return [_save(fig, directory, "nearly_unstable.png")]
