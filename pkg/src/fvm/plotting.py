"""Figures written next to JSON reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def fvm_figure(trace: Sequence[int], title: str, path: str | Path) -> Path:
    """Cumulative premise hits and violations against attempts."""
    hits, bad = [], []
    h = v = 0
    for code in trace:
        h += code >= 1
        v += code == 2
        hits.append(h)
        bad.append(v)
    xs = range(1, len(trace) + 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(xs, hits, label="premise held")
    ax.plot(xs, bad, label="conclusion failed", color="crimson")
    ax.set_xlabel("attempt")
    ax.set_ylabel("count")
    ax.set_title(title, fontsize=9)
    ax.legend(loc="upper left", fontsize=8)
    return _save(fig, path)


def law_figure(reports: Sequence[dict], path: str | Path) -> Path:
    """Pass/fail grid with one row per law and one column per axiom."""
    axioms: list[str] = []
    for r in reports:
        for a in r["axioms"]:
            if a["axiom"] not in axioms:
                axioms.append(a["axiom"])
    grid = []
    for r in reports:
        status = {a["axiom"]: a for a in r["axioms"]}
        row = []
        for name in axioms:
            a = status.get(name)
            row.append(float("nan") if a is None or not a["checked"] else (1.0 if a["passed"] else 0.0))
        grid.append(row)
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(axioms), 0.9 + 0.45 * len(reports)))
    ax.imshow(grid, cmap="RdYlGn", vmin=0, vmax=1, aspect="auto")
    ax.set_xticks(range(len(axioms)), axioms, rotation=40, ha="right", fontsize=8)
    ax.set_yticks(range(len(reports)), [r["law"]["law"] for r in reports], fontsize=8)
    return _save(fig, path)


def spectrum_figure(p: Sequence[int], q: Sequence[int], labels: tuple[str, str], path: str | Path) -> Path:
    """Coefficients of two characteristic polynomials side by side."""
    n = max(len(p), len(q))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.4
    ax.bar([i - width / 2 for i in range(len(p))], p, width, label=labels[0])
    ax.bar([i + width / 2 for i in range(len(q))], q, width, label=labels[1])
    ax.set_xticks(range(n), [f"x^{n - 1 - i}" for i in range(n)], fontsize=8)
    ax.set_ylabel("coefficient")
    ax.legend(fontsize=8)
    return _save(fig, path)
