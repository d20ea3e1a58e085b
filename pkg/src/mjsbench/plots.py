"""Figure rendering for sweep and single-run reports.

Figures are drawn agg-side (no pyplot state) and written next to the
delimited output. PNG metadata is pinned so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

from matplotlib.figure import Figure

_PNG_META = {"Software": "mjsbench"}


def _save(fig: Figure, path: str) -> None:
    fig.savefig(path, dpi=140, format="png", metadata=_PNG_META)


def render_sysid_figure(rows: list[dict], path: str) -> None:
    """Median relative estimation error vs horizon, one line per grid cell."""
    medians = [r for r in rows if r["kind"] == "sysid-median"]
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.subplots()
    cells: dict[tuple, list[tuple[int, float]]] = {}
    for r in medians:
        key = (r["n"], r["p"], r["s"], r["sigma_w"], r["sigma_z"])
        cells.setdefault(key, []).append((r["T"], r["rel_Psi"]))
    for key in sorted(cells):
        pts = sorted(cells[key])
        label = f"n={key[0]} p={key[1]} s={key[2]} sw={key[3]:g} sz={key[4]:g}"
        ax.plot([t for t, _ in pts], [e for _, e in pts], marker="o", label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("trajectory length T")
    ax.set_ylabel("median relative error")
    ax.set_title("Identification error vs horizon")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def render_regret_figure(rows: list[dict], path: str) -> None:
    """Median regret at epoch boundaries vs time, one line per grid cell."""
    medians = [r for r in rows if r["kind"] == "regret-median"]
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.subplots()
    cells: dict[tuple, list[tuple[int, float]]] = {}
    for r in medians:
        key = (r["n"], r["p"], r["s"], r["sigma_w"])
        cells.setdefault(key, []).append((r["t"], r["regret"]))
    for key in sorted(cells):
        pts = sorted(cells[key])
        label = f"n={key[0]} p={key[1]} s={key[2]} sw={key[3]:g}"
        ax.plot([t for t, _ in pts], [max(v, 0.0) for _, v in pts], marker="o", label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("time step")
    ax.set_ylabel("median regret")
    ax.set_title("Adaptive control regret")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def render_single_figure(report: dict, path: str) -> None:
    """Regret curve of the report's adaptive run."""
    samples = report["adaptive_run"]["regret_samples"]
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.subplots()
    ax.plot([t for t, _ in samples], [r for _, r in samples], marker="o")
    ax.set_xlabel("time step")
    ax.set_ylabel("regret")
    ax.set_title("Single-run regret at epoch boundaries")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
