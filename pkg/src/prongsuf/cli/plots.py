"""SVG figures with byte-stable output."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "prongsuf", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def emit_plot(data, kind: str, path):
    """Render benchmark records (``boxplot``) or sweep rows (``line``) to SVG.

    Every box carries the gid ``box-<method>`` and every line ``series-<name>``.
    """
    data = list(data)
    if not data:
        raise ValueError("nothing to plot")
    with matplotlib.rc_context(_RC):
        if kind == "boxplot":
            _boxplot(data, path)
        elif kind == "line":
            _line(data, path)
        else:
            raise ValueError("kind must be 'boxplot' or 'line'")


def _boxplot(records, path):
    methods = [m for m in dict.fromkeys(r.method for r in records) if m != "exact"]
    groups = [[r.ratio_to_exact for r in records if r.method == m and r.ratio_to_exact is not None]
              for m in methods]
    keep = [(m, g) for m, g in zip(methods, groups) if g]
    if not keep:
        raise ValueError("no ratios to plot")
    fig, ax = plt.subplots(figsize=(6, 4))
    parts = ax.boxplot([g for _, g in keep], patch_artist=True, whis=(0, 100))
    for (m, _), box in zip(keep, parts["boxes"]):
        box.set_gid(f"box-{m}")
    ax.set_xticks(range(1, len(keep) + 1), [m for m, _ in keep])
    ax.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax.set_ylabel("SUF / exact SUF")
    fig.tight_layout()
    _save(fig, path)


def _line(rows, path):
    rows = [r for r in rows if r.feasible and not math.isnan(r.rho_prong)]
    if not rows:
        raise ValueError("no feasible sweep rows")
    fig, ax = plt.subplots(figsize=(6, 4))
    h = [r.b_z for r in rows]
    (a,) = ax.plot(h, [r.rho_prong for r in rows], "o-", label="with prongs")
    (b,) = ax.plot(h, [r.rho_noprong for r in rows], "s--", label="without prongs")
    a.set_gid("series-prong")
    b.set_gid("series-noprong")
    ax.set_xlabel("torso height b_z [m]")
    ax.set_ylabel("SUF [N]")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
