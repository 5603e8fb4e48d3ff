"""SVG charts for the diagnostic bar plot and power curves.

Figures are written by matplotlib's SVG backend with a fixed
hash salt and no date metadata, so identical input gives identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib import rc_context  # noqa: E402
from matplotlib.colors import to_rgba  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

TSLS_COLOR = "#c0392b"
OLS_COLOR = "#2c5aa0"
_RC = {"svg.hashsalt": "ivkit", "svg.fonttype": "path", "font.family": "DejaVu Sans"}


def _save(fig: Figure, out_path: str | Path) -> Path:
    out = Path(out_path)
    with rc_context(_RC):
        fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
    return out


def ratio_label(bias_tsls: float, bias_ols: float) -> str:
    if bias_ols == 0:
        return "0/0" if bias_tsls == 0 else ("Inf" if bias_tsls > 0 else "-Inf")
    return f"{bias_tsls / bias_ols:.2f}"


def _shade(color: str, negative: bool) -> tuple:
    # negative biases are drawn desaturated
    r, g, b, _ = to_rgba(color)
    if not negative:
        return (r, g, b, 1.0)
    return (0.55 + 0.45 * r, 0.55 + 0.45 * g, 0.55 + 0.45 * b, 1.0)


def bias_chart(rows: Sequence, out_path: str | Path) -> Path:
    """Paired horizontal bars of |bias_tsls| and |bias_ols| per covariate.

    ``rows`` are :class:`~ivkit.diagnostics.DiagnosticsRow` objects, drawn top
    to bottom in the given order; the signed TSLS/OLS ratio is printed at the
    right of each row.
    """
    with rc_context(_RC):
        fig = Figure(figsize=(6.0, 0.6 * len(rows) + 1.2))
        ax = fig.add_subplot()
        h = 0.38
        ys = list(range(len(rows)))[::-1]
        top = max([abs(r.bias_tsls) for r in rows] + [abs(r.bias_ols) for r in rows] + [0.0])
        span = top if top > 0 else 1.0
        for y, r in zip(ys, rows):
            ax.barh(y + h / 2, abs(r.bias_tsls), height=h, color=_shade(TSLS_COLOR, r.bias_tsls < 0))
            ax.barh(y - h / 2, abs(r.bias_ols), height=h, color=_shade(OLS_COLOR, r.bias_ols < 0))
            ax.text(span * 1.08, y, ratio_label(r.bias_tsls, r.bias_ols), va="center", ha="left", fontsize=9)
        ax.set_yticks(ys, [r.covariate_name for r in rows])
        ax.set_xlim(0, span * 1.3)
        ax.set_xlabel("|bias|")
        ax.barh([], [], color=TSLS_COLOR, label="TSLS")
        ax.barh([], [], color=OLS_COLOR, label="OLS")
        ax.legend(loc="lower right", fontsize=8, frameon=False)
        fig.tight_layout()
    return _save(fig, out_path)


def power_curve(ns: Sequence[int], curves: Mapping[str, Sequence[float]], out_path: str | Path) -> Path:
    """Power against sample size, one line per test."""
    styles = ["-", "--", ":", "-."]
    with rc_context(_RC):
        fig = Figure(figsize=(5.0, 4.0))
        ax = fig.add_subplot()
        for i, (name, values) in enumerate(curves.items()):
            ys = [v if math.isfinite(v) else math.nan for v in values]
            ax.plot(list(ns), ys, linestyle=styles[i % len(styles)], color="black", label=name)
        ax.set_xlabel("sample size")
        ax.set_ylabel("power")
        ax.set_ylim(0, 1)
        ax.legend(loc="lower right", frameon=False)
        fig.tight_layout()
    return _save(fig, out_path)
