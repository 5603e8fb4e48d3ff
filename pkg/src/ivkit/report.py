"""Text, JSON and CSV rendering of analysis results.

Each ``*_payload`` function returns a plain dict holding every number at
full double precision; the matching ``*_text`` function prints the same
dict at display precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

from .diagnostics import CorrelationMatrix, DiagnosticsRow
from .kclass import FirstStageFit, KClassFit
from .weakiv import IntervalSet, TestResult

RULE = " ".join(["_"] * 30)
SIGNIF_LEGEND = "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"


def num(x: float):
    """JSON-safe float: NaN becomes null, infinities become strings."""
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return x


def g(x: float, digits: int) -> str:
    if math.isnan(x):
        return "NA"
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return f"{x:.{digits}g}"


def signif_stars(p: float) -> str:
    for cut, mark in ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, ".")):
        if p < cut:
            return mark
    return ""


def format_table_p(p: float) -> str:
    return "< 2e-16" if p < 2e-16 else f"{p:.3g}"


def to_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


# payloads


def first_stage_payload(fs: FirstStageFit) -> dict:
    return {
        "f_stat": num(fs.f_stat), "df1": fs.df1, "df2": fs.df2, "p_value": num(fs.p_value),
        "r_squared": num(fs.r_squared), "adj_r_squared": num(fs.adj_r_squared),
        "resid_se": num(fs.resid_se), "resid_df": fs.resid_df,
        "gamma_hat": [num(v) for v in fs.gamma_hat],
    }


def kclass_payload(fit: KClassFit, alpha: float, beta0: float) -> dict:
    lo, hi = fit.confint(alpha)
    return {
        "k": num(fit.k), "estimate": num(fit.beta_hat), "se": num(fit.se),
        "t_value": num(fit.t_stat(beta0)), "p_value": num(fit.p_value(beta0)),
        "df": fit.df_t, "error_model": fit.error_model.value, "ci": [num(lo), num(hi)],
    }


def test_payload(res: TestResult) -> dict:
    out = {
        "statistic": num(res.statistic), "p_value": num(res.p_value),
        "df1": res.df1, "df2": num(res.df2) if res.df2 is not None else None,
        "beta0": num(res.beta0), "alpha": num(res.alpha), "ci": res.confidence_set.to_dict(),
    }
    if res.ncp:
        out["ncp"] = num(res.ncp)
    return out


# text blocks


def first_stage_text(fs: FirstStageFit) -> list[str]:
    return [
        "First Stage Regression Result:",
        "",
        f"F={g(fs.f_stat, 7)}, df1={fs.df1}, df2={fs.df2}, p-value is {g(fs.p_value, 5)}",
        f"R-squared={g(fs.r_squared, 7)},   Adjusted R-squared={g(fs.adj_r_squared, 7)}",
        f"Residual standard error: {g(fs.resid_se, 7)} on {fs.resid_df} degrees of freedom",
    ]


def kclass_text(fits: dict[str, KClassFit], beta0: float) -> list[str]:
    width = max(len(name) for name in fits)
    cells = []
    for name, fit in fits.items():
        p = fit.p_value(beta0)
        cells.append([
            name, f"{fit.k:.6f}", f"{fit.beta_hat:.6f}", f"{fit.se:.6f}",
            f"{fit.t_stat(beta0):.3f}", format_table_p(p), signif_stars(p),
        ])
    header = ["", "k", "Estimate", "Std. Error", "t value", "Pr(>|t|)"]
    widths = [width] + [max(len(header[i]), *(len(c[i]) for c in cells)) for i in range(1, 6)]
    lines = [" ".join(h.rjust(w) if i else h.ljust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    for c in cells:
        row = " ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(c[:6], widths)))
        lines.append(f"{row} {c[6]}".rstrip())
    return ["Coefficients of k-Class Estimators:", "", *lines, "---", SIGNIF_LEGEND]


def _ci_lines(cs: IntervalSet, alpha: float) -> list[str]:
    return [f"{g(100 * (1 - alpha), 6)} percent confidence interval:", f" {cs}"]


def ar_text(res: TestResult) -> list[str]:
    return [
        "Anderson-Rubin test (under F distribution):",
        f"F={g(res.statistic, 7)}, df1={res.df1}, df2={g(res.df2, 10)}, p-value is {g(res.p_value, 5)}",
        *_ci_lines(res.confidence_set, res.alpha),
    ]


def clr_text(res: TestResult) -> list[str]:
    return [
        "Conditional Likelihood Ratio test (under Normal approximation):",
        f"Test Stat={g(res.statistic, 7)}, p-value is {g(res.p_value, 5)}",
        *_ci_lines(res.confidence_set, res.alpha),
    ]


def sensitivity_text(res: TestResult, delta_lo: float, delta_hi: float) -> list[str]:
    return [
        "Anderson-Rubin test:",
        f"Sensitivity analysis with deltarange [ {g(delta_lo, 6)} ,  {g(delta_hi, 6)} ]:",
        f"non-central F={g(res.statistic, 7)}, df1={res.df1}, df2={g(res.df2, 10)}, "
        f"ncp={g(res.ncp, 7)}, p-value is {g(res.p_value, 5)}",
        *_ci_lines(res.confidence_set, res.alpha),
    ]


def confint_text(intervals: dict[str, IntervalSet], alpha: float) -> list[str]:
    lo_head = f"{g(100 * alpha / 2, 4)} %"
    hi_head = f"{g(100 * (1 - alpha / 2), 4)} %"
    width = max(len(k) for k in intervals)

    def cell(x: float) -> str:
        return f"{x:.8f}" if math.isfinite(x) else g(x, 8)

    rows = []
    for name, cs in intervals.items():
        if cs.kind.value == "interval":
            lo, hi = cell(cs.lo), cell(cs.hi)
        else:
            lo, hi = str(cs), ""
        rows.append((name, lo, hi))
    w1 = max(len(lo_head), *(len(r[1]) for r in rows))
    w2 = max(len(hi_head), *(len(r[2]) for r in rows))
    lines = [f"{'':<{width}} {lo_head:>{w1}} {hi_head:>{w2}}"]
    lines += [f"{n:<{width}} {lo:>{w1}} {hi:>{w2}}".rstrip() for n, lo, hi in rows]
    return lines


DIAG_COLUMNS = (
    "covariate_name", "kappa_hat_j", "iv_imbalance", "ols_imbalance",
    "d_on_z_slope", "bias_tsls", "bias_ols", "bias_ratio",
)


def diagnostics_text(rows: Sequence[DiagnosticsRow]) -> list[str]:
    width = max(9, *(len(r.covariate_name) for r in rows))
    head = f"{'covariate':<{width}} {'kappa':>11} {'iv_imbal':>11} {'ols_imbal':>11} {'bias_tsls':>11} {'bias_ols':>11} {'ratio':>8}"
    lines = [head]
    for r in rows:
        ratio = g(r.bias_ratio, 4) if r.ratio_defined else ("0/0" if r.bias_tsls == 0 else "NA")
        lines.append(
            f"{r.covariate_name:<{width}} {r.kappa_hat_j:>11.5g} {r.iv_imbalance:>11.5g} "
            f"{r.ols_imbalance:>11.5g} {r.bias_tsls:>11.5g} {r.bias_ols:>11.5g} {ratio:>8}"
        )
    return lines


def correlation_text(cm: CorrelationMatrix, digits: int = 2) -> list[str]:
    labels = cm.labels
    width = max(len(s) for s in labels)
    cols = [max(len(s), digits + 3) for s in labels]

    def fmt(x: float) -> str:
        return "NA" if math.isnan(x) else f"{x:.{digits}f}".replace(f"-{0:.{digits}f}", f"{0:.{digits}f}")

    lines = [" " * width + "".join(" " + s.rjust(w) for s, w in zip(labels, cols))]
    for i, name in enumerate(labels):
        lines.append(name.ljust(width) + "".join(" " + fmt(cm.values[i, j]).rjust(w) for j, w in enumerate(cols)))
    return lines
