"""Command-line interface: ``ivkit <command> --data file.csv ...``.

Defaults for any long option may be stored in a JSON object (keys are the
option names with dashes or underscores) whose path is given by the
``IVKIT_CONFIG`` environment variable; explicit flags take precedence.

Exit status: 0 on success, 2 for invalid configuration, 3 for unsupported
option combinations and 1 for any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import report
from .dataset import IVData, ProjectedData, load_csv, project
from .diagnostics import correlation_matrix, emit_bias_chart, iv_diagnosis
from .errors import ConfigurationError, IVError, UnsupportedError
from .kclass import ErrorModel, KClassFit, first_stage, fit_k, liml_k
from .plotting import power_curve
from .power import PowerDesign, PowerMethod, PowerSpec, min_sample_size, power, power_ar, power_tsls
from .sensitivity import SensitivitySpec, sens_interval
from .weakiv import IntervalSet, SetKind, ar_test, clr_test

CONFIG_ENV = "IVKIT_CONFIG"
_VALUE_FLAGS = ("--delta", "--beta", "--beta0")


def _split(value: str | Sequence[str] | None) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(s.strip() for s in value.split(",") if s.strip())
    return tuple(value)


def _pair(value: str | Sequence[float] | None, flag: str) -> tuple[float, float] | None:
    if value is None:
        return None
    parts = _split(value) if isinstance(value, str) else tuple(value)
    try:
        lo, hi = (float(v) for v in parts)
    except ValueError:
        raise ConfigurationError(f"{flag} expects two numbers 'lo,hi', got {value!r}") from None
    return lo, hi


def _grid(value: str | None) -> list[int] | None:
    if value is None:
        return None
    try:
        lo, hi, step = (int(v) for v in value.split(":"))
    except ValueError:
        raise ConfigurationError(f"--n-grid expects 'lo:hi:step' integers, got {value!r}") from None
    if step <= 0 or lo <= 0 or hi < lo:
        raise ConfigurationError(f"--n-grid range is invalid: {value!r}")
    return list(range(lo, hi + 1, step))


@dataclass
class AnalysisConfig:
    data: Path
    outcome: str
    exposure: str
    instruments: tuple[str, ...]
    covariates: tuple[str, ...] = ()
    intercept: bool = True
    alpha: float = 0.05
    k: tuple[str, ...] = ("0", "fuller", "1", "liml")
    fuller_b: float = 1.0
    error_model: ErrorModel = ErrorModel.HOMOSKEDASTIC
    cluster_col: str | None = None
    beta0: float = 0.0
    delta: tuple[float, float] | None = None
    seed: int = 42
    fmt: str = "text"
    plot: Path | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"--alpha must lie in (0, 1), got {self.alpha}")
        if (self.error_model is ErrorModel.CLUSTER) != (self.cluster_col is not None):
            raise ConfigurationError("--cluster-col is required with --se cluster and only then")
        if not self.instruments:
            raise ConfigurationError("at least one instrument is required (--instruments)")
        if self.fmt not in ("text", "json", "csv"):
            raise ConfigurationError(f"unknown output format {self.fmt!r}")

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "AnalysisConfig":
        for name in ("data", "outcome", "exposure", "instruments"):
            if getattr(ns, name) in (None, ""):
                raise ConfigurationError(f"--{name} is required")
        return cls(
            data=Path(ns.data), outcome=ns.outcome, exposure=ns.exposure,
            instruments=_split(ns.instruments), covariates=_split(ns.covariates),
            intercept=not ns.no_intercept, alpha=float(ns.alpha), k=_split(ns.k),
            fuller_b=float(ns.fuller_b), error_model=ErrorModel.parse(ns.se),
            cluster_col=ns.cluster_col, beta0=float(ns.beta0), delta=_pair(ns.delta, "--delta"),
            seed=int(ns.seed), fmt=ns.format, plot=Path(ns.plot) if ns.plot else None,
        )


class Analysis:
    """Data loaded once per invocation with lazily computed projections."""

    def __init__(self, config: AnalysisConfig):
        self.config = config
        self.data: IVData = load_csv(
            config.data, config.outcome, config.exposure, config.instruments,
            config.covariates, cluster=config.cluster_col, intercept=config.intercept,
        )
        self._proj: ProjectedData | None = None

    @property
    def proj(self) -> ProjectedData:
        if self._proj is None:
            self._proj = project(self.data)
        return self._proj

    def k_fits(self) -> dict[str, KClassFit]:
        cfg, proj = self.config, self.proj
        fits: dict[str, KClassFit] = {}
        k_liml = None
        for token in cfg.k:
            key = token.lower()
            if key in ("liml", "fuller"):
                k_liml = liml_k(proj) if k_liml is None else k_liml
                k, name = (k_liml, "LIML") if key == "liml" else (k_liml - cfg.fuller_b / proj.df_resid, "Fuller")
            else:
                try:
                    k = float(token)
                except ValueError:
                    raise ConfigurationError(f"--k entries must be numbers, 'liml' or 'fuller', got {token!r}") from None
                name = {0.0: "OLS", 1.0: "TSLS"}.get(k, f"k={token}")
            model = cfg.error_model if k == 1.0 else ErrorModel.HOMOSKEDASTIC
            fits[name] = fit_k(proj, k, model, label=name)
        return fits


# commands


def cmd_summary(an: Analysis) -> str:
    cfg, proj = an.config, an.proj
    fits = an.k_fits()
    fs = first_stage(proj)
    ar = ar_test(proj, cfg.beta0, cfg.alpha)
    clr = clr_test(proj, cfg.beta0, cfg.alpha, seed=cfg.seed)
    if cfg.fmt == "json":
        return report.to_json({
            "n": proj.n, "n_dropped": an.data.n_dropped, "L": proj.L, "p": proj.p,
            "first_stage": report.first_stage_payload(fs),
            "kclass": {name.lower(): report.kclass_payload(f, cfg.alpha, cfg.beta0) for name, f in fits.items()},
            "ar": report.test_payload(ar), "clr": report.test_payload(clr),
        })
    if cfg.fmt == "csv":
        rows = [(name, f.k, f.beta_hat, f.se, f.t_stat(cfg.beta0), f.p_value(cfg.beta0)) for name, f in fits.items()]
        return report.to_csv(("method", "k", "estimate", "se", "t_value", "p_value"), rows)
    lines = [
        "Call:",
        f"ivkit summary: outcome={cfg.outcome}, exposure={cfg.exposure}, "
        f"instruments={','.join(cfg.instruments)}, covariates={','.join(cfg.covariates) or '(none)'}",
        f"sample size: {proj.n}",
        report.RULE, "",
        *report.first_stage_text(fs),
        report.RULE, "",
        *report.kclass_text(fits, cfg.beta0),
        report.RULE, "",
        f"Alternative tests for the treatment effect under H_0: beta={report.g(cfg.beta0, 6)}.", "",
        *report.ar_text(ar), "",
        *report.clr_text(clr),
    ]
    return "\n".join(lines) + "\n"


def cmd_confint(an: Analysis) -> str:
    cfg, proj = an.config, an.proj
    intervals: dict[str, IntervalSet] = {}
    for name, fit in an.k_fits().items():
        lo, hi = fit.confint(cfg.alpha)
        intervals[name] = IntervalSet(SetKind.INTERVAL, lo, hi)
    intervals["AR"] = ar_test(proj, cfg.beta0, cfg.alpha).confidence_set
    intervals["CLR"] = clr_test(proj, cfg.beta0, cfg.alpha, seed=cfg.seed).confidence_set
    if cfg.fmt == "json":
        return report.to_json({"alpha": cfg.alpha, "intervals": {k: v.to_dict() for k, v in intervals.items()}})
    if cfg.fmt == "csv":
        rows = [(k, v.kind.value, report.num(v.lo), report.num(v.hi)) for k, v in intervals.items()]
        return report.to_csv(("method", "kind", "lo", "hi"), rows)
    return "\n".join(report.confint_text(intervals, cfg.alpha)) + "\n"


def _power_spec(an: Analysis, ns: argparse.Namespace, method: PowerMethod) -> PowerSpec:
    if ns.beta is None:
        raise ConfigurationError("--beta is required")
    delta_max = 0.0
    if method is PowerMethod.AR_SENS:
        if an.config.delta is None:
            raise ConfigurationError("--delta is required for --method arsens")
        delta_max = SensitivitySpec(*an.config.delta, alpha=an.config.alpha).delta_max
    design = PowerDesign.from_data(an.proj)
    return PowerSpec(float(ns.beta) - an.config.beta0, an.proj.n, design, method, an.config.alpha, delta_max)


def cmd_power(an: Analysis, ns: argparse.Namespace) -> str:
    cfg = an.config
    method = PowerMethod.parse(ns.method)
    spec = _power_spec(an, ns, method)
    grid = _grid(ns.n_grid)
    if grid is None:
        value = power(spec)
        if cfg.fmt == "json":
            return report.to_json({"method": method.value, "beta": ns.beta, "n": spec.n, "power": report.num(value)})
        if cfg.fmt == "csv":
            return report.to_csv(("method", "n", "power"), [(method.value, spec.n, value)])
        return f"{report.g(value, 7)}\n"

    tsls = [power_tsls(spec.lam, m, spec.design, spec.alpha) for m in grid]
    ar = [power_ar(spec.lam, m, spec.design, spec.alpha) for m in grid]
    if cfg.plot is not None:
        power_curve(grid, {"TSLS": tsls, "AR": ar}, cfg.plot)
    if cfg.fmt == "json":
        return report.to_json({"beta": ns.beta, "n": grid, "power_tsls": tsls, "power_ar": ar})
    return report.to_csv(("n", "power_tsls", "power_ar"), zip(grid, tsls, ar))


def cmd_samplesize(an: Analysis, ns: argparse.Namespace) -> str:
    method = PowerMethod.parse(ns.method)
    spec = _power_spec(an, ns, method)
    n = min_sample_size(spec, float(ns.target_power))
    if an.config.fmt == "json":
        return report.to_json({"method": method.value, "beta": ns.beta, "target_power": ns.target_power, "n": n})
    if an.config.fmt == "csv":
        return report.to_csv(("method", "target_power", "n"), [(method.value, ns.target_power, n)])
    return f"{n}\n"


def cmd_sensitivity(an: Analysis) -> str:
    cfg = an.config
    if cfg.delta is None:
        raise ConfigurationError("--delta lo,hi is required for sensitivity")
    if an.data.L != 1:
        raise UnsupportedError("sensitivity analysis supports a single instrument only")
    spec = SensitivitySpec(*cfg.delta, alpha=cfg.alpha)
    res = sens_interval(an.proj, spec, cfg.beta0)
    if cfg.fmt == "json":
        return report.to_json({"delta": list(cfg.delta), "sensitivity": report.test_payload(res)})
    if cfg.fmt == "csv":
        cs = res.confidence_set
        row = (res.statistic, res.df1, res.df2, res.ncp, res.p_value, cs.kind.value, report.num(cs.lo), report.num(cs.hi))
        return report.to_csv(("statistic", "df1", "df2", "ncp", "p_value", "kind", "lo", "hi"), [row])
    return "\n".join(report.sensitivity_text(res, *cfg.delta)) + "\n"


def cmd_diagnose(an: Analysis, ns: argparse.Namespace) -> str:
    cfg = an.config
    rows = iv_diagnosis(an.data, kappa_method=ns.kappa)
    if cfg.plot is not None:
        emit_bias_chart(rows, cfg.plot)
    if cfg.fmt == "json":
        return report.to_json({"kappa_method": ns.kappa, "rows": [r.to_dict() for r in rows]})
    if cfg.fmt == "csv":
        out = [[r.to_dict()[c] for c in report.DIAG_COLUMNS] for r in rows]
        return report.to_csv(report.DIAG_COLUMNS, out)
    return "\n".join(report.diagnostics_text(rows)) + "\n"


def cmd_cor(an: Analysis) -> str:
    cm = correlation_matrix(an.data)
    if an.config.fmt == "json":
        return report.to_json({"labels": list(cm.labels), "matrix": [[report.num(v) for v in row] for row in cm.values]})
    if an.config.fmt == "csv":
        rows = [[name, *(report.num(v) for v in cm.values[i])] for i, name in enumerate(cm.labels)]
        return report.to_csv(("", *cm.labels), rows)
    return "\n".join(report.correlation_text(cm)) + "\n"


# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    a = p.add_argument
    a("--data", help="CSV file with a header row")
    a("--outcome", help="outcome column Y")
    a("--exposure", help="exposure / endogenous column D")
    a("--instruments", help="comma-separated instrument columns")
    a("--covariates", default="", help="comma-separated exogenous covariate columns")
    a("--no-intercept", action="store_true", help="do not add an intercept column")
    a("--alpha", type=float, default=0.05)
    a("--k", default="0,fuller,1,liml", help="k values: numbers, 'liml' or 'fuller'")
    a("--fuller-b", type=float, default=1.0)
    a("--se", choices=("homo", "hc", "cluster"), default="homo", help="TSLS standard error model")
    a("--cluster-col", default=None)
    a("--beta0", type=float, default=0.0, help="null value of the exposure effect")
    a("--delta", default=None, help="sensitivity range 'lo,hi'")
    a("--seed", type=int, default=42, help="seed for CLR simulation with several instruments")
    a("--format", choices=("text", "json", "csv"), default="text")
    a("--plot", default=None, help="write an SVG chart to this path")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="ivkit", description="Instrumental variables analysis toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("summary", parents=[common], help="first stage, k-class table, AR and CLR")
    sub.add_parser("confint", parents=[common], help="confidence intervals for every method")
    for name in ("power", "samplesize"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} for the test of beta0 against --beta")
        sp.add_argument("--beta", type=float, default=None, help="alternative exposure effect")
        sp.add_argument("--method", choices=("tsls", "ar", "arsens"), default="tsls")
        if name == "power":
            sp.add_argument("--n-grid", default=None, help="sample-size grid 'lo:hi:step' (CSV output)")
        else:
            sp.add_argument("--target-power", type=float, default=0.8)
    sub.add_parser("sensitivity", parents=[common], help="AR sensitivity interval over --delta")
    dp = sub.add_parser("diagnose", parents=[common], help="covariate imbalance bias table")
    dp.add_argument("--kappa", choices=("joint", "marginal"), default="joint")
    sub.add_parser("cor", parents=[common], help="correlation matrix of Z, D, X, Y")
    return parser


def _config_defaults(parser: argparse.ArgumentParser) -> None:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read {CONFIG_ENV}={path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{CONFIG_ENV} must hold a JSON object")
    defaults = {k.replace("-", "_"): (",".join(map(str, v)) if isinstance(v, list) else v) for k, v in raw.items()}
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            sp.set_defaults(**defaults)


def _attach_negative_values(argv: Sequence[str]) -> list[str]:
    # "--delta -0.07,0.07" would otherwise be read as an unknown option
    out: list[str] = []
    it = iter(argv)
    for arg in it:
        if arg in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(arg)
            else:
                out.append(f"{arg}={nxt}")
            continue
        out.append(arg)
    return out


def run(argv: Sequence[str] | None = None) -> str:
    parser = build_parser()
    _config_defaults(parser)
    argv = sys.argv[1:] if argv is None else argv
    ns = parser.parse_args(_attach_negative_values(argv))
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    an = Analysis(AnalysisConfig.from_args(ns))
    cmd = ns.command
    if cmd == "summary":
        return cmd_summary(an)
    if cmd == "confint":
        return cmd_confint(an)
    if cmd == "power":
        return cmd_power(an, ns)
    if cmd == "samplesize":
        return cmd_samplesize(an, ns)
    if cmd == "sensitivity":
        return cmd_sensitivity(an)
    if cmd == "diagnose":
        return cmd_diagnose(an, ns)
    return cmd_cor(an)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        out = run(argv)
    except ConfigurationError as exc:
        print(f"ivkit: error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedError as exc:
        print(f"ivkit: unsupported: {exc}", file=sys.stderr)
        return 3
    except (IVError, OSError, ArithmeticError, ValueError) as exc:
        print(f"ivkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
