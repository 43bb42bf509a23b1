"""Verification runs, (n, rho) sweeps and CSV reporting behind the CLI."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import (BoundReport, deng_refined_upper, max_abs_q_bounds, mode_q_bounds,
                     nazarov_box_upper, order_stat_q_bounds, reports_to_csv, var_lower_bound,
                     var_upper_bound, equicorrelated_var_sandwich, _fmt)
from .concentration import concentration_curve, exact_gaussian_abs_concentration
from .config import ExperimentConfig
from .errors import AllDegenerate, ConfigError
from .field_model import FieldSpec, equicorrelated_spec, reduce_degenerate
from .order_density import default_grid, density_grid, mode_of_grid
from .rng_sampler import StatisticKind, derive_seed, empirical_moments, sample_many

SCHEMA = 1
MC_SIGMAS = 3.0
EXACT_SIGMAS = 4.0


def report_header(command: str, cfg: ExperimentConfig, **extra) -> list[str]:
    lines = [f"schema={SCHEMA}", f"command={command}", f"seed={cfg.seed}",
             f"config_sha256={cfg.sha256()}"]
    lines += [f"{k}={_fmt(v)}" for k, v in extra.items()]
    return lines


def write_text(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# --- slack arithmetic -----------------------------------------------------------

def sandwich_with_slack(bound_fn, q: float, se_q: float, var: float, se_var: float):
    """Bounds at the point estimate of Var plus a symmetric slack.

    The slack is ``MC_SIGMAS`` standard errors of Q-hat plus the largest move
    of either bound when Var shifts by ``MC_SIGMAS`` of its own standard errors.
    """
    eps_bounds = bound_fn(var)
    wide_lo = bound_fn(var + MC_SIGMAS * se_var).lower
    wide_hi = bound_fn(max(var - MC_SIGMAS * se_var, 0.0)).upper
    dvar = max(eps_bounds.lower - wide_lo, wide_hi - eps_bounds.upper, 0.0)
    return eps_bounds, MC_SIGMAS * se_q + dvar


def max_offdiag_abs_corr(spec: FieldSpec) -> float:
    if spec.n < 2:
        return 0.0
    c = np.abs(spec.correlation())
    return float(np.max(c[~np.eye(spec.n, dtype=bool)]))


# --- verify -------------------------------------------------------------------

@dataclass(frozen=True)
class VerifyRow:
    check: str
    inputs: dict
    lower: float
    upper: float
    estimate: float
    se: float
    slack: float
    note: str = ""

    @property
    def margin(self) -> float:
        """Distance to the nearest violated edge; negative means failure."""
        return min(self.estimate - (self.lower - self.slack), (self.upper + self.slack) - self.estimate)

    @property
    def passed(self) -> bool:
        return self.lower - self.slack <= self.estimate <= self.upper + self.slack


@dataclass
class VerifyReport:
    seed: int
    rows: list[VerifyRow] = field(default_factory=list)

    @property
    def n_pass(self) -> int:
        return sum(r.passed for r in self.rows)

    @property
    def n_fail(self) -> int:
        return len(self.rows) - self.n_pass

    @property
    def all_pass(self) -> bool:
        return self.n_fail == 0

    def to_csv(self, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "inputs", "lower", "upper", "estimate", "se", "slack", "margin",
                    "pass", "note"])
        for r in self.rows:
            w.writerow([r.check, ";".join(f"{k}={_fmt(v)}" for k, v in r.inputs.items()),
                        _fmt(r.lower), _fmt(r.upper), _fmt(r.estimate), _fmt(r.se), _fmt(r.slack),
                        _fmt(r.margin), "pass" if r.passed else "FAIL", r.note])
        buf.write(f"# summary pass={self.n_pass} fail={self.n_fail} seed={self.seed}\n")
        return buf.getvalue()


def _degenerate_rows(cfg: ExperimentConfig) -> list[VerifyRow]:
    # every coordinate is constant, so the statistic is constant and Q == 1
    rows = []
    for eps in cfg.eps:
        b = order_stat_q_bounds(0.0, eps)
        # at Var = 0 the lower bound is exactly (eps/sqrt12)/(eps/sqrt12) = 1
        rows.append(VerifyRow("sandwich", {"eps": eps, "var": 0.0}, 1.0, b.upper, 1.0, 0.0,
                              0.0, "degenerate: Q == 1, lower bound sharp"))
    return rows


def _sandwich_rows(kind, batch, eps_list, mom) -> list[VerifyRow]:
    if kind.name == "max_abs":
        fn, name = max_abs_q_bounds, "max_abs"
    elif kind.name in ("order", "max"):
        fn, name = order_stat_q_bounds, "order_stat"
    else:
        raise ConfigError("sandwich check needs statistic order:K, max or max_abs")
    rows = []
    for est in concentration_curve(batch, eps_list):
        b, slack = sandwich_with_slack(lambda v, e=est.eps: fn(v, e), est.q, est.se, mom.var, mom.se_var)
        rows.append(VerifyRow("sandwich", {"bound": name, "eps": est.eps, "var": mom.var,
                                           "se_var": mom.se_var},
                              b.lower, b.upper, est.q, est.se, slack))
    return rows


def run_verify(cfg: ExperimentConfig, spec: FieldSpec | None = None) -> VerifyReport:
    spec = spec if spec is not None else cfg.field()
    kind = cfg.kind
    report = VerifyReport(cfg.seed)
    try:
        reduce_degenerate(spec)
    except AllDegenerate:
        if "sandwich" in cfg.checks:
            report.rows.extend(_degenerate_rows(cfg))
        return report
    batch = sample_many(spec, [kind], cfg.n_samples, cfg.seed, workers=cfg.workers)[0]
    mom = empirical_moments(batch)
    centered = bool(np.all(spec.mu == 0.0))
    for check in cfg.checks:
        if check == "sandwich":
            report.rows.extend(_sandwich_rows(kind, batch, cfg.eps, mom))
        elif check == "exact":
            red = reduce_degenerate(spec).reduced
            if not (red.n == 1 and red.mu[0] == 0.0 and kind.name == "max_abs"):
                raise ConfigError("exact check needs a centered one-coordinate field and max_abs")
            sd = float(red.sds[0])
            for est in concentration_curve(batch, cfg.eps):
                q = exact_gaussian_abs_concentration(sd, est.eps)
                report.rows.append(VerifyRow("exact", {"eps": est.eps, "sigma": sd}, q, q, est.q,
                                             est.se, EXACT_SIGMAS * est.se))
        elif check in ("var_lower", "var_upper"):
            if not centered or kind.name not in ("max", "max_abs"):
                raise ConfigError(f"{check} needs a centered field and statistic max or max_abs")
            sds = spec.sds[spec.sds > 0]
            if check == "var_lower":
                if np.any(spec.sds == 0):
                    raise ConfigError("var_lower needs every coordinate to have positive variance")
                s_lo = float(sds.min())
                ratio = max(mom.mean / s_lo, 0.0)
                lb = var_lower_bound(s_lo, ratio)
                report.rows.append(VerifyRow("var_lower", {"sigma_underbar": s_lo, "mean_ratio": ratio},
                                             lb, math.inf, mom.var, mom.se_var, MC_SIGMAS * mom.se_var))
            else:
                s_hi = float(sds.max())
                rho = max_offdiag_abs_corr(spec)
                ratio = mom.mean / s_hi
                ub = var_upper_bound(s_hi, rho, ratio)
                report.rows.append(VerifyRow("var_upper", {"sigma_bar": s_hi, "rho": rho,
                                                           "mean_ratio": ratio},
                                             0.0, ub, mom.var, mom.se_var, MC_SIGMAS * mom.se_var))
        elif check == "mode":
            if kind.name not in ("order", "max", "max_abs"):
                raise ConfigError("mode check needs statistic order:K, max or max_abs")
            red = reduce_degenerate(spec).reduced
            k = red.n if kind.name != "order" else kind.k
            absv = kind.name == "max_abs"
            grid = tuple(cfg.grid) if cfg.grid else default_grid(red, 401, abs_variant=absv)
            g = density_grid(red, k, (grid[0], grid[1], int(grid[2])), cfg.budget, absv)
            M, _ = mode_of_grid(g)
            for est in concentration_curve(batch, cfg.eps):
                b = mode_q_bounds(M, est.eps)
                report.rows.append(VerifyRow("mode", {"eps": est.eps, "M": M}, b.lower, b.upper,
                                             est.q, est.se, MC_SIGMAS * est.se))
        elif check == "deng":
            if kind.name != "max":
                raise ConfigError("deng check needs statistic max")
            sds = np.sort(spec.sds[spec.sds > 0])
            for est in concentration_curve(batch, cfg.eps):
                b = deng_refined_upper(sds, est.eps)
                report.rows.append(VerifyRow("deng", {"eps": est.eps, "n": len(sds),
                                                      "sigma_bar_n": b.derived["sigma_bar_n"]},
                                             0.0, b.upper, est.q, est.se, MC_SIGMAS * est.se))
        else:
            raise ConfigError(f"unknown check {check!r}")
    return report


# --- bounds table ---------------------------------------------------------------

def run_bounds(cfg: ExperimentConfig, spec: FieldSpec | None = None) -> list[BoundReport]:
    """Every closed form that applies to the configured field, one row per eps."""
    spec = spec if spec is not None else cfg.field()
    var = cfg.var
    if var is None:
        batch = sample_many(spec, [cfg.kind], cfg.n_samples, cfg.seed, workers=cfg.workers)[0]
        var = empirical_moments(batch).var
    sds = np.sort(spec.sds[spec.sds > 0])
    out = []
    for eps in cfg.eps:
        out.append(order_stat_q_bounds(var, eps))
        out.append(max_abs_q_bounds(var, eps))
        if sds.size:
            out.append(deng_refined_upper(sds, eps))
            out.append(BoundReport("nazarov", {"n": int(sds.size), "eps": eps}, 0.0,
                                   nazarov_box_upper(sds, eps)))
    if cfg.c0 is not None and cfg.spec.family == "equicorrelated" and spec.n >= 2:
        out.append(equicorrelated_var_sandwich(spec.n, cfg.spec.rho, cfg.c0))
    return out


def bounds_csv(cfg: ExperimentConfig, reports) -> str:
    return reports_to_csv(reports, header_lines=report_header("bounds", cfg))


# --- sweep ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    n: int
    rho: float
    mean: float
    var: float
    se_var: float
    ratios: tuple[tuple[float, float, float], ...]  # (eps, ratio, slack)

    @property
    def lower_ok(self) -> bool:
        return self.var >= self.rho - MC_SIGMAS * self.se_var

    @property
    def c0_cell(self) -> float:
        return (self.var - self.rho) * math.log(self.n)

    @property
    def ratios_ok(self) -> bool:
        lo, hi = 1.0 / math.sqrt(12.0), math.sqrt(12.0)
        return all(lo - s <= r <= hi + s for _, r, s in self.ratios)


def ratio_with_slack(q, se_q, var, se_var, eps):
    """Q * sqrt(Var + eps^2/12) / eps and its propagated MC slack."""
    root = math.sqrt(var + eps * eps / 12.0)
    r = q * root / eps
    d_var = q / (2.0 * root * eps) * se_var
    return r, MC_SIGMAS * (se_q * root / eps + d_var)


def _sweep_cell(n, rho, eps_list, N, seed) -> SweepCell:
    spec = equicorrelated_spec(n, rho)
    zmax, zabs = sample_many(spec, [StatisticKind.max(), StatisticKind.max_abs()], N, seed)
    m = empirical_moments(zmax)
    ma = empirical_moments(zabs)
    ratios = []
    for est in concentration_curve(zabs, eps_list):
        r, s = ratio_with_slack(est.q, est.se, ma.var, ma.se_var, est.eps)
        ratios.append((est.eps, r, s))
    return SweepCell(n, rho, m.mean, m.var, m.se_var, tuple(ratios))


def run_sweep(cfg: ExperimentConfig) -> list[SweepCell]:
    cells = [(n, rho) for n in cfg.n_list for rho in cfg.rho_list]
    for n, rho in cells:
        if n < 2 or not 0.0 <= rho < 1.0:
            raise ConfigError(f"sweep cell n={n}, rho={rho} needs n >= 2 and 0 <= rho < 1")

    def work(item):
        idx, (n, rho) = item
        return _sweep_cell(n, rho, cfg.eps, cfg.n_samples, derive_seed(cfg.seed, idx))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(work, enumerate(cells)))
    return [work(item) for item in enumerate(cells)]


def fitted_c0(cells) -> float:
    return max(c.c0_cell for c in cells)


def sweep_csv(cfg: ExperimentConfig, cells) -> str:
    buf = io.StringIO()
    for line in report_header("sweep", cfg):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    eps_cols = [f"ratio_eps={_fmt(e)}" for e in cfg.eps]
    w.writerow(["n", "rho", "mean", "var", "se_var", "lower_ok", "c0_cell", *eps_cols, "ratios_ok"])
    for c in cells:
        w.writerow([c.n, _fmt(c.rho), _fmt(c.mean), _fmt(c.var), _fmt(c.se_var), c.lower_ok,
                    _fmt(c.c0_cell), *[_fmt(r) for _, r, _ in c.ratios], c.ratios_ok])
    buf.write(f"# fitted_C0={_fmt(fitted_c0(cells))}\n")
    return buf.getvalue()
