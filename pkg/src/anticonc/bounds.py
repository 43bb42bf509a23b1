"""Closed-form bounds on concentration functions and on the variance of maxima.

Every function is pure; variances, means and modes are supplied by the
caller (usually from Monte Carlo), never sampled here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import BadRho, NonpositiveSd, RhoCoverAtOne, SOutOfRange, UnsortedInput
from .gaussian_num import erf

SQRT12 = math.sqrt(12.0)
MEAN_RATIO_KNEE = 3.0 * math.sqrt(math.log(2.0))


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    lower: float
    upper: float
    derived: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.lower
        yield self.upper

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack


def _check_var_eps(var, eps):
    if not var >= 0:
        raise ValueError("var must be >= 0")
    if not eps > 0:
        raise ValueError("eps must be > 0")


def order_stat_q_bounds(var: float, eps: float) -> BoundReport:
    _check_var_eps(var, eps)
    root = math.sqrt(var + eps * eps / 12.0)
    return BoundReport("order_stat", {"var": var, "eps": eps},
                       (eps / SQRT12) / root, eps * SQRT12 / root)


def max_abs_q_bounds(var: float, eps: float) -> BoundReport:
    _check_var_eps(var, eps)
    root = math.sqrt(var + eps * eps / 12.0)
    return BoundReport("max_abs", {"var": var, "eps": eps}, (eps / SQRT12) / root, eps / root)


def mode_q_bounds(M: float, eps: float) -> BoundReport:
    if not (M > 0 and eps > 0):
        raise ValueError("M and eps must be > 0")
    x = eps * M
    return BoundReport("mode", {"M": M, "eps": eps},
                       x / math.sqrt(144.0 + x * x), 12.0 * x / math.sqrt(1.0 + x * x))


def _check_sds(sorted_sds) -> np.ndarray:
    s = np.asarray(sorted_sds, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("need a non-empty vector of standard deviations")
    if np.any(s <= 0):
        raise NonpositiveSd("standard deviations must be positive")
    if np.any(np.diff(s) < 0):
        raise UnsortedInput("standard deviations must be non-decreasing")
    return s


def deng_sigma_bar(sorted_sds) -> float:
    s = _check_sds(sorted_sds)
    n = s.size
    k = np.arange(1, n + 1)
    c_n = 2.0 + math.sqrt(2.0 * math.log(n))
    denom = 1.0 / s[0] + float(np.max((1.0 + np.sqrt(2.0 * np.log(k))) / s))
    return c_n / denom


def deng_refined_upper(sorted_sds, eps: float) -> BoundReport:
    """Dimension-dependent upper bound for the maximum, plus the variance-free
    lower companion that uses Var(max) <= largest variance."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    s = _check_sds(sorted_sds)
    n = s.size
    c_n = 2.0 + math.sqrt(2.0 * math.log(n))
    sbar = deng_sigma_bar(s)
    upper = 12.0 * c_n * eps / math.sqrt(sbar ** 2 + (c_n * eps) ** 2)
    smax = float(s[-1])
    lower = (eps / SQRT12) / math.sqrt(smax ** 2 + eps * eps / 12.0)
    return BoundReport("deng", {"n": n, "eps": eps, "sigma_underbar": float(s[0]),
                                "sigma_bar": smax},
                       lower, upper, {"sigma_bar_n": sbar})


def nazarov_box_upper(sorted_sds, eps: float) -> float:
    """Bound on sup_x P{x <= X <= x + eps*1} (same right-hand side as the maximum)."""
    return deng_refined_upper(sorted_sds, eps).upper


def equicorrelated_var_sandwich(n: int, rho: float, C0: float) -> BoundReport:
    if not n >= 2:
        raise ValueError("n must be >= 2")
    if not 0.0 <= rho < 1.0:
        raise BadRho(f"rho={rho} outside [0, 1)")
    if not C0 > 0:
        raise ValueError("C0 must be > 0")
    return BoundReport("equicorrelated_var", {"n": n, "rho": rho, "C0": C0},
                       rho, C0 / math.log(n) + rho)


def var_lower_bound(sigma_underbar: float, mean_ratio: float) -> float:
    """(1/15^2) (sigma_underbar / (1 + E[Z/sigma_underbar]))^2."""
    if not sigma_underbar > 0:
        raise ValueError("sigma_underbar must be > 0")
    if not mean_ratio >= 0:
        raise ValueError("mean_ratio must be >= 0 for a centered field")
    return (sigma_underbar / (1.0 + mean_ratio)) ** 2 / 225.0


def var_upper_bound(sigma_bar: float, rho: float, mean_ratio: float) -> float:
    """min(4 sbar^2, 121 sbar^2 rho + 3600 (sbar / (E[Z/sbar] - 3 sqrt(log 2))_+)^2)."""
    if not sigma_bar > 0:
        raise ValueError("sigma_bar must be > 0")
    if not 0.0 <= rho <= 1.0:
        raise BadRho(f"rho={rho} outside [0, 1]")
    first = 4.0 * sigma_bar ** 2
    gap = mean_ratio - MEAN_RATIO_KNEE
    if not gap > 0:
        return first
    second = 121.0 * sigma_bar ** 2 * rho + 3600.0 * (sigma_bar / gap) ** 2
    return min(first, second)


def covering_tail_bound(r0: float, nu: float, rho_cover: float, sigma_bar: float,
                        t: float) -> tuple[float, float]:
    """Return ``(K, tail)`` with P{|Z - EZ| >= t} <= tail = min(1, 6 exp(-t / sqrt K))."""
    if not 0.0 < rho_cover < 1.0:
        raise RhoCoverAtOne(f"rho_cover={rho_cover} must lie in (0, 1)")
    if not (r0 >= 0 and nu > 0 and sigma_bar > 0 and t >= 0):
        raise ValueError("need r0 >= 0, nu > 0, sigma_bar > 0, t >= 0")
    K = 9.0 * (r0 + 2.0 * sigma_bar ** 2 * nu / math.log(1.0 / rho_cover))
    return K, min(1.0, 6.0 * math.exp(-t / math.sqrt(K)))


def s_concave_var_mode_window(s: float) -> BoundReport:
    """Range of Var(Z) M(Z)^2 over s-concave laws, -1/3 < s <= 0."""
    if not -1.0 / 3.0 < s <= 0.0:
        raise SOutOfRange(f"s={s} outside (-1/3, 0]")
    upper = 4.0 * (1.0 + s) ** 3 / ((1.0 + 3.0 * s) * (1.0 + 2.0 * s) ** 2)
    return BoundReport("var_mode_window", {"s": s}, 1.0 / 12.0, upper)


def erf_sandwich_check(a, slack: float = 1e-12):
    """a <= erf(a) sqrt(1 + a^2) <= sqrt(2) a, elementwise for arrays."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("a must be >= 0")
    mid = erf(a) * np.sqrt(1.0 + a * a)
    ok = (a <= mid + slack) & (mid <= math.sqrt(2.0) * a + slack)
    return bool(ok) if ok.ndim == 0 else ok


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def reports_to_csv(reports: Iterable[BoundReport], path=None, header_lines=(),
                   extra_cols: Iterable[str] = ()) -> str:
    extra_cols = list(extra_cols)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "inputs", "lower", "upper", *extra_cols])
    for r in reports:
        flat = ";".join(f"{k}={_fmt(v)}" for k, v in {**r.inputs, **r.derived}.items())
        w.writerow([r.name, flat, repr(float(r.lower)), repr(float(r.upper)),
                    *[_fmt(r.derived.get(c, "")) for c in extra_cols]])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
