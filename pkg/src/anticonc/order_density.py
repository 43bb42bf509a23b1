"""Exact density of the k-th order statistic of a Gaussian field.

For a field with positive variances and pairwise correlations below one,

    f_k(z) = sum_i sum_{J subset [n]\\{i}, |J| = n-k}
             phi((z - mu_i)/sigma_i)/sigma_i
             * P{X_j > z for j in J, X_l <= z otherwise | X_i = z}.

The conditional factor is a rectangle probability under the Schur complement
of coordinate i, evaluated for all (J, z) pairs of one i in a single batch.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import comb

from .errors import (CombinatorialBudgetExceeded, DegenerateSpec, EmptyPositiveRegion,
                     KOutOfRange, PeakAtBoundary)
from .field_model import FieldSpec, augment_for_abs, reduce_degenerate
from .gaussian_num import (DEFAULT_BUDGET, DEFAULT_SEED, _interval, cdf,
                           condition_on_coordinate, pdf, rect_prob_batch, sf)

ENUM_GUARD = 100_000
TRUNCATE_BELOW = 1e-12
FACTOR_FLOOR = 1e-14
CORR_ONE_TOL = 1e-9


def enumeration_size(n: int, k: int) -> int:
    return n * math.comb(n - 1, n - k)


def _check(spec: FieldSpec, k: int) -> None:
    n = spec.n
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside 1..{n}")
    if np.any(spec.variances <= 0):
        raise DegenerateSpec("all coordinates need positive variance; run reduce_degenerate")
    corr = spec.correlation()
    off = corr[~np.eye(n, dtype=bool)]
    if off.size and np.max(off) >= 1.0 - CORR_ONE_TOL:
        raise DegenerateSpec("perfectly correlated coordinates; run reduce_degenerate")
    size = enumeration_size(n, k)
    if size > ENUM_GUARD:
        raise CombinatorialBudgetExceeded(f"n*C(n-1,n-k) = {size} > {ENUM_GUARD}")


def _marginal_cap(cov, lower, upper):
    """Per-box upper bound on a rectangle probability: min marginal mass."""
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = lower / sd
        b = upper / sd
    _, lo, hi = _interval(a, b)
    mass = hi - lo
    const = sd <= 1e-7 * max(float(sd.max()), 1e-300)
    if np.any(const):
        inside = (lower[:, const] <= 0.0) & (upper[:, const] >= 0.0)
        mass[:, const] = inside.astype(float)
    return mass.min(axis=1)


def order_density_values(spec: FieldSpec, k: int, z, budget: int = DEFAULT_BUDGET,
                         seed: int = DEFAULT_SEED):
    """Vectorized f_k(z) and a linear error bound, for an array of z."""
    _check(spec, k)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    n = spec.n
    sd = spec.sds
    f = np.zeros(z.shape)
    fe = np.zeros(z.shape)
    subsets = [np.isin(np.arange(n - 1), J) for J in combinations(range(n - 1), n - k)]
    masks = np.array(subsets, dtype=bool).reshape(len(subsets), n - 1)
    for i in range(n):
        w = pdf((z - spec.mu[i]) / sd[i]) / sd[i]
        act = np.flatnonzero(w > 0)
        if act.size == 0:
            continue
        if n == 1:
            f[act] += w[act]
            fe[act] += FACTOR_FLOOR * w[act]
            continue
        cond = condition_on_coordinate(spec, i)
        za = z[act]
        thr = za[:, None] - cond.mean_at(za)  # (Z, n-1), bound on X_{-i} - E[.|X_i=z]
        nJ, Z = masks.shape[0], za.size
        inJ = np.repeat(masks[:, None, :], Z, axis=1)
        thr_b = np.broadcast_to(thr[None], inJ.shape)
        lower = np.where(inJ, thr_b, -np.inf).reshape(nJ * Z, n - 1)
        upper = np.where(inJ, np.inf, thr_b).reshape(nJ * Z, n - 1)
        cap = _marginal_cap(cond.cond_cov, lower, upper)
        live = cap >= TRUNCATE_BELOW
        p = np.zeros(nJ * Z)
        se = np.zeros(nJ * Z)
        if np.any(live):
            p[live], se[live], _ = rect_prob_batch(cond.cond_cov, lower[live], upper[live],
                                                   budget=budget, seed=seed)
        err = np.where(live, se + FACTOR_FLOOR, cap)
        wa = w[act]
        f[act] += wa * p.reshape(nJ, Z).sum(axis=0)
        fe[act] += wa * err.reshape(nJ, Z).sum(axis=0)
    fe += 1e-15 * f
    return f, fe


def density_order_statistic(spec: FieldSpec, k: int, z: float, budget: int = DEFAULT_BUDGET,
                            seed: int = DEFAULT_SEED) -> tuple[float, float]:
    f, fe = order_density_values(spec, k, [z], budget, seed)
    return float(f[0]), float(fe[0])


def density_iid_closed_form(n: int, k: int, mu: float, sigma: float, z):
    """Order-statistic density of n iid N(mu, sigma^2) variables."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside 1..{n}")
    t = (np.asarray(z, dtype=np.float64) - mu) / sigma
    out = (n / sigma) * comb(n - 1, n - k, exact=True) * sf(t) ** (n - k) * cdf(t) ** (k - 1) * pdf(t)
    return float(out) if np.ndim(out) == 0 else out


# --- grids --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityGrid:
    z: np.ndarray
    f: np.ndarray
    fe: np.ndarray
    k: int | None = None
    n: int | None = None
    support_lo: float = -np.inf
    meta: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        return float(self.z[1] - self.z[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        d = np.diff(self.z)
        return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))

    def integral(self) -> float:
        return float(np.trapezoid(self.f, self.z))

    def integral_err(self) -> float:
        return float(np.trapezoid(self.fe, self.z))

    def moments(self) -> tuple[float, float]:
        """Mean and variance of the (renormalized) grid density."""
        mass = self.integral()
        mean = float(np.trapezoid(self.z * self.f, self.z)) / mass
        var = float(np.trapezoid((self.z - mean) ** 2 * self.f, self.z)) / mass
        return mean, var

    def cdf_at(self, x) -> np.ndarray:
        """Trapezoid CDF, linearly interpolated between grid nodes."""
        F = np.concatenate([[0.0], np.cumsum(0.5 * (self.f[1:] + self.f[:-1]) * np.diff(self.z))])
        return np.interp(x, self.z, F, left=0.0, right=F[-1])

    def to_csv(self, path=None, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "f", "err"])
        for a, b, c in zip(self.z, self.f, self.fe):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> DensityGrid:
        rows = []
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        for rec in csv.DictReader(lines):
            rows.append((float(rec["z"]), float(rec["f"]), float(rec.get("err") or 0.0)))
        a = np.array(rows)
        if a.shape[0] < 3 or np.any(np.diff(a[:, 0]) <= 0):
            raise ValueError("density CSV needs >= 3 rows with strictly increasing z")
        return cls(a[:, 0], a[:, 1], a[:, 2])


def default_grid(spec: FieldSpec, m: int = 401, width: float = 10.0,
                 abs_variant: bool = False) -> tuple[float, float, int]:
    s = float(spec.sds.max())
    if abs_variant:
        return 0.0, float(np.max(np.abs(spec.mu))) + width * s, m
    return float(spec.mu.min()) - width * s, float(spec.mu.max()) + width * s, m


def _abs_field(spec: FieldSpec, k: int):
    """Field and order index whose order statistic is the k-th smallest |X_i|."""
    n = spec.n
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside 1..{n}")
    if k == n:
        if np.any((spec.variances < 1e-12) & (np.abs(spec.mu) > 1e-9)):
            raise DegenerateSpec("constant coordinate with nonzero mean")
        base = reduce_degenerate(spec).reduced
        aug = reduce_degenerate(augment_for_abs(base))
        if aug.unresolved:
            raise DegenerateSpec("perfectly correlated coordinates of different scale")
        return aug.reduced, aug.reduced.n
    # order statistics of (X, -X): the k-th smallest |X_i| is X~_(n+k)
    return augment_for_abs(spec), n + k


def density_grid(spec: FieldSpec, k: int, grid_spec, budget: int = DEFAULT_BUDGET,
                 abs_variant: bool = False, seed: int = DEFAULT_SEED) -> DensityGrid:
    lo, hi, m = grid_spec
    m = int(m)
    if m < 16:
        raise ValueError("grid needs m >= 16 points")
    if not hi > lo:
        raise ValueError("grid needs hi > lo")
    z = np.linspace(lo, hi, m)
    f = np.zeros(m)
    fe = np.zeros(m)
    if abs_variant:
        field_, kk = _abs_field(spec, k)
        nonneg = z >= 0
        if np.any(nonneg):
            f[nonneg], fe[nonneg] = order_density_values(field_, kk, z[nonneg], budget, seed)
        return DensityGrid(z, f, fe, k, spec.n, 0.0, {"abs_variant": True})
    f, fe = order_density_values(spec, k, z, budget, seed)
    return DensityGrid(z, f, fe, k, spec.n, -np.inf, {"abs_variant": False})


def mode_of_grid(g: DensityGrid) -> tuple[float, float]:
    """Peak height and location, refined by a parabola through the top 3 nodes.

    The refinement is skipped next to a support edge, where the density jumps.
    """
    f, z = g.f, g.z
    i = int(np.argmax(f))
    at_edge = z[i] <= g.support_lo or (i > 0 and z[i - 1] < g.support_lo)
    if i == 0 or i == len(f) - 1:
        if at_edge:
            return float(f[i]), float(z[i])
        raise PeakAtBoundary(f"density peaks at grid end z={z[i]}")
    if at_edge:
        return float(f[i]), float(z[i])
    x0, x1, x2 = z[i - 1:i + 2]
    y0, y1, y2 = f[i - 1:i + 2]
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    a = (d12 - d01) / (x2 - x0)
    if not a < 0:
        return float(y1), float(x1)
    b = d01 - a * (x0 + x1)
    zv = -b / (2.0 * a)
    if not x0 <= zv <= x2:
        return float(y1), float(x1)
    mv = y1 + d01 * (zv - x1) + a * (zv - x1) * (zv - x0)
    return float(max(mv, y1)), float(zv)


def check_s_concavity(g: DensityGrid, s: float, sigmas: float = 4.0) -> tuple[bool, float]:
    """Discrete convexity of f**s (s < 0) on the region where f > 10 * err.

    Every node triple (c-d, c, c+d) inside the region must satisfy the chord
    inequality g(z_c) <= lam g(z_{c-d}) + (1-lam) g(z_{c+d}) up to a slack of
    ``sigmas`` times the first-order propagation |s| f^(s-1) err.
    """
    if not s < 0:
        raise ValueError("s must be negative")
    f = np.asarray(g.f, dtype=np.float64)
    fe = np.asarray(g.fe, dtype=np.float64)
    pos = (f > 10.0 * fe) & (f > 0)
    if not np.any(pos):
        raise EmptyPositiveRegion("no grid point with f > 10 * err")
    with np.errstate(divide="ignore", over="ignore"):
        fp = np.where(pos, f, 1.0)
        h = fp ** s
        # log form: f**(s-1) overflows for tiny f, and inf * 0 would be nan
        dh = abs(s) * np.exp((s - 1.0) * np.log(fp) + np.log(fe))
    z = g.z
    m = len(f)
    worst = -np.inf
    for d in range(1, (m - 1) // 2 + 1):
        c = np.arange(d, m - d)
        a, b = c - d, c + d
        ok = pos[a] & pos[c] & pos[b]
        if not np.any(ok):
            continue
        a, b, c = a[ok], b[ok], c[ok]
        lam = (z[b] - z[c]) / (z[b] - z[a])
        rhs = lam * h[a] + (1.0 - lam) * h[b]
        slack = sigmas * (dh[c] + lam * dh[a] + (1.0 - lam) * dh[b]) + 1e-12 * (h[c] + rhs)
        excess = h[c] - rhs - slack
        if np.isnan(excess).any():
            return False, float("nan")
        worst = max(worst, float(np.max(excess)))
    if worst == -np.inf:
        worst = 0.0
    return bool(worst <= 0.0), worst


def convolve_box(g: DensityGrid, eps: float) -> DensityGrid:
    """Density of Z + eps*U, U ~ Unif(0,1): (F(z) - F(z - eps)) / eps.

    The grid is extended to the right by eps so no mass is lost.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if not g.is_uniform():
        raise ValueError("box convolution needs a uniform grid")
    h = g.step
    extra = int(math.ceil(eps / h - 1e-9))
    z = np.concatenate([g.z, g.z[-1] + h * np.arange(1, extra + 1)])
    f = np.concatenate([g.f, np.zeros(extra)])
    fe = np.concatenate([g.fe, np.zeros(extra)])

    shift = eps / h
    r = int(round(shift))
    if abs(shift - r) < 1e-9:
        # trapezoid window sum as a direct convolution; no cancellation in the tails
        kernel = np.full(r + 1, h / eps)
        kernel[0] = kernel[-1] = 0.5 * h / eps

        def box_avg(v):
            return np.convolve(v, kernel)[:len(v)], 0.0
    else:
        def box_avg(v):
            F = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * h)])
            Fm = np.interp(z - eps, z, F, left=0.0)
            return (F - Fm) / eps, 4.0 * np.finfo(float).eps * F / eps

    fc, round_f = box_avg(f)
    fc = np.clip(fc, 0.0, None)
    fec = box_avg(fe)[0] + round_f + 1e-15 * fc
    return DensityGrid(z, fc, fec, g.k, g.n, g.support_lo, {**g.meta, "box_eps": eps})
