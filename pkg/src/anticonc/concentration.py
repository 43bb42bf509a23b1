"""Empirical Levy concentration function and its exact Gaussian special case."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import TooFewSamples
from .gaussian_num import erf

MIN_SAMPLES = 100


@dataclass(frozen=True)
class ConcentrationEstimate:
    eps: float
    q: float
    t_star: float
    N: int
    se: float


def _values(batch) -> np.ndarray:
    return np.asarray(getattr(batch, "reduced", batch), dtype=np.float64)


def empirical_concentration(batch, eps: float, *, min_samples: int = MIN_SAMPLES,
                            sorted_values: np.ndarray | None = None) -> ConcentrationEstimate:
    """Largest fraction of samples in a closed window [t, t + eps].

    The supremum over t of the empirical measure is attained with the left
    edge on a sample, so a two-pointer sweep over the sorted sample is exact.
    Pass ``sorted_values`` to reuse one sort across many ``eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.sort(_values(batch)) if sorted_values is None else sorted_values
    N = x.shape[0]
    if N < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {N}")
    right = np.searchsorted(x, x + eps, side="right")
    counts = right - np.arange(N)
    i = int(np.argmax(counts))
    q = counts[i] / N
    return ConcentrationEstimate(float(eps), float(q), float(x[i]), N,
                                 float(np.sqrt(q * (1.0 - q) / N)))


def concentration_curve(batch, eps_list: Iterable[float], **kw) -> list[ConcentrationEstimate]:
    xs = np.sort(_values(batch))
    return [empirical_concentration(None, e, sorted_values=xs, **kw) for e in eps_list]


def exact_gaussian_abs_concentration(sigma: float, eps: float) -> float:
    """Q(|Z|, eps) for Z ~ N(0, sigma^2); the window [0, eps] is optimal."""
    if not (sigma > 0 and eps > 0):
        raise ValueError("sigma and eps must be positive")
    return float(erf(eps / (sigma * np.sqrt(2.0))))


def convolved_mode(batch, eps: float, **kw) -> float:
    """Estimate of the mode of Z + eps*U as Q(Z, eps) / eps."""
    return empirical_concentration(batch, eps, **kw).q / eps


def estimates_to_csv(rows: Iterable[ConcentrationEstimate], path=None, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "q", "se", "t_star"])
    for r in rows:
        w.writerow([repr(r.eps), repr(r.q), repr(r.se), repr(r.t_star)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
