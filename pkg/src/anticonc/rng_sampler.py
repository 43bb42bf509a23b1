"""Reproducible Monte Carlo draws of Gaussian fields and their reduced statistics.

Draws are organized in fixed blocks of ``BLOCK`` indices. Block ``b`` reads
a Philox-4x64 stream keyed by the master seed with the block index in the
high counter word, and draw ``j`` of the block consumes words
``[j*(n+1), (j+1)*(n+1))``: ``n`` normals (inverse CDF of 64-bit uniforms)
followed by one uniform. Every draw is therefore a fixed function of
``(seed, global index)`` and the output does not depend on how blocks are
scheduled across workers, nor on ``N`` beyond truncation.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import KOutOfRange
from .field_model import FieldSpec
from .gaussian_num import uniform_from_bits

BLOCK = 4096
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class StatisticKind:
    """Per-draw reduction: ``order`` (needs k), ``max``, ``max_abs``,
    or ``sup_plus_uniform`` (base statistic plus eps * U)."""

    name: str
    k: int | None = None
    eps: float | None = None
    base: StatisticKind | None = None

    @classmethod
    def order(cls, k: int) -> StatisticKind:
        return cls("order", k=int(k))

    @classmethod
    def max(cls) -> StatisticKind:
        return cls("max")

    @classmethod
    def max_abs(cls) -> StatisticKind:
        return cls("max_abs")

    @classmethod
    def sup_plus_uniform(cls, eps: float, base: StatisticKind | None = None) -> StatisticKind:
        return cls("sup_plus_uniform", eps=float(eps), base=base or cls.max())

    @classmethod
    def parse(cls, text: str) -> StatisticKind:
        """``max``, ``max_abs``, ``order:K``, ``sup_plus_uniform:EPS[:BASE]``."""
        parts = text.strip().split(":")
        head = parts[0]
        if head in ("max", "max_abs") and len(parts) == 1:
            return cls(head)
        if head == "order" and len(parts) == 2:
            return cls.order(int(parts[1]))
        if head == "sup_plus_uniform" and len(parts) >= 2:
            base = cls.parse(":".join(parts[2:])) if len(parts) > 2 else None
            return cls.sup_plus_uniform(float(parts[1]), base)
        raise ValueError(f"cannot parse statistic {text!r}")

    def label(self) -> str:
        if self.name == "order":
            return f"order:{self.k}"
        if self.name == "sup_plus_uniform":
            return f"sup_plus_uniform:{self.eps!r}:{self.base.label()}"
        return self.name

    def check(self, n: int) -> None:
        if self.name == "order" and not (1 <= (self.k or 0) <= n):
            raise KOutOfRange(f"k={self.k} outside 1..{n}")
        if self.name == "sup_plus_uniform":
            if not self.eps > 0:
                raise ValueError("eps must be positive")
            self.base.check(n)
        if self.name not in ("order", "max", "max_abs", "sup_plus_uniform"):
            raise ValueError(f"unknown statistic {self.name!r}")


@dataclass(frozen=True, eq=False)
class SampleBatch:
    spec_id: str
    N: int
    reduced: np.ndarray
    statistic_kind: StatisticKind
    seed: int
    draws: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value"])
        for v in self.reduced:
            w.writerow([repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _reduce(x: np.ndarray, u: np.ndarray, kind: StatisticKind) -> np.ndarray:
    if kind.name == "max":
        return x.max(axis=1)
    if kind.name == "max_abs":
        return np.abs(x).max(axis=1)
    if kind.name == "order":
        return np.partition(x, kind.k - 1, axis=1)[:, kind.k - 1]
    return _reduce(x, u, kind.base) + kind.eps * u


def _block(spec: FieldSpec, seed: int, b: int, count: int):
    n = spec.n
    bitgen = np.random.Philox(key=seed & _MASK64, counter=[0, 0, b, 0])
    raw = bitgen.random_raw(count * (n + 1)).reshape(count, n + 1)
    g = special.ndtri(uniform_from_bits(raw[:, :n]))
    u = uniform_from_bits(raw[:, n])
    x = spec.mu + g @ spec.chol.T
    return x, u


def sample_many(spec: FieldSpec, kinds: Sequence[StatisticKind], N: int, seed: int,
                workers: int = 1, keep_draws: bool = False) -> list[SampleBatch]:
    """Reduce one set of field draws to several statistics (common random numbers)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    for kind in kinds:
        kind.check(spec.n)
    nblocks = -(-N // BLOCK)

    def work(b):
        count = min(BLOCK, N - b * BLOCK)
        x, u = _block(spec, seed, b, count)
        return [_reduce(x, u, k) for k in kinds], (x if keep_draws else None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, range(nblocks)))
    else:
        parts = [work(b) for b in range(nblocks)]
    sid = spec.spec_id()
    draws = np.concatenate([p[1] for p in parts]) if keep_draws else None
    out = []
    for i, kind in enumerate(kinds):
        red = np.concatenate([p[0][i] for p in parts])
        red.setflags(write=False)
        out.append(SampleBatch(sid, N, red, kind, seed, draws))
    return out


def sample_reduced(spec: FieldSpec, kind: StatisticKind, N: int, seed: int,
                   workers: int = 1, keep_draws: bool = False) -> SampleBatch:
    return sample_many(spec, [kind], N, seed, workers, keep_draws)[0]


@dataclass(frozen=True)
class Moments:
    mean: float
    var: float
    se_mean: float
    se_var: float


def empirical_moments(batch) -> Moments:
    """Mean, unbiased variance and their asymptotic standard errors.

    ``se_var`` uses the fourth central moment:
    Var(s^2) ~ (m4 - s^4 (N-3)/(N-1)) / N.
    """
    x = np.asarray(getattr(batch, "reduced", batch), dtype=np.float64)
    N = x.shape[0]
    if N < 2:
        raise ValueError("need at least two samples")
    mean = float(x.mean())
    d = x - mean
    d2 = d * d
    var = float(d2.sum() / (N - 1))
    m4 = float((d2 * d2).mean())
    se_mean = float(np.sqrt(var / N))
    v4 = m4 - var * var * (N - 3) / (N - 1)
    se_var = float(np.sqrt(max(v4, 0.0) / N))
    return Moments(mean, var, se_mean, se_var)


def derive_seed(master: int, *path: int) -> int:
    """Child seed for a sub-experiment, stable under reordering of siblings."""
    ss = np.random.SeedSequence(master & _MASK64, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
