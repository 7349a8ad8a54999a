"""Seeded sampling and the elementary estimators shared by every experiment.

All randomness flows through :class:`Seed`, which keys a counter-based
Philox generator by ``(value, stream_id)``.  Sub-experiments derive their own
streams with :meth:`Seed.substream`, so results never depend on the order in
which experiments are executed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

_U64 = (1 << 64) - 1

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Seed:
    """Key of one reproducible random stream."""

    value: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("value", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _U64:
                raise ValueError(f"Seed.{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.value, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, label) -> "Seed":
        """Derive an independent stream for a named sub-experiment.

        The derivation hashes ``(stream_id, label)`` so it is stable across
        processes and Python versions.
        """
        digest = hashlib.blake2b(
            f"{self.stream_id}/{label}".encode(), digest_size=8
        ).digest()
        return Seed(self.value, int.from_bytes(digest, "little"))

    def to_dict(self) -> dict:
        return {"value": int(self.value), "stream_id": int(self.stream_id)}


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    if isinstance(seed, (int, np.integer)):
        return Seed(int(seed))
    if isinstance(seed, (tuple, list)) and len(seed) == 2:
        return Seed(int(seed[0]), int(seed[1]))
    raise TypeError(f"cannot interpret {seed!r} as a Seed")


@dataclass(frozen=True, eq=False)
class OutcomeSeries:
    """Ordered trial outcomes coded -1, +1, or 0 for "no detection".

    ``timestamps`` (nanoseconds) are optional; when given they have the same
    length as ``outcomes`` and never decrease.
    """

    outcomes: np.ndarray
    timestamps: np.ndarray | None = None
    setting_label: str = ""

    def __post_init__(self):
        out = np.asarray(self.outcomes)
        if out.ndim != 1:
            raise ValueError("outcomes must be one-dimensional")
        if out.size and not np.isin(out, (-1, 0, 1)).all():
            raise ValueError("outcomes must be in {-1, 0, +1}")
        out = out.astype(np.int8)
        out.flags.writeable = False
        object.__setattr__(self, "outcomes", out)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps)
            if ts.shape != out.shape:
                raise ValueError("timestamps and outcomes differ in length")
            if ts.size and (ts.min() < 0 or not np.issubdtype(ts.dtype, np.integer)):
                raise ValueError("timestamps must be non-negative integers")
            ts = ts.astype(np.int64)
            if np.any(np.diff(ts) < 0):
                raise ValueError("timestamps must be non-decreasing")
            ts.flags.writeable = False
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return self.outcomes.size

    def __eq__(self, other):
        if not isinstance(other, OutcomeSeries):
            return NotImplemented
        same_ts = (self.timestamps is None and other.timestamps is None) or (
            self.timestamps is not None
            and other.timestamps is not None
            and np.array_equal(self.timestamps, other.timestamps)
        )
        return (
            self.setting_label == other.setting_label
            and np.array_equal(self.outcomes, other.outcomes)
            and same_ts
        )

    @property
    def has_timestamps(self) -> bool:
        return self.timestamps is not None


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    n_pairs: int
    std_error: float

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"correlation {self.value} outside [-1, 1]")
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")

    def to_dict(self) -> dict:
        return {"value": self.value, "n_pairs": self.n_pairs, "std_error": self.std_error}


@dataclass(frozen=True)
class CountTable:
    """Counts N(+,+), N(+,-), N(-,+), N(-,-) plus pairs with a 0 outcome."""

    n_pp: int = 0
    n_pm: int = 0
    n_mp: int = 0
    n_mm: int = 0
    n_zero: int = 0

    def __post_init__(self):
        if min(self.n_pp, self.n_pm, self.n_mp, self.n_mm, self.n_zero) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm + self.n_zero

    @classmethod
    def from_pairs(cls, a: ArrayLike, b: ArrayLike) -> "CountTable":
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            raise ValueError("paired arrays differ in length")
        zero = (a == 0) | (b == 0)
        return cls(
            n_pp=int(np.count_nonzero((a == 1) & (b == 1))),
            n_pm=int(np.count_nonzero((a == 1) & (b == -1))),
            n_mp=int(np.count_nonzero((a == -1) & (b == 1))),
            n_mm=int(np.count_nonzero((a == -1) & (b == -1))),
            n_zero=int(np.count_nonzero(zero)),
        )

    def to_dict(self) -> dict:
        return {
            "n_pp": self.n_pp,
            "n_pm": self.n_pm,
            "n_mp": self.n_mp,
            "n_mm": self.n_mm,
            "n_zero": self.n_zero,
        }


def _values(x) -> np.ndarray:
    if isinstance(x, OutcomeSeries):
        return x.outcomes
    return np.asarray(x)


def correlation_product(xs, ys) -> CorrelationEstimate:
    """Mean of elementwise products of two paired +-1 samples."""
    x = _values(xs)
    y = _values(ys)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ValueError("empty input")
    if np.any(x == 0) or np.any(y == 0):
        raise ValueError("0 outcomes present; use correlation_from_counts for detection data")
    prod = x.astype(np.int64) * y.astype(np.int64)
    n = prod.size
    total = int(prod.sum())
    value = total / n
    return CorrelationEstimate(value, n, _product_stderr(n, n, total))


def _product_stderr(n: int, n_nonzero: int, total: int) -> float:
    """Standard error of a mean of products in {-1, 0, +1}.

    Uses the sample (n - 1) variance, from the sufficient statistics: the
    sum of squares equals the number of non-zero products.
    """
    if n <= 1:
        return 0.0
    var = (n_nonzero - total * total / n) / (n - 1)
    return math.sqrt(max(var, 0.0) / n)


def correlation_from_counts(t: CountTable, count_zero: bool = False) -> CorrelationEstimate:
    """(N(+,+) + N(-,-) - N(+,-) - N(-,+)) / n.

    By default ``n`` counts only fully detected pairs.  With ``count_zero``
    the pairs with a 0 outcome are kept in the denominator as zero products
    (emitted-pair normalization).
    """
    n_nonzero = t.n_pp + t.n_pm + t.n_mp + t.n_mm
    n = n_nonzero + (t.n_zero if count_zero else 0)
    if n == 0:
        raise ValueError("count table has no usable pairs")
    total = t.n_pp + t.n_mm - t.n_pm - t.n_mp
    return CorrelationEstimate(total / n, n, _product_stderr(n, n_nonzero, total))


def running_frequency(stream, symbol: int) -> np.ndarray:
    """Relative frequency of ``symbol`` among the first k outcomes, for every k."""
    x = _values(stream)
    if x.size == 0:
        raise ValueError("empty stream")
    hits = np.cumsum(x == symbol)
    return hits / np.arange(1, x.size + 1)


def covariance(xs: ArrayLike, ys: ArrayLike) -> float:
    """Empirical E(XY) - E(X)E(Y), dividing by n."""
    x = np.asarray(_values(xs), dtype=float)
    y = np.asarray(_values(ys), dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("covariance needs at least two observations")
    return float(np.mean(x * y) - np.mean(x) * np.mean(y))


def bernoulli_series(p: float, n: int, seed, label: str = "") -> OutcomeSeries:
    """n independent outcomes, +1 with probability p and -1 otherwise."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = as_seed(seed).generator()
    out = np.where(rng.random(n) < p, 1, -1)
    return OutcomeSeries(out, setting_label=label)
