"""Pairing two separately recorded outcome streams, and the joint tables that follow.

A joint distribution of two distant outcome streams exists only once a
pairing protocol is fixed, and different protocols applied to the same
streams can give any correlation between -1 and +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .inequalities import CorrelationSet
from .stats import CorrelationEstimate, CountTable, OutcomeSeries, as_seed, correlation_from_counts

OUTCOMES = (-1, 0, 1)


@dataclass(frozen=True)
class Shift:
    """Pair a_i with b_(i+k-1)."""

    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("shift k must be a positive integer")

    def to_dict(self):
        return {"protocol": "shift", "k": self.k}


@dataclass(frozen=True)
class RandomPairing:
    """A uniformly random perfect matching of the common-length prefixes."""

    seed: object = 0

    def to_dict(self):
        return {"protocol": "random", "seed": as_seed(self.seed).to_dict()}


@dataclass(frozen=True)
class CoincidenceWindow:
    """Greedy chronological matching of clicks closer than ``width_ns``."""

    width_ns: int

    def __post_init__(self):
        if self.width_ns <= 0:
            raise ValueError("coincidence window must be positive")

    def to_dict(self):
        return {"protocol": "window", "width_ns": self.width_ns}


PairingProtocol = Union[Shift, RandomPairing, CoincidenceWindow]


def _shift_pairs(na: int, nb: int, k: int) -> np.ndarray:
    if k > nb:
        raise ValueError(f"shift k={k} exceeds the length {nb} of the B series")
    m = min(na, nb - k + 1)
    i = np.arange(m)
    return np.column_stack([i, i + k - 1])


def _random_pairs(na: int, nb: int, seed) -> np.ndarray:
    m = min(na, nb)
    rng = as_seed(seed).substream("pairing/random").generator()
    return np.column_stack([np.arange(m), rng.permutation(m)])


def _window_pairs(sa: OutcomeSeries, sb: OutcomeSeries, width: int) -> np.ndarray:
    """Each A click, in time order, takes the earliest unmatched B click within the window.

    Events with outcome 0 are not clicks and are skipped.  B clicks that
    fall behind the window of the current A click can never match a later
    A click (A times do not decrease), so one forward pointer suffices.
    """
    if not (sa.has_timestamps and sb.has_timestamps):
        raise ValueError("coincidence pairing needs timestamps on both series")
    ia = np.flatnonzero(sa.outcomes != 0)
    ib = np.flatnonzero(sb.outcomes != 0)
    ta = sa.timestamps[ia].tolist()
    tb = sb.timestamps[ib].tolist()
    ia = ia.tolist()
    ib = ib.tolist()
    nb = len(tb)
    j = 0
    out_a, out_b = [], []
    for i, t in zip(ia, ta):
        lo = t - width
        while j < nb and tb[j] < lo:
            j += 1
        if j < nb and tb[j] <= t + width:
            out_a.append(i)
            out_b.append(ib[j])
            j += 1
    return np.column_stack([np.array(out_a, dtype=np.int64), np.array(out_b, dtype=np.int64)])


def pair_streams(sa: OutcomeSeries, sb: OutcomeSeries, protocol: PairingProtocol) -> np.ndarray:
    """Index pairs (i, j) matching element i of ``sa`` with element j of ``sb``."""
    if isinstance(protocol, Shift):
        return _shift_pairs(len(sa), len(sb), protocol.k)
    if isinstance(protocol, RandomPairing):
        return _random_pairs(len(sa), len(sb), protocol.seed)
    if isinstance(protocol, CoincidenceWindow):
        return _window_pairs(sa, sb, protocol.width_ns)
    raise TypeError(f"unknown pairing protocol {protocol!r}")


def singles(sa: OutcomeSeries, sb: OutcomeSeries, pairs: np.ndarray) -> tuple[int, int]:
    """Number of clicks (non-zero outcomes) on each side left unpaired."""
    pairs = np.asarray(pairs).reshape(-1, 2)
    ca = int(np.count_nonzero(sa.outcomes)) - int(np.count_nonzero(sa.outcomes[pairs[:, 0]]))
    cb = int(np.count_nonzero(sb.outcomes)) - int(np.count_nonzero(sb.outcomes[pairs[:, 1]]))
    return ca, cb


@dataclass(frozen=True)
class JointTable:
    """Counts of paired outcomes (a, b), each in {-1, 0, +1}."""

    counts: dict
    n_pairs: int
    protocol_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {(x, y): int(self.counts.get((x, y), 0)) for x in OUTCOMES for y in OUTCOMES}
        extra = set(self.counts) - set(full)
        if extra:
            raise ValueError(f"invalid outcome pairs {sorted(extra)}")
        if sum(full.values()) != self.n_pairs:
            raise ValueError("counts do not sum to n_pairs")
        object.__setattr__(self, "counts", full)

    def probabilities(self) -> dict[tuple[int, int], float]:
        if self.n_pairs == 0:
            raise ValueError("empty joint table")
        return {k: v / self.n_pairs for k, v in self.counts.items()}

    def marginal_a(self) -> dict[int, float]:
        p = self.probabilities()
        return {x: sum(p[(x, y)] for y in OUTCOMES) for x in OUTCOMES}

    def marginal_b(self) -> dict[int, float]:
        p = self.probabilities()
        return {y: sum(p[(x, y)] for x in OUTCOMES) for y in OUTCOMES}

    def count_table(self) -> CountTable:
        c = self.counts
        zero = sum(v for (x, y), v in c.items() if x == 0 or y == 0)
        return CountTable(c[(1, 1)], c[(1, -1)], c[(-1, 1)], c[(-1, -1)], zero)

    def correlation(self, count_zero: bool = False) -> CorrelationEstimate:
        return correlation_from_counts(self.count_table(), count_zero=count_zero)

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "counts": {f"{x:+d},{y:+d}": v for (x, y), v in self.counts.items()},
            "protocol": self.protocol_echo,
        }


def estimate_gjpd(sa: OutcomeSeries, sb: OutcomeSeries, pairs, protocol: PairingProtocol | None = None) -> JointTable:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        if pairs.min() < 0 or pairs[:, 0].max() >= len(sa) or pairs[:, 1].max() >= len(sb):
            raise IndexError("pair index out of range")
    a = sa.outcomes[pairs[:, 0]].astype(np.int64)
    b = sb.outcomes[pairs[:, 1]].astype(np.int64)
    code = (a + 1) * 3 + (b + 1)
    raw = np.bincount(code, minlength=9)
    counts = {(x, y): int(raw[(x + 1) * 3 + (y + 1)]) for x in OUTCOMES for y in OUTCOMES}
    echo = protocol.to_dict() if protocol is not None else {}
    return JointTable(counts, int(pairs.shape[0]), echo)


class FactorizationResult(NamedTuple):
    max_cell_deviation: float
    factorizes: bool
    max_z: float


def factorization_test(t: JointTable, sigmas: float = 4.0, min_pairs: int = 100) -> FactorizationResult:
    """Compare every cell with the product of its marginals.

    Each deviation is standardized by its null standard error
    sqrt(pa pb (1 - pa)(1 - pb) / n) (the adjusted Pearson residual); the
    table factorizes when every residual stays below ``sigmas``.
    """
    if t.n_pairs < min_pairs:
        raise ValueError(f"factorization test needs at least {min_pairs} pairs, got {t.n_pairs}")
    p = t.probabilities()
    pa = t.marginal_a()
    pb = t.marginal_b()
    n = t.n_pairs
    max_dev = 0.0
    max_z = 0.0
    for (x, y), pxy in p.items():
        dev = abs(pxy - pa[x] * pb[y])
        max_dev = max(max_dev, dev)
        se = math.sqrt(pa[x] * pb[y] * (1 - pa[x]) * (1 - pb[y]) / n)
        if se > 0:
            max_z = max(max_z, dev / se)
    return FactorizationResult(max_dev, max_z < sigmas, max_z)


def paired_correlation_set(run, protocol: PairingProtocol, count_zero: bool = False):
    """Pair every setting-pair stream of a model run and collect the four correlations.

    Returns the :class:`CorrelationSet` and the per-pair joint tables.
    """
    tables = {}
    for key in ("ab", "abp", "apb", "apbp"):
        sa, sb = run.streams[key]
        pairs = pair_streams(sa, sb, protocol)
        tables[key] = estimate_gjpd(sa, sb, pairs, protocol)
    est = [tables[k].correlation(count_zero) for k in ("ab", "abp", "apb", "apbp")]
    cs = CorrelationSet(*(e.value for e in est), stderrs=tuple(e.std_error for e in est))
    return cs, tables


def periodic_streams(n: int) -> tuple[OutcomeSeries, OutcomeSeries]:
    """S1 = 0101..., S2 = 1010... with 0 coded -1 and 1 coded +1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    s1 = np.where(np.arange(n) % 2 == 0, -1, 1)
    return OutcomeSeries(s1, setting_label="S1"), OutcomeSeries(-s1, setting_label="S2")
