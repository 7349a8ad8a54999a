"""Probability as a property of a random experiment, not of an object.

Three small demonstrations: Bertrand's chord problem answered by three
different sampling protocols, urn draws with and without replacement, and a
coin whose head probability depends on the flipping device.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .stats import as_seed

OUTER_RADIUS = 1.0
INNER_RADIUS = 0.5


class ChordMethod(enum.Enum):
    RANDOM_CENTER = "random_center"
    PARALLEL_CHORDS = "parallel_chords"
    RANDOM_ENDPOINTS = "random_endpoints"

    @classmethod
    def parse(cls, value) -> "ChordMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown chord method {value!r}; expected one of {names}") from None


ANALYTIC_CHORD_PROBABILITY = {
    ChordMethod.RANDOM_CENTER: 0.25,
    ChordMethod.PARALLEL_CHORDS: 0.5,
    ChordMethod.RANDOM_ENDPOINTS: 1.0 / 3.0,
}


class BertrandResult(NamedTuple):
    estimate: float
    analytic: float
    n: int


def chord_distances(method: ChordMethod, n: int, rng: np.random.Generator) -> np.ndarray:
    """Distance from the centre of n random chords of the unit circle."""
    method = ChordMethod.parse(method)
    if method is ChordMethod.RANDOM_CENTER:
        # chord midpoint uniform in the disc
        return OUTER_RADIUS * np.sqrt(rng.random(n))
    if method is ChordMethod.PARALLEL_CHORDS:
        return np.abs(rng.uniform(-OUTER_RADIUS, OUTER_RADIUS, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, (2, n))
    return OUTER_RADIUS * np.abs(np.cos(0.5 * (theta[0] - theta[1])))


def bertrand_estimate(method, n: int, seed) -> BertrandResult:
    """Fraction of random chords of the outer circle that cut the inner one."""
    if n < 1:
        raise ValueError("n must be at least 1")
    method = ChordMethod.parse(method)
    rng = as_seed(seed).substream(f"bertrand/{method.value}").generator()
    d = chord_distances(method, n, rng)
    hits = int(np.count_nonzero(d < INNER_RADIUS))
    return BertrandResult(hits / n, ANALYTIC_CHORD_PROBABILITY[method], n)


@dataclass(frozen=True)
class UrnProtocol:
    n_blue: int
    n_other: int
    draws: int
    replacement: bool = True

    def __post_init__(self):
        if min(self.n_blue, self.n_other, self.draws) < 0:
            raise ValueError("urn counts must be non-negative")
        if self.n_blue + self.n_other == 0 and self.draws > 0:
            raise ValueError("cannot draw from an empty urn")
        if not self.replacement and self.draws > self.n_blue + self.n_other:
            raise ValueError(
                f"{self.draws} draws exceed the {self.n_blue + self.n_other} balls "
                "available without replacement"
            )

    @property
    def population(self) -> int:
        return self.n_blue + self.n_other


def urn_distribution(p: UrnProtocol) -> dict[int, Fraction]:
    """Exact distribution of the number of blue balls drawn.

    Outcomes of probability zero are omitted.
    """
    total = p.population
    dist: dict[int, Fraction] = {}
    for k in range(p.draws + 1):
        if p.replacement:
            q = Fraction(p.n_blue, total) if total else Fraction(0)
            prob = math.comb(p.draws, k) * q**k * (1 - q) ** (p.draws - k)
        else:
            prob = Fraction(
                math.comb(p.n_blue, k) * math.comb(p.n_other, p.draws - k),
                math.comb(total, p.draws),
            )
        if prob:
            dist[k] = prob
    return dist


def simulate_urn(p: UrnProtocol, n: int, seed) -> dict[int, int]:
    """Monte-Carlo counts of blue balls drawn over n repetitions of the protocol."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_seed(seed).substream("urn").generator()
    if p.replacement:
        blue = rng.binomial(p.draws, p.n_blue / p.population, n)
    else:
        blue = rng.hypergeometric(p.n_blue, p.n_other, p.draws, n) if p.draws else np.zeros(n, int)
    values, counts = np.unique(blue, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


@dataclass(frozen=True)
class CoinDevice:
    """A coin of some bias flipped by a device that shifts the head probability."""

    coin_bias: float = 0.5
    device_shift: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.coin_bias <= 1.0:
            raise ValueError("coin_bias must lie in [0, 1]")
        if not -0.5 <= self.device_shift <= 0.5:
            raise ValueError("device_shift must lie in [-0.5, 0.5]")

    @property
    def probability(self) -> float:
        return min(max(self.coin_bias + self.device_shift, 0.0), 1.0)


@dataclass(frozen=True)
class FrequencyEstimate:
    value: float
    n: int
    std_error: float

    def to_dict(self) -> dict:
        return {"value": self.value, "n": self.n, "std_error": self.std_error}


def coin_device_run(cd: CoinDevice, n: int, seed) -> FrequencyEstimate:
    """Empirical head frequency from n flips of one coin with one device."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_seed(seed).substream(f"coin/{cd.coin_bias!r}/{cd.device_shift!r}").generator()
    heads = int(np.count_nonzero(rng.random(n) < cd.probability))
    p_hat = heads / n
    return FrequencyEstimate(p_hat, n, math.sqrt(p_hat * (1.0 - p_hat) / n))
