"""Statistical tests for structure that averaged frequencies hide.

Runs test for temporal fine structure, chi-square homogeneity across blocks
or tagged sub-ensembles, two-sample KS, a multi-setting purity test, and a
demonstration of how an inhomogeneous sample breaks a naive binomial test.
Every report carries both the p-value and the decision at its alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .stats import OutcomeSeries, Seed, as_seed, bernoulli_series, running_frequency

DEFAULT_ALPHA = 0.05
EXACT_RUNS_BELOW = 40
NORMAL_RUNS_MIN = 20


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    p_value: float
    n: int
    alpha: float = DEFAULT_ALPHA
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "alpha": self.alpha,
            "reject": self.reject,
            "metadata": self.metadata,
        }


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


# -- runs test ---------------------------------------------------------------

def count_runs(x: np.ndarray) -> int:
    return int(1 + np.count_nonzero(x[1:] != x[:-1])) if x.size else 0


def runs_pmf(n1: int, n2: int) -> dict[int, float]:
    """Null distribution of the number of runs given n1 and n2 symbols."""
    total = math.comb(n1 + n2, n1)
    pmf = {}
    for r in range(2, n1 + n2 + 1):
        k, odd = divmod(r, 2)
        if odd:
            ways = math.comb(n1 - 1, k) * math.comb(n2 - 1, k - 1) + math.comb(n1 - 1, k - 1) * math.comb(n2 - 1, k)
        else:
            ways = 2 * math.comb(n1 - 1, k - 1) * math.comb(n2 - 1, k - 1)
        if ways:
            pmf[r] = ways / total
    return pmf


def runs_moments(n1: int, n2: int) -> tuple[float, float]:
    n = n1 + n2
    mu = 2.0 * n1 * n2 / n + 1.0
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    return mu, math.sqrt(var)


def runs_test(s: OutcomeSeries, alpha: float = DEFAULT_ALPHA, method: str = "auto") -> TestReport:
    """Wald-Wolfowitz runs test of a +-1 series against an iid null.

    ``method`` is "exact", "normal" or "auto" (exact below 40 symbols).  The
    exact p-value is twice the smaller tail, capped at 1.
    """
    x = np.asarray(s.outcomes)
    if np.any(x == 0):
        raise ValueError("runs test needs a +-1 series without undetected (0) outcomes")
    n1 = int(np.count_nonzero(x == 1))
    n2 = int(x.size - n1)
    if n1 == 0 or n2 == 0:
        raise ValueError("runs test needs both symbols present")
    n = n1 + n2
    if method == "auto":
        method = "exact" if n < EXACT_RUNS_BELOW else "normal"
    if method not in ("exact", "normal"):
        raise ValueError(f"unknown runs-test method {method!r}")
    if method == "normal" and n < NORMAL_RUNS_MIN:
        raise ValueError(f"normal approximation needs n >= {NORMAL_RUNS_MIN}, got {n}")
    r = count_runs(x)
    mu, sigma = runs_moments(n1, n2)
    z = (r - mu) / sigma if sigma > 0 else 0.0
    if method == "exact":
        pmf = runs_pmf(n1, n2)
        lower = sum(v for k, v in pmf.items() if k <= r)
        upper = sum(v for k, v in pmf.items() if k >= r)
        p = 2.0 * min(lower, upper)
    else:
        p = 2.0 * sps.norm.sf(abs(z))
    meta = {"runs": r, "n_plus": n1, "n_minus": n2, "mu": mu, "sigma": sigma, "z": z, "method": method}
    return TestReport("runs", float(r if method == "exact" else z), _clip_p(p), n, alpha, meta)


# -- homogeneity -------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Either ``count`` contiguous blocks, or one block per distinct tag."""

    mode: str = "blocks"
    count: int = 10
    tags: tuple | None = None
    min_block: int = 50

    def __post_init__(self):
        if self.mode not in ("blocks", "tags"):
            raise ValueError("split mode must be 'blocks' or 'tags'")
        if self.mode == "blocks" and self.count < 2:
            raise ValueError("need at least two blocks")
        if self.mode == "tags" and self.tags is None:
            raise ValueError("tag split needs a tag column")
        if self.min_block < 1:
            raise ValueError("min_block must be positive")

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        if self.mode == "blocks":
            if x.size < self.count:
                raise ValueError("fewer outcomes than blocks")
            return np.array_split(x, self.count)
        tags = np.asarray(self.tags)
        if tags.shape != x.shape:
            raise ValueError("tag column length differs from the series")
        labels = sorted(set(tags.tolist()))
        if len(labels) < 2:
            raise ValueError("tag split needs at least two distinct tags")
        return [x[tags == t] for t in labels]


def _contingency(groups: Sequence[np.ndarray]) -> np.ndarray:
    cats = np.unique(np.concatenate(groups))
    return np.array([[np.count_nonzero(g == c) for c in cats] for g in groups])


def chi_square_homogeneity(groups: Sequence[np.ndarray], name: str, alpha: float, min_block: int = 1) -> TestReport:
    sizes = [int(g.size) for g in groups]
    if len(groups) < 2:
        raise ValueError("homogeneity needs at least two groups")
    if min(sizes) < min_block:
        raise ValueError(f"smallest group has {min(sizes)} outcomes, below min_block={min_block}")
    table = _contingency(groups)
    if table.shape[1] < 2:
        raise ValueError("degenerate table: a single outcome category across all groups")
    chi2, p, dof, _ = sps.chi2_contingency(table, correction=False)
    meta = {"dof": int(dof), "groups": len(groups), "group_sizes": sizes}
    return TestReport(name, float(chi2), _clip_p(p), int(sum(sizes)), alpha, meta)


def block_homogeneity(s: OutcomeSeries, split: SplitSpec | None = None, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Chi-square test that every block shares one outcome distribution."""
    split = split or SplitSpec()
    groups = split.split(np.asarray(s.outcomes))
    return chi_square_homogeneity(groups, "block_homogeneity", alpha, split.min_block)


def ks_two_sample(x, y, alpha: float = DEFAULT_ALPHA) -> TestReport:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 10 or y.size < 10:
        raise ValueError("KS two-sample test needs at least 10 points per sample")
    res = sps.ks_2samp(x, y, method="asymp")
    return TestReport("ks_two_sample", float(res.statistic), _clip_p(res.pvalue), int(x.size + y.size), alpha,
                      {"n_x": int(x.size), "n_y": int(y.size)})


def _codes(entry) -> np.ndarray:
    # a pair of series is coded as the joint outcome (a, b) -> 3(a+1) + (b+1)
    if isinstance(entry, OutcomeSeries):
        return np.asarray(entry.outcomes, dtype=np.int64)
    a, b = entry
    if len(a) != len(b):
        raise ValueError("paired series differ in length")
    return 3 * (a.outcomes.astype(np.int64) + 1) + (b.outcomes.astype(np.int64) + 1)


def purity_test(
    streams: Mapping[str, Mapping[str, object]],
    settings: Sequence[str],
    alpha: float = DEFAULT_ALPHA,
    min_block: int = 50,
    runs_per_tag: bool = False,
) -> TestReport:
    """Do all tagged sub-ensembles give one outcome distribution at every setting?

    ``streams[tag][setting]`` is an OutcomeSeries, or an (A, B) pair of
    series whose joint outcomes are compared.  One chi-square test per
    setting; the combined p-value is the Bonferroni bound
    min(1, k * min p).  ``runs_per_tag`` adds a runs test of every stream
    to the metadata without entering the decision.
    """
    tags = sorted(streams)
    if len(tags) < 2:
        raise ValueError("purity test needs at least two sub-ensemble tags")
    settings = list(settings)
    if not settings:
        raise ValueError("empty settings grid")
    for t in tags:
        if set(streams[t]) != set(settings):
            raise ValueError(f"tag {t!r} settings {sorted(streams[t])} do not match the grid {sorted(settings)}")
    per_setting = {}
    for st in settings:
        rep = chi_square_homogeneity([_codes(streams[t][st]) for t in tags], "purity", alpha, min_block)
        per_setting[st] = rep
    if len(settings) == 1:
        only = per_setting[settings[0]]
        return TestReport("purity", only.statistic, only.p_value, only.n, alpha,
                          {**only.metadata, "settings": settings, "tags": tags})
    k = len(settings)
    p_min = min(r.p_value for r in per_setting.values())
    meta = {
        "tags": tags,
        "settings": settings,
        "combination": "bonferroni",
        "per_setting": {st: {"chi2": r.statistic, "p_value": r.p_value, "dof": r.metadata["dof"]}
                        for st, r in per_setting.items()},
    }
    if runs_per_tag:
        meta["runs"] = {
            f"{t}/{st}": runs_test(streams[t][st], alpha).p_value
            for t in tags for st in settings if isinstance(streams[t][st], OutcomeSeries)
        }
    total = sum(r.statistic for r in per_setting.values())
    return TestReport("purity", float(total), _clip_p(k * p_min), sum(r.n for r in per_setting.values()), alpha, meta)


# -- sample inhomogeneity ----------------------------------------------------

def variance_inflation(p1: float, p2: float, n_block: int) -> float:
    """Predicted ratio of block-mean variance to the binomial p q / n_block
    when half the blocks have p1 and half p2."""
    pbar = 0.5 * (p1 + p2)
    return 1.0 + n_block * (0.5 * (p1 - p2)) ** 2 / (pbar * (1.0 - pbar))


def inhomogeneity_demo(n: int, p1: float, p2: float, seed, blocks: int = 10, alpha: float = DEFAULT_ALPHA):
    """A Bernoulli(p1) half followed by a Bernoulli(p2) half.

    The naive report is a binomial test of H0: p = (p1 + p2)/2 that treats
    the stream as one homogeneous sample; its metadata compares the spread
    of block means with what that sample model predicts.  The diagnosis is
    block_homogeneity with the given number of blocks.
    """
    for p in (p1, p2):
        if not 0.0 < p < 1.0:
            raise ValueError("p1 and p2 must lie strictly between 0 and 1")
    if blocks < 2 or blocks % 2:
        raise ValueError("blocks must be an even number of at least 2")
    if n < 2 * blocks:
        raise ValueError("n too small for the block count")
    seed = as_seed(seed)
    h1 = n // 2
    s1 = bernoulli_series(p1, h1, seed.substream("inhomogeneity/first"))
    s2 = bernoulli_series(p2, n - h1, seed.substream("inhomogeneity/second"))
    x = np.concatenate([s1.outcomes, s2.outcomes])
    series = OutcomeSeries(x, setting_label="inhomogeneous")
    ones = int(np.count_nonzero(x == 1))
    pbar = 0.5 * (p1 + p2)
    naive = sps.binomtest(ones, n, pbar)
    block_means = np.array([np.mean(b == 1) for b in np.array_split(x, blocks)])
    n_block = n // blocks
    nominal_var = pbar * (1 - pbar) / n_block
    meta = {
        "p0": pbar,
        "frequency": ones / n,
        "n_block": n_block,
        "block_mean_variance": float(np.var(block_means, ddof=1)),
        "nominal_block_variance": nominal_var,
        "variance_inflation": float(np.var(block_means, ddof=1) / nominal_var),
        "predicted_inflation": variance_inflation(p1, p2, n_block),
    }
    naive_report = TestReport("naive_binomial", float(ones), _clip_p(naive.pvalue), n, alpha, meta)
    diagnosis = block_homogeneity(series, SplitSpec("blocks", blocks), alpha)
    return naive_report, diagnosis


# -- fine structure and calibration ------------------------------------------

class FineStructurePair(NamedTuple):
    alternating: OutcomeSeries
    shuffled: OutcomeSeries
    final_frequency: tuple[float, float]
    runs_alternating: TestReport
    runs_shuffled: TestReport


def alternating_series(n: int) -> OutcomeSeries:
    return OutcomeSeries(np.where(np.arange(n) % 2 == 0, 1, -1), setting_label="alternating")


def fine_structure_pair(n: int, seed, alpha: float = DEFAULT_ALPHA) -> FineStructurePair:
    """The alternating series and a random permutation of it.

    Both have the same symbol counts, hence the same final running
    frequency, yet only the alternating one fails the runs test.
    """
    alt = alternating_series(n)
    rng = as_seed(seed).substream("fine_structure/shuffle").generator()
    shuf = OutcomeSeries(rng.permutation(alt.outcomes), setting_label="shuffled")
    freq = (float(running_frequency(alt, 1)[-1]), float(running_frequency(shuf, 1)[-1]))
    return FineStructurePair(alt, shuf, freq, runs_test(alt, alpha), runs_test(shuf, alpha))


class Calibration(NamedTuple):
    rejection_rate: float
    ks_p_value: float
    n_seeds: int


def calibrate(make_report: Callable[[Seed], TestReport], n_seeds: int = 1000, seed=0) -> Calibration:
    """Null rejection rate over independent seeds, plus a one-sided KS test
    that the p-values are not stochastically smaller than uniform."""
    base = as_seed(seed)
    reports = [make_report(base.substream(f"calibration/{k}")) for k in range(n_seeds)]
    p = np.array([r.p_value for r in reports])
    rate = float(np.mean([r.reject for r in reports]))
    ks = sps.kstest(p, "uniform", alternative="greater")
    return Calibration(rate, float(ks.pvalue), n_seeds)
