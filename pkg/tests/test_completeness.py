import math
from itertools import permutations

import numpy as np
import pytest
from scipy import stats as sps

from contextlab import quantum
from contextlab.completeness import (
    SplitSpec,
    TestReport,
    alternating_series,
    block_homogeneity,
    calibrate,
    count_runs,
    fine_structure_pair,
    inhomogeneity_demo,
    ks_two_sample,
    purity_test,
    runs_moments,
    runs_pmf,
    runs_test,
    variance_inflation,
)
from contextlab.stats import OutcomeSeries, as_seed, bernoulli_series

FIFTEEN = [1, -1, -1, -1, 1, 1, -1, -1, 1, 1, 1, -1, 1, -1, -1]


# -- report

def test_report_invariants():
    r = TestReport("x", 1.0, 0.04, 10)
    assert r.reject and r.to_dict()["reject"] is True
    assert not TestReport("x", 1.0, 0.04, 10, alpha=0.01).reject
    with pytest.raises(ValueError):
        TestReport("x", 1.0, 1.2, 10)


# -- runs test

def test_runs_alternating():
    r = runs_test(alternating_series(1000))
    assert r.metadata["runs"] == 1000
    assert r.metadata["mu"] == pytest.approx(501.0)
    assert r.metadata["sigma"] == pytest.approx(15.8, abs=0.01)
    assert r.statistic == pytest.approx(31.575, abs=0.01)
    assert r.p_value < 1e-6 and r.reject


def test_runs_fifteen_symbol_sequence():
    r = runs_test(OutcomeSeries(FIFTEEN))
    assert r.metadata["method"] == "exact"
    # direct count of the listed sequence gives 8 runs
    assert r.metadata["runs"] == 8 == 1 + sum(a != b for a, b in zip(FIFTEEN, FIFTEEN[1:]))
    assert 0.0 <= r.p_value <= 1.0


def _brute_runs_pmf(n1, n2):
    seqs = set(permutations([1] * n1 + [-1] * n2))
    out = {}
    for s in seqs:
        r = count_runs(np.array(s))
        out[r] = out.get(r, 0) + 1
    return {k: v / len(seqs) for k, v in out.items()}


@pytest.mark.parametrize("n1, n2", [(1, 1), (2, 3), (4, 4), (3, 5), (6, 2)])
def test_runs_pmf_against_enumeration(n1, n2):
    exact = runs_pmf(n1, n2)
    brute = _brute_runs_pmf(n1, n2)
    assert set(exact) >= set(brute)
    for k, v in brute.items():
        assert exact[k] == pytest.approx(v)
    mu = sum(k * v for k, v in brute.items())
    var = sum((k - mu) ** 2 * v for k, v in brute.items())
    m, s = runs_moments(n1, n2)
    assert m == pytest.approx(mu) and s == pytest.approx(math.sqrt(var))


def test_runs_errors():
    with pytest.raises(ValueError, match="both symbols"):
        runs_test(OutcomeSeries([1] * 30))
    with pytest.raises(ValueError, match="n >= 20"):
        runs_test(OutcomeSeries(FIFTEEN), method="normal")
    with pytest.raises(ValueError):
        runs_test(OutcomeSeries([1, 0, -1] * 10))


def test_runs_calibration():
    cal = calibrate(lambda s: runs_test(bernoulli_series(0.5, 200, s)), 1000, seed=1)
    assert abs(cal.rejection_rate - 0.05) <= 0.02
    assert cal.ks_p_value > 0.01


# -- block homogeneity

def test_block_calibration():
    cal = calibrate(lambda s: block_homogeneity(bernoulli_series(0.5, 2000, s)), 1000, seed=2)
    assert abs(cal.rejection_rate - 0.05) <= 0.02
    assert cal.ks_p_value > 0.01


def _drift(n, seed):
    p = np.linspace(0.4, 0.6, n)
    u = np.random.default_rng(seed).random(n)
    return OutcomeSeries(np.where(u < p, 1, -1))


def test_drift_power():
    # noncentral chi-square oracle for 10 blocks of 1000
    means = np.array([np.linspace(0.4, 0.6, 10_000)[i * 1000:(i + 1) * 1000].mean() for i in range(10)])
    lam = 1000 * np.sum((means - 0.5) ** 2) / 0.25
    crit = sps.chi2.ppf(0.95, 9)
    assert sps.ncx2.sf(crit, 9, lam) > 0.99
    rejected = [block_homogeneity(_drift(10_000, k)).reject for k in range(200)]
    assert np.mean(rejected) > 0.97


def test_identical_blocks_give_unit_p():
    block = bernoulli_series(0.5, 100, 3).outcomes
    r = block_homogeneity(OutcomeSeries(np.concatenate([block, block])), SplitSpec("blocks", 2))
    assert r.p_value == pytest.approx(1.0) and r.statistic == pytest.approx(0.0)


def test_block_errors():
    s = bernoulli_series(0.5, 300, 4)
    with pytest.raises(ValueError, match="min_block"):
        block_homogeneity(s, SplitSpec("blocks", 10))
    with pytest.raises(ValueError, match="degenerate"):
        block_homogeneity(OutcomeSeries([1] * 1000))
    with pytest.raises(ValueError):
        SplitSpec("blocks", 1)
    with pytest.raises(ValueError):
        SplitSpec("tags")


def test_tag_split():
    s = bernoulli_series(0.5, 400, 5)
    tags = np.repeat(["x", "y"], 200)
    r = block_homogeneity(s, SplitSpec("tags", tags=tuple(tags)))
    assert r.metadata["groups"] == 2
    with pytest.raises(ValueError):
        block_homogeneity(s, SplitSpec("tags", tags=("x",) * 400))


# -- KS

def test_ks_examples():
    x = np.random.default_rng(6).random(1000)
    same = ks_two_sample(x, x.copy())
    assert same.statistic == 0 and same.p_value == 1.0
    shifted = ks_two_sample(x, np.random.default_rng(7).random(1000) + 0.2)
    assert shifted.statistic >= 0.15 and shifted.p_value < 1e-6
    with pytest.raises(ValueError):
        ks_two_sample(x[:9], x)


def test_ks_calibration():
    def make(s):
        rng = s.generator()
        return ks_two_sample(rng.random(1000), rng.random(1000))
    cal = calibrate(make, 1000, seed=3)
    assert abs(cal.rejection_rate - 0.05) <= 0.02
    assert cal.ks_p_value > 0.01


# -- purity

SETTINGS = dict(zip(("ab", "abp", "apb", "apbp"), [(0.0, math.pi / 4), (0.0, 3 * math.pi / 4),
                                                     (math.pi / 2, math.pi / 4), (math.pi / 2, 3 * math.pi / 4)]))


def _tagged(visibilities, n, seed):
    seed = as_seed(seed)
    return {
        f"tag{i}": {k: quantum.sample_pairs(quantum.werner(v), a, b, n, seed.substream(f"{i}/{k}"))
                    for k, (a, b) in SETTINGS.items()}
        for i, v in enumerate(visibilities)
    }


def test_purity_detects_imperfect_mixture():
    rejected = [purity_test(_tagged((0.9, 0.7), 10_000, 10 + s), list(SETTINGS)).reject for s in range(20)]
    assert np.mean(rejected) > 0.95


def test_purity_power_oracle():
    # direct binomial power on P(a = b): the two tags differ by 0.1 |cos| at each setting
    n = 10_000
    pw = []
    for a, b in SETTINGS.values():
        c = math.cos(a - b)
        p1, p2 = (1 - 0.9 * c) / 2, (1 - 0.7 * c) / 2
        se = math.sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n)
        pw.append(sps.norm.sf(sps.norm.ppf(1 - 0.05 / 8) - abs(p1 - p2) / se))
    assert max(pw) > 0.95


def test_purity_calibration():
    cal = calibrate(lambda s: purity_test(_tagged((0.8, 0.8), 400, s), list(SETTINGS)), 1000, seed=4)
    # Bonferroni is conservative: only the upper side is bounded
    assert cal.rejection_rate <= 0.07
    assert cal.ks_p_value > 0.01


def test_purity_single_setting_reduces_to_block_homogeneity():
    a = bernoulli_series(0.5, 500, 11)
    b = bernoulli_series(0.55, 500, 12)
    r = purity_test({"x": {"s": a}, "y": {"s": b}}, ["s"])
    joined = OutcomeSeries(np.concatenate([a.outcomes, b.outcomes]))
    ref = block_homogeneity(joined, SplitSpec("blocks", 2))
    assert r.p_value == pytest.approx(ref.p_value) and r.statistic == pytest.approx(ref.statistic)


def test_purity_errors():
    a = bernoulli_series(0.5, 100, 1)
    with pytest.raises(ValueError, match="two"):
        purity_test({"x": {"s": a}}, ["s"])
    with pytest.raises(ValueError, match="match"):
        purity_test({"x": {"s": a}, "y": {"t": a}}, ["s"])


def test_purity_runs_add_on():
    a = bernoulli_series(0.5, 100, 1)
    b = bernoulli_series(0.5, 100, 2)
    r = purity_test({"x": {"s": a, "t": b}, "y": {"s": b, "t": a}}, ["s", "t"], runs_per_tag=True)
    assert set(r.metadata["runs"]) == {"x/s", "x/t", "y/s", "y/t"}


# -- sample inhomogeneity

def test_variance_inflation_formula():
    assert variance_inflation(0.4, 0.6, 1000) == pytest.approx(1 + 1000 * 0.01 / 0.25)
    assert variance_inflation(0.5, 0.5, 1000) == 1.0


def test_inhomogeneity_examples():
    naive, diag = inhomogeneity_demo(10_000, 0.4, 0.6, 5)
    assert naive.metadata["variance_inflation"] > 1.5
    assert naive.metadata["predicted_inflation"] == pytest.approx(41.0)
    assert diag.reject
    power = np.mean([inhomogeneity_demo(10_000, 0.4, 0.6, s)[1].reject for s in range(100)])
    assert power > 0.99


def test_inhomogeneity_homogeneous_case_calibrated():
    cal = calibrate(lambda s: inhomogeneity_demo(2000, 0.5, 0.5, s)[1], 1000, seed=6)
    assert abs(cal.rejection_rate - 0.05) <= 0.02


@pytest.mark.parametrize("p1, p2", [(0.0, 0.5), (0.5, 1.0)])
def test_inhomogeneity_degenerate_p(p1, p2):
    with pytest.raises(ValueError):
        inhomogeneity_demo(1000, p1, p2, 1)


# -- fine structure

def test_fine_structure_pair():
    fs = fine_structure_pair(1000, 7)
    assert fs.final_frequency == (0.5, 0.5)
    assert fs.runs_alternating.reject and not fs.runs_shuffled.reject
    assert sorted(fs.alternating.outcomes.tolist()) == sorted(fs.shuffled.outcomes.tolist())
