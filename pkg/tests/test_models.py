import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from scipy import integrate

from contextlab.inequalities import chsh_s, spreadsheet_chsh
from contextlab.models import (
    ModelConfig,
    Settings,
    analytic_correlation,
    event_pulse_period_ns,
    impossible_protocol,
    no_signalling_z,
    run_bell71,
    run_contextual_event,
    run_lrhvm,
    run_model,
    run_shvm,
    sign_model_correlation,
)
from contextlab.pairing import CoincidenceWindow, estimate_gjpd, pair_streams
from contextlab.stats import Seed

LRHVM = ModelConfig("lrhvm")
SHVM = ModelConfig("shvm")


def _pair_e(run, key, width):
    a, b = run.streams[key]
    return estimate_gjpd(a, b, pair_streams(a, b, CoincidenceWindow(width))).correlation()


# -- LRHVM

def test_sign_model_perfect_anticorrelation():
    run = run_lrhvm(LRHVM, Settings(0.7, 0.7, 0.7, 0.7), 10_000, 1)
    assert all(run.correlation(k).value == -1.0 for k in ("ab", "abp", "apb", "apbp"))


@pytest.mark.parametrize("delta, target", [(math.pi / 2, 0.0), (math.pi / 3, -1 / 3)])
def test_sign_model_correlation_values(delta, target):
    run = run_lrhvm(LRHVM, Settings(0, 0, delta, delta), 1_000_000, 2)
    assert run.correlation("ab").value == pytest.approx(target, abs=0.004)
    assert sign_model_correlation(delta) == pytest.approx(target, abs=1e-15)


def test_spreadsheet_columns_come_from_one_lambda():
    s = Settings(0.0, 1.0, 0.0, 1.0)
    run = run_lrhvm(LRHVM, s, 5000, 3)
    sheet = run.spreadsheet
    assert sheet.shape == (5000, 4)
    # b = a and b' = a' with B = -A on a shared lambda
    assert np.array_equal(sheet[:, 2], -sheet[:, 0]) and np.array_equal(sheet[:, 3], -sheet[:, 1])


@given(st.integers(0, 2**32), st.floats(0, 6.3), st.floats(0, 6.3), st.floats(0, 6.3), st.floats(0, 6.3))
@hsettings(max_examples=25)
def test_lrhvm_spreadsheet_bound_exact(seed, a, ap, b, bp):
    run = run_lrhvm(LRHVM, Settings(a, ap, b, bp), 200, seed)
    assert abs(spreadsheet_chsh(run.spreadsheet)) <= 2


def test_periodicity_two():
    cfg = ModelConfig("lrhvm", periodicity=2)
    run = run_lrhvm(cfg, Settings(0, 0, math.pi / 4, math.pi / 4), 200_000, 4)
    assert run.correlation("ab").value == pytest.approx(0.0, abs=0.012)
    assert analytic_correlation(cfg, 0, math.pi / 6) == pytest.approx(-1 / 3)


# -- SHVM

def _shvm_oracle(delta):
    f = lambda lam: (math.cos(lam)) * (-math.cos(delta - lam))
    return integrate.quad(f, 0, 2 * math.pi)[0] / (2 * math.pi)


def test_shvm_cosine_matches_integral():
    run = run_shvm(SHVM, Settings(0, 0, 0, 1.1), 1_000_000, 5)
    assert run.correlation("ab").value == pytest.approx(-0.5, abs=0.004)
    assert _shvm_oracle(0.0) == pytest.approx(-0.5)
    e = run.correlation("abp")
    assert abs(e.value - _shvm_oracle(-1.1)) < 4 * e.std_error
    assert analytic_correlation(SHVM, 0, 1.1) == pytest.approx(_shvm_oracle(1.1))


def test_shvm_chsh_near_root_two():
    run = run_shvm(SHVM, Settings.chsh_optimal(), 400_000, 6)
    r = chsh_s(run.correlation_set())
    assert r.max_abs == pytest.approx(math.sqrt(2), abs=5 * r.combined_stderr)
    assert r.bound_satisfied


def test_shvm_degenerate_constant():
    cfg = ModelConfig("shvm", response="constant", params={"p1": 1.0, "p2": 1.0})
    run = run_shvm(cfg, Settings(0, 0, 1, 1), 1000, 7)
    a, b = run.streams["ab"]
    assert (a.outcomes == 1).all() and (b.outcomes == 1).all()
    assert run.correlation("ab").value == 1.0


def test_shvm_probability_outside_range():
    cfg = ModelConfig("shvm", response="constant", params={"p1": 1.5})
    with pytest.raises(ValueError, match="probability"):
        run_shvm(cfg, Settings(0, 0, 0, 0), 10, 1)


def test_impossible_protocol_is_labelled():
    est = impossible_protocol(SHVM, Settings(0, 0, 0, 0), 2000, 200, 8)
    assert est.realizable is False
    # repeated local averages recover the cosine product on the frozen lambda
    assert est.correlations["ab"] == pytest.approx(-0.5, abs=0.05)
    with pytest.raises(ValueError):
        impossible_protocol(LRHVM, Settings(0, 0, 0, 0), 10, 10, 1)


# -- Bell71

def test_bell71_detection_fraction():
    cfg = ModelConfig("bell71", params={"eta": 0.75})
    run = run_bell71(cfg, Settings(0, 0, 0, 0), 100_000, 9)
    a, b = run.streams["ab"]
    frac = np.mean((a.outcomes != 0) & (b.outcomes != 0))
    assert frac == pytest.approx(0.75**2, abs=0.005)


def test_bell71_unit_efficiency_matches_lrhvm():
    s = Settings(0, 0, math.pi / 3, math.pi / 3)
    run = run_bell71(ModelConfig("bell71", params={"eta": 1.0}), s, 400_000, 10)
    a, b = run.streams["ab"]
    assert (a.outcomes != 0).all() and (b.outcomes != 0).all()
    e = run.correlation("ab")
    assert abs(e.value - sign_model_correlation(math.pi / 3)) < 4 * e.std_error


def test_bell71_emitted_pair_analytic():
    cfg = ModelConfig("bell71", params={"eta": 0.8})
    run = run_bell71(cfg, Settings(0, 0, 1.0, 1.0), 400_000, 11)
    e = run.correlation("ab", count_zero=True)
    assert abs(e.value - analytic_correlation(cfg, 0, 1.0)) < 4 * e.std_error


@pytest.mark.parametrize("family, kwargs, count_zero", [
    ("lrhvm", {}, False),
    ("shvm", {}, True),
    ("bell71", {"params": {"eta": 0.8}}, True),
    ("bell71", {"response": "cosine_eta", "params": {"eta": 0.9}}, True),
])
@pytest.mark.parametrize("seed", range(5))
def test_chsh_bound_classical_families(family, kwargs, count_zero, seed):
    run = run_model(ModelConfig(family, **kwargs), Settings.chsh_optimal(), 50_000, seed)
    assert chsh_s(run.correlation_set(count_zero)).bound_satisfied


@pytest.mark.parametrize("cfg", [
    LRHVM,
    SHVM,
    ModelConfig("bell71", params={"eta": 0.7}),
    ModelConfig("contextual_event", window_ns=2000),
], ids=lambda c: c.family)
def test_no_signalling_all_families(cfg):
    run = run_model(cfg, Settings(0.0, 1.3, 0.4, 2.2), 100_000, 12)
    z = no_signalling_z(run)
    assert set(z) == {"A@a", "A@a'", "B@b", "B@b'"}
    assert all(abs(v) < 5 for v in z.values())


# -- event model

EVENT = ModelConfig("contextual_event", window_ns=200)


def test_event_streams_are_timestamped_and_unpaired():
    run = run_contextual_event(EVENT, Settings.chsh_optimal(), 100, 1)
    a, b = run.streams["ab"]
    assert a.has_timestamps and b.has_timestamps
    with pytest.raises(ValueError, match="unpaired"):
        run.counts("ab")
    period = event_pulse_period_ns(EVENT)
    assert (np.diff(a.timestamps) > 0).all() and period > EVENT.delay_T0_ns + EVENT.window_ns


def test_event_instrument_substreams_are_distinct():
    seed = Seed(3)
    ids = {seed.substream(f"event/{k}/instrument_x").stream_id for k in ("ab", "abp", "apb", "apbp")}
    ids |= {seed.substream(f"event/{k}/instrument_y").stream_id for k in ("ab", "abp", "apb", "apbp")}
    assert len(ids) == 8
    run = run_contextual_event(EVENT, Settings(0, 0, 0, 0), 1000, 3)
    # identical settings, distinct sample spaces: the delay sequences differ
    assert not np.array_equal(run.streams["ab"][0].timestamps, run.streams["apb"][0].timestamps)


def _weighted_oracle(delta, d=2.0):
    """Small-window limit: coincidence density is proportional to 1 / max(delay scale)."""
    def w(phi):
        return 1.0 / max(abs(math.sin(phi)), abs(math.sin(phi - delta))) ** d

    def sgn(x):
        return 1.0 if x >= 0 else -1.0

    pts = sorted({k * math.pi / 2 for k in range(5)} | {(delta + k * math.pi / 2) % (2 * math.pi) for k in range(4)})
    num = integrate.quad(lambda p: -sgn(math.cos(p)) * sgn(math.cos(p - delta)) * w(p), 0, 2 * math.pi, points=pts, limit=400)[0]
    den = integrate.quad(w, 0, 2 * math.pi, points=pts, limit=400)[0]
    return num / den


@pytest.mark.parametrize("delta", [k * math.pi / 8 for k in range(1, 8)])
def test_small_window_oracle_is_cosine(delta):
    assert _weighted_oracle(delta) == pytest.approx(-math.cos(delta), abs=1e-6)


@pytest.mark.slow
def test_event_small_window_reproduces_cosine():
    angles = [k * math.pi / 8 for k in range(8)]
    for i in range(0, 8, 2):
        d1, d2 = angles[i], angles[i + 1]
        run = run_contextual_event(EVENT, Settings(0, 0, d1, d2), 1_000_000, 100 + i)
        for key, d in (("ab", d1), ("abp", d2)):
            assert _pair_e(run, key, EVENT.window_ns).value == pytest.approx(-math.cos(d), abs=0.05)


def test_event_wide_window_is_single_count_model():
    cfg = ModelConfig("contextual_event", window_ns=10**9)
    run = run_contextual_event(cfg, Settings(0, 0, math.pi / 2, math.pi / 3), 100_000, 13)
    e = _pair_e(run, "ab", cfg.window_ns)
    assert abs(e.value) < 4 * e.std_error
    e3 = _pair_e(run, "abp", cfg.window_ns)
    assert abs(e3.value - sign_model_correlation(math.pi / 3)) < 4 * e3.std_error


def test_setting_dependent_source_is_opt_in():
    with pytest.raises(ValueError):
        ModelConfig("contextual_event", window_ns=10, source_concentration=1.0)
    cfg = ModelConfig("contextual_event", window_ns=10, setting_dependent_source=True, source_concentration=2.0)
    assert cfg.to_dict()["setting_dependent_source"] is True


# -- config and determinism

@pytest.mark.parametrize("kwargs", [
    {"family": "quantum"},
    {"family": "lrhvm", "response": "cosine"},
    {"family": "contextual_event"},
    {"family": "contextual_event", "window_ns": 0},
    {"family": "shvm", "periodicity": 3},
    {"family": "bell71", "params": {"eta": 1.5}},
])
def test_model_config_errors(kwargs):
    with pytest.raises(ValueError):
        ModelConfig(**kwargs)


def test_codomain_violation():
    from contextlab import models
    bad = models.DeterministicResponse(lambda a, lam, prm, p: np.zeros_like(lam), models._sign_bob)
    models.LRHVM_RESPONSES["bad"] = bad
    try:
        with pytest.raises(ValueError, match="outside"):
            run_lrhvm(ModelConfig("lrhvm", response="bad"), Settings(0, 0, 0, 0), 10, 1)
    finally:
        del models.LRHVM_RESPONSES["bad"]


def test_wrong_family_generator():
    with pytest.raises(ValueError):
        run_shvm(LRHVM, Settings(0, 0, 0, 0), 10, 1)
    with pytest.raises(ValueError):
        run_lrhvm(LRHVM, Settings(0, 0, 0, 0), 0, 1)


@pytest.mark.parametrize("cfg", [LRHVM, SHVM, ModelConfig("bell71", params={"eta": 0.8}), EVENT], ids=lambda c: c.family)
def test_determinism(cfg):
    s = Settings.chsh_optimal()
    r1, r2 = run_model(cfg, s, 2000, 42), run_model(cfg, s, 2000, 42)
    assert r1.identical_to(r2)
    assert not r1.identical_to(run_model(cfg, s, 2000, 43))
