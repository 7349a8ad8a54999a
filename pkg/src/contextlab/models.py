"""Event generators for hidden-variable models of correlation experiments.

Four families are simulated trial by trial:

``lrhvm``
    Outcomes predetermined at the source, A(a, lam) = +-1 and B(b, lam) = +-1.
``shvm``
    Given lam, each side draws its outcome independently with probability
    p(+ | setting, lam).
``bell71``
    Outcomes in {-1, 0, +1} depend on lam and on instrument variables drawn
    fresh per trial and per side.
``contextual_event``
    Each station combines its signal variable with its own setting-dependent
    instrument variable into an outcome and a time delay; pairs are only
    formed later from the time stamps (see :mod:`contextlab.pairing`).

The first three use one probability space for all four setting pairs, which
is what makes CHSH provable for them.  The event model draws the instrument
variables of every setting pair from a distinct stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np

from .inequalities import CorrelationSet, DetectionProbs
from .stats import (
    CorrelationEstimate,
    CountTable,
    OutcomeSeries,
    Seed,
    as_seed,
    correlation_from_counts,
)

FAMILIES = ("lrhvm", "shvm", "bell71", "contextual_event")
PAIR_KEYS = ("ab", "abp", "apb", "apbp")
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Settings:
    a: float
    ap: float
    b: float
    bp: float

    def pair(self, key: str) -> tuple[float, float]:
        return {
            "ab": (self.a, self.b),
            "abp": (self.a, self.bp),
            "apb": (self.ap, self.b),
            "apbp": (self.ap, self.bp),
        }[key]

    @classmethod
    def chsh_optimal(cls, periodicity: int = 1) -> "Settings":
        q = math.pi / 4 / periodicity
        return cls(0.0, 2 * q, q, 3 * q)

    def to_dict(self) -> dict:
        return {"a": self.a, "ap": self.ap, "b": self.b, "bp": self.bp}


def _sign(x: np.ndarray) -> np.ndarray:
    # sign(0) happens on a set of measure zero; map it to +1
    return np.where(x >= 0, 1, -1).astype(np.int8)


def _wrapped(delta: float) -> float:
    return (delta + math.pi) % TWO_PI - math.pi


def sign_model_correlation(delta: float, periodicity: int = 1) -> float:
    """E = 2|p*delta|/pi - 1 (wrapped) for the built-in sign model."""
    return 2.0 * abs(_wrapped(periodicity * delta)) / math.pi - 1.0


# -- response functions ------------------------------------------------------

@dataclass(frozen=True)
class DeterministicResponse:
    """A(a, lam) and B(b, lam), both into {-1, +1}."""

    alice: Callable
    bob: Callable
    analytic: Callable | None = None


@dataclass(frozen=True)
class StochasticResponse:
    """Side functions of (setting, lam, uniforms, params, periodicity).

    ``uniforms`` has a trailing axis of length ``n_uniforms`` holding the
    local randomness (SHVM) or instrument variables (Bell71) of one trial.
    """

    alice: Callable
    bob: Callable
    n_uniforms: int
    analytic: Callable | None = None


def _sign_alice(a, lam, params, p):
    return _sign(np.cos(p * (lam - a)))


def _sign_bob(b, lam, params, p):
    return -_sign(np.cos(p * (lam - b)))


def _sign_analytic(a, b, params, p):
    return sign_model_correlation(a - b, p)


LRHVM_RESPONSES: dict[str, DeterministicResponse] = {
    "sign": DeterministicResponse(_sign_alice, _sign_bob, _sign_analytic),
}


def _prob_outcome(p_plus, u, eta):
    """+1 with probability p_plus, -1 otherwise; 0 when u[..., 0] >= eta."""
    if np.any((p_plus < 0) | (p_plus > 1)):
        raise ValueError("response probability outside [0, 1]")
    out = np.where(u[..., 1] < p_plus, 1, -1).astype(np.int8)
    return np.where(u[..., 0] < eta, out, 0).astype(np.int8)


def _shvm_cos_alice(a, lam, u, params, p):
    return _prob_outcome(0.5 * (1.0 + np.cos(p * (a - lam))), u, params.get("eta", 1.0))


def _shvm_cos_bob(b, lam, u, params, p):
    return _prob_outcome(0.5 * (1.0 - np.cos(p * (b - lam))), u, params.get("eta", 1.0))


def _shvm_cos_analytic(a, b, params, p):
    return -params.get("eta", 1.0) ** 2 * math.cos(p * (a - b)) / 2.0


def _shvm_const_alice(a, lam, u, params, p):
    return _prob_outcome(np.full(np.shape(lam), params.get("p1", 0.5)), u, params.get("eta", 1.0))


def _shvm_const_bob(b, lam, u, params, p):
    return _prob_outcome(np.full(np.shape(lam), params.get("p2", 0.5)), u, params.get("eta", 1.0))


def _shvm_const_analytic(a, b, params, p):
    eta = params.get("eta", 1.0)
    return eta**2 * (2 * params.get("p1", 0.5) - 1) * (2 * params.get("p2", 0.5) - 1)


SHVM_RESPONSES: dict[str, StochasticResponse] = {
    "cosine": StochasticResponse(_shvm_cos_alice, _shvm_cos_bob, 2, _shvm_cos_analytic),
    "constant": StochasticResponse(_shvm_const_alice, _shvm_const_bob, 2, _shvm_const_analytic),
}


def _bell71_sign_alice(a, lam, u, params, p):
    out = _sign(np.cos(p * (lam - a)))
    return np.where(u[..., 0] < params.get("eta", 1.0), out, 0).astype(np.int8)


def _bell71_sign_bob(b, lam, u, params, p):
    out = -_sign(np.cos(p * (lam - b)))
    return np.where(u[..., 0] < params.get("eta", 1.0), out, 0).astype(np.int8)


def _bell71_sign_analytic(a, b, params, p):
    # emitted-pair normalization: each average is eta * sign(...)
    return params.get("eta", 1.0) ** 2 * sign_model_correlation(a - b, p)


BELL71_RESPONSES: dict[str, StochasticResponse] = {
    "sign_eta": StochasticResponse(_bell71_sign_alice, _bell71_sign_bob, 1, _bell71_sign_analytic),
    "cosine_eta": StochasticResponse(_shvm_cos_alice, _shvm_cos_bob, 2, _shvm_cos_analytic),
}

EVENT_RESPONSES = ("time_delay",)

DEFAULT_RESPONSE = {
    "lrhvm": "sign",
    "shvm": "cosine",
    "bell71": "sign_eta",
    "contextual_event": "time_delay",
}


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Hidden-variable model: family, response, source and instrument choices.

    ``window_ns``, ``delay_T0_ns`` and ``delay_exponent_d`` apply to the
    event model only; ``params`` carries response-specific constants such as
    the detection efficiency ``eta``.
    """

    family: str
    response: str | None = None
    source: str = "uniform_angle"
    instrument: str = "uniform"
    periodicity: int = 1
    params: dict = field(default_factory=dict)
    window_ns: int | None = None
    delay_T0_ns: float = 100_000.0
    delay_exponent_d: float = 2.0
    setting_dependent_source: bool = False
    source_concentration: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.response is None:
            object.__setattr__(self, "response", DEFAULT_RESPONSE[self.family])
        known = {
            "lrhvm": LRHVM_RESPONSES,
            "shvm": SHVM_RESPONSES,
            "bell71": BELL71_RESPONSES,
            "contextual_event": EVENT_RESPONSES,
        }[self.family]
        if self.response not in known:
            raise ValueError(f"unknown {self.family} response {self.response!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.periodicity not in (1, 2):
            raise ValueError("periodicity must be 1 or 2")
        eta = self.params.get("eta", 1.0)
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.family == "contextual_event":
            if self.window_ns is None or self.window_ns <= 0:
                raise ValueError("contextual_event needs a positive window_ns")
            if self.delay_T0_ns <= 0 or self.delay_exponent_d < 0:
                raise ValueError("delay_T0_ns must be positive and delay_exponent_d non-negative")
        if self.source_concentration < 0:
            raise ValueError("source_concentration must be non-negative")
        if self.source_concentration > 0 and not self.setting_dependent_source:
            raise ValueError("source_concentration requires setting_dependent_source")
        object.__setattr__(self, "params", dict(self.params))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = dict(sorted(v.items())) if isinstance(v, dict) else v
        return out


def _uniform_angle(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, TWO_PI, n)


SOURCES: dict[str, Callable] = {"uniform_angle": _uniform_angle}


@dataclass(eq=False)
class RunResult:
    """Per-setting-pair outcome streams of one simulated experiment."""

    family: str
    settings: Settings
    n: int
    config: ModelConfig
    seed: Seed
    streams: dict[str, tuple[OutcomeSeries, OutcomeSeries]]
    spreadsheet: np.ndarray | None = None

    def counts(self, key: str) -> CountTable:
        if self.family == "contextual_event":
            raise ValueError("event-model streams are unpaired; pair them with contextlab.pairing first")
        a, b = self.streams[key]
        return CountTable.from_pairs(a.outcomes, b.outcomes)

    def correlation(self, key: str, count_zero: bool = False) -> CorrelationEstimate:
        return correlation_from_counts(self.counts(key), count_zero=count_zero)

    def correlation_set(self, count_zero: bool = False) -> CorrelationSet:
        est = [self.correlation(k, count_zero) for k in PAIR_KEYS]
        return CorrelationSet(*(e.value for e in est), stderrs=tuple(e.std_error for e in est))

    def identical_to(self, other: "RunResult") -> bool:
        same_sheet = (self.spreadsheet is None and other.spreadsheet is None) or (
            self.spreadsheet is not None
            and other.spreadsheet is not None
            and np.array_equal(self.spreadsheet, other.spreadsheet)
        )
        return (
            self.family == other.family
            and self.settings == other.settings
            and self.n == other.n
            and self.seed == other.seed
            and self.config.to_dict() == other.config.to_dict()
            and all(self.streams[k] == other.streams[k] for k in PAIR_KEYS)
            and same_sheet
        )


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")


def _check_codomain(x: np.ndarray, allowed, what: str) -> np.ndarray:
    if not np.isin(x, allowed).all():
        raise ValueError(f"{what} response produced values outside {set(allowed)}")
    return x.astype(np.int8)


def _family(cfg: ModelConfig, expected: str) -> None:
    if cfg.family != expected:
        raise ValueError(f"config family {cfg.family!r} used with the {expected} generator")


def _series(outcomes, tag: str, setting: float, timestamps=None) -> OutcomeSeries:
    return OutcomeSeries(outcomes, timestamps, setting_label=f"{tag}={setting!r}")


# -- LRHVM -------------------------------------------------------------------

def run_lrhvm(cfg: ModelConfig, settings: Settings, n: int, seed) -> RunResult:
    """Four experiments with fresh source samples, plus a counterfactual spreadsheet.

    The spreadsheet evaluates all four responses on a single lam per row,
    columns (A(a), A(a'), B(b), B(b')).
    """
    _family(cfg, "lrhvm")
    _check_n(n)
    seed = as_seed(seed)
    resp = LRHVM_RESPONSES[cfg.response]
    source = SOURCES[cfg.source]
    p = cfg.periodicity
    streams = {}
    for key in PAIR_KEYS:
        x, y = settings.pair(key)
        lam = source(seed.substream(f"lrhvm/{key}/source").generator(), n)
        A = _check_codomain(resp.alice(x, lam, cfg.params, p), (-1, 1), "lrhvm")
        B = _check_codomain(resp.bob(y, lam, cfg.params, p), (-1, 1), "lrhvm")
        streams[key] = (_series(A, "a", x), _series(B, "b", y))
    lam = source(seed.substream("lrhvm/spreadsheet/source").generator(), n)
    sheet = np.column_stack([
        _check_codomain(resp.alice(settings.a, lam, cfg.params, p), (-1, 1), "lrhvm"),
        _check_codomain(resp.alice(settings.ap, lam, cfg.params, p), (-1, 1), "lrhvm"),
        _check_codomain(resp.bob(settings.b, lam, cfg.params, p), (-1, 1), "lrhvm"),
        _check_codomain(resp.bob(settings.bp, lam, cfg.params, p), (-1, 1), "lrhvm"),
    ])
    return RunResult("lrhvm", settings, n, cfg, seed, streams, sheet)


# -- SHVM and Bell71 ---------------------------------------------------------

def _stochastic_pair(cfg, resp, x, y, n, seed: Seed, family: str, key: str):
    lam = SOURCES[cfg.source](seed.substream(f"{family}/{key}/source").generator(), n)
    ua = seed.substream(f"{family}/{key}/local_a").generator().random((n, resp.n_uniforms))
    ub = seed.substream(f"{family}/{key}/local_b").generator().random((n, resp.n_uniforms))
    A = _check_codomain(resp.alice(x, lam, ua, cfg.params, cfg.periodicity), (-1, 0, 1), family)
    B = _check_codomain(resp.bob(y, lam, ub, cfg.params, cfg.periodicity), (-1, 0, 1), family)
    return A, B


def _run_stochastic(cfg, settings, n, seed, family, registry) -> RunResult:
    _family(cfg, family)
    _check_n(n)
    seed = as_seed(seed)
    resp = registry[cfg.response]
    streams = {}
    for key in PAIR_KEYS:
        x, y = settings.pair(key)
        A, B = _stochastic_pair(cfg, resp, x, y, n, seed, family, key)
        streams[key] = (_series(A, "a", x), _series(B, "b", y))
    return RunResult(family, settings, n, cfg, seed, streams)


def run_shvm(cfg: ModelConfig, settings: Settings, n: int, seed) -> RunResult:
    """Outcomes drawn independently on each side for a shared lam."""
    return _run_stochastic(cfg, settings, n, seed, "shvm", SHVM_RESPONSES)


def run_bell71(cfg: ModelConfig, settings: Settings, n: int, seed) -> RunResult:
    """Outcomes in {-1, 0, +1} from lam and fresh per-side instrument variables."""
    return _run_stochastic(cfg, settings, n, seed, "bell71", BELL71_RESPONSES)


class ProtocolEstimate(NamedTuple):
    correlations: dict[str, float]
    n_lambda: int
    repeats: int
    realizable: bool


def impossible_protocol(cfg: ModelConfig, settings: Settings, n_lambda: int, repeats: int, seed) -> ProtocolEstimate:
    """Diagnostic: estimate E(a, b) by repeating local measurements on a frozen lam.

    For every frozen lam, each side is measured ``repeats`` times to estimate
    its local average; the two averages are multiplied and the products
    averaged over lam.  A real coincidence experiment cannot re-measure the
    same pair, so the result is labelled as not realizable.
    """
    if cfg.family not in ("shvm", "bell71"):
        raise ValueError("the repeated-measurement protocol applies to shvm and bell71 only")
    if n_lambda < 1 or repeats < 1:
        raise ValueError("n_lambda and repeats must be positive")
    seed = as_seed(seed)
    resp = (SHVM_RESPONSES if cfg.family == "shvm" else BELL71_RESPONSES)[cfg.response]
    out = {}
    for key in PAIR_KEYS:
        x, y = settings.pair(key)
        lam = SOURCES[cfg.source](seed.substream(f"repeat/{key}/source").generator(), n_lambda)
        ua = seed.substream(f"repeat/{key}/a").generator().random((n_lambda, repeats, resp.n_uniforms))
        ub = seed.substream(f"repeat/{key}/b").generator().random((n_lambda, repeats, resp.n_uniforms))
        A = resp.alice(x, lam[:, None], ua, cfg.params, cfg.periodicity).mean(axis=1)
        B = resp.bob(y, lam[:, None], ub, cfg.params, cfg.periodicity).mean(axis=1)
        out[key] = float(np.mean(A * B))
    return ProtocolEstimate(out, n_lambda, repeats, False)


def analytic_correlation(cfg: ModelConfig, a: float, b: float) -> float | None:
    """Closed-form E(a, b) of a built-in response, None when unknown."""
    if cfg.family == "lrhvm":
        fn = LRHVM_RESPONSES[cfg.response].analytic
    elif cfg.family == "shvm":
        fn = SHVM_RESPONSES[cfg.response].analytic
    elif cfg.family == "bell71":
        fn = BELL71_RESPONSES[cfg.response].analytic
    else:
        return None
    return None if fn is None else float(fn(a, b, cfg.params, cfg.periodicity))


def shvm_cosine_detection_probs(settings: Settings, periodicity: int = 1) -> DetectionProbs:
    """CH probabilities of the cosine SHVM at eta = 1, a +1 outcome counting as detection.

    P1 = P2 = 1/2 and P12(x, y) = (1 - cos(p (x - y)) / 2) / 4.
    """
    def p12(x, y):
        return (1.0 - math.cos(periodicity * (x - y)) / 2.0) / 4.0

    s = settings
    return DetectionProbs(p12(s.a, s.b), p12(s.a, s.bp), p12(s.ap, s.b), p12(s.ap, s.bp), 0.5, 0.5)


# -- event-based contextual model ---------------------------------------------

def event_pulse_period_ns(cfg: ModelConfig) -> int:
    """Spacing of emissions such that clicks of different trials never coincide."""
    return int(math.ceil(cfg.delay_T0_ns)) + int(cfg.window_ns) + 2


def _event_side(setting, signal, r, cfg):
    p = cfg.periodicity
    phase = p * (signal - setting)
    outcome = _sign(np.cos(phase))
    delay = r * cfg.delay_T0_ns * np.abs(np.sin(phase)) ** cfg.delay_exponent_d
    return outcome, np.rint(delay).astype(np.int64)


def run_contextual_event(cfg: ModelConfig, settings: Settings, n: int, seed) -> RunResult:
    """Time-stamped click streams of the event-based local model.

    Per trial the source emits lam1 = phi and lam2 = phi + pi/p.  Station A
    holds an instrument variable r_x drawn from the stream of the current
    setting pair and computes, from (lam1, r_x) alone, the outcome
    sign(cos p(lam1 - a)) and the delay r_x T0 |sin p(lam1 - a)|^d; B does the
    same with (lam2, r_y).  Nothing is paired here.
    """
    _family(cfg, "contextual_event")
    _check_n(n)
    seed = as_seed(seed)
    period = event_pulse_period_ns(cfg)
    emit = np.arange(n, dtype=np.int64) * period
    streams = {}
    for key in PAIR_KEYS:
        x, y = settings.pair(key)
        src = seed.substream(f"event/{key}/source").generator()
        if cfg.setting_dependent_source and cfg.source_concentration > 0:
            # opt-in: source distribution depends on the setting pair
            phi = src.vonmises(0.5 * (x + y), cfg.source_concentration, n) % TWO_PI
        else:
            phi = SOURCES[cfg.source](src, n)
        r_x = seed.substream(f"event/{key}/instrument_x").generator().random(n)
        r_y = seed.substream(f"event/{key}/instrument_y").generator().random(n)
        A, ta = _event_side(x, phi, r_x, cfg)
        B, tb = _event_side(y, phi + math.pi / cfg.periodicity, r_y, cfg)
        streams[key] = (_series(A, "a", x, emit + ta), _series(B, "b", y, emit + tb))
    return RunResult("contextual_event", settings, n, cfg, seed, streams)


RUNNERS = {
    "lrhvm": run_lrhvm,
    "shvm": run_shvm,
    "bell71": run_bell71,
    "contextual_event": run_contextual_event,
}


def run_model(cfg: ModelConfig, settings: Settings, n: int, seed) -> RunResult:
    return RUNNERS[cfg.family](cfg, settings, n, seed)


def marginal_plus(series: OutcomeSeries) -> tuple[float, float]:
    """Frequency of +1 among detected outcomes and its binomial standard error."""
    det = series.outcomes[series.outcomes != 0]
    if det.size == 0:
        raise ValueError("no detected outcomes")
    f = float(np.mean(det == 1))
    return f, math.sqrt(f * (1 - f) / det.size)


def no_signalling_z(run: RunResult) -> dict[str, float]:
    """z-scores of each side's +1 frequency across the remote setting.

    Keys ``A@a``, ``A@a'`` compare Alice under b vs b'; ``B@b``, ``B@b'``
    compare Bob under a vs a'.
    """
    def z(s1, s2):
        f1, e1 = marginal_plus(s1)
        f2, e2 = marginal_plus(s2)
        se = math.hypot(e1, e2)
        return 0.0 if se == 0 else (f1 - f2) / se

    st = run.streams
    return {
        "A@a": z(st["ab"][0], st["abp"][0]),
        "A@a'": z(st["apb"][0], st["apbp"][0]),
        "B@b": z(st["ab"][1], st["apb"][1]),
        "B@b'": z(st["abp"][1], st["apbp"][1]),
    }
