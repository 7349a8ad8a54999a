"""Config-driven experiment pipelines.

An experiment config is an INI file with an ``[experiment]`` section (kind,
name, n, seed, stream, out) and one section named after the kind holding
its parameters.  Unknown sections or keys are errors.  Every report echoes
the resolved config, minus the output directory, so a report can be re-run
from its own ``config`` field.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import completeness as ct
from . import inequalities as ineq
from . import models, pairing, probability, quantum
from .fileio import E_DELTA_COLUMNS, write_csv_table, write_report
from .stats import Seed, bernoulli_series, correlation_product

KINDS = (
    "bertrand", "urn", "coin_device", "quantum", "lrhvm", "shvm", "bell71",
    "contextual_event", "inequalities", "pairing", "completeness",
)
EXPERIMENT_KEYS = ("kind", "name", "n", "seed", "stream", "out")


class ConfigError(ValueError):
    pass


# -- value parsing -------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_real(text: str) -> float:
    """A float, or an arithmetic expression in numbers and ``pi`` such as ``3*pi/4``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"not a real number: {text!r}")

    if isinstance(text, (int, float)):
        return float(text)
    try:
        return ev(ast.parse(str(text).strip(), mode="eval"))
    except SyntaxError:
        raise ValueError(f"not a real number: {text!r}") from None


def _as_list(v, item: Callable):
    if isinstance(v, (list, tuple)):
        return [item(x) for x in v]
    v = str(v).strip()
    return [item(x.strip()) for x in v.split(",")] if v else []


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _as_int(v) -> int:
    if isinstance(v, bool):
        raise ValueError("boolean given where an integer is expected")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    s = str(v).strip().replace("_", "")
    try:
        return int(s)
    except ValueError:
        try:
            f = float(s)  # accepts 1e6
        except ValueError:
            raise ValueError(f"not an integer: {v!r}") from None
        if not f.is_integer():
            raise ValueError(f"not an integer: {v!r}") from None
        return int(f)


PARSERS = {
    "int": _as_int,
    "real": parse_real,
    "str": lambda v: str(v).strip(),
    "bool": _as_bool,
    "reals": lambda v: _as_list(v, parse_real),
    "strs": lambda v: _as_list(v, str),
    "ints": lambda v: _as_list(v, _as_int),
}

OPTIMAL = []  # empty settings list means the CHSH-optimal settings

SCHEMAS: dict[str, dict[str, tuple[str, object]]] = {
    "bertrand": {"methods": ("strs", [m.value for m in probability.ChordMethod])},
    "urn": {"n_blue": ("int", 2), "n_other": ("int", 1), "draws": ("int", 2)},
    "coin_device": {"coin_bias": ("real", 0.5), "device_shifts": ("reals", [-0.1, 0.0, 0.1])},
    "quantum": {
        "state": ("str", "singlet"), "visibility": ("real", 1.0), "r": ("real", 0.297),
        "settings": ("reals", OPTIMAL), "grid_points": ("int", 8), "grid_n": ("int", 0),
        "werner_visibilities": ("reals", [0.5, 1 / math.sqrt(2), 0.9, 1.0]),
    },
    "lrhvm": {"response": ("str", "sign"), "periodicity": ("int", 1), "settings": ("reals", OPTIMAL),
              "grid_points": ("int", 8), "grid_n": ("int", 0), "chsh_seeds": ("int", 0)},
    "shvm": {"response": ("str", "cosine"), "eta": ("real", 1.0), "periodicity": ("int", 1),
             "settings": ("reals", OPTIMAL), "grid_points": ("int", 8), "grid_n": ("int", 0)},
    "bell71": {"response": ("str", "sign_eta"), "eta": ("real", 1.0), "periodicity": ("int", 1),
               "settings": ("reals", OPTIMAL), "grid_points": ("int", 8), "grid_n": ("int", 0)},
    "contextual_event": {
        "periodicity": ("int", 1), "delay_t0_ns": ("real", 100_000.0), "delay_exponent_d": ("real", 2.0),
        "window_ns": ("int", 2000), "window_scan_ns": ("ints", [500, 1000, 2000, 5000, 10000, 30000]),
        "settings": ("reals", OPTIMAL),
        "setting_dependent_source": ("bool", False), "source_concentration": ("real", 0.0),
    },
    "inequalities": {"fuzz_tables": ("int", 1000), "fuzz_max_rows": ("int", 1000),
                     "jpd_triples": ("reals", [-0.5, -0.5, -0.5, -1 / 3, -1 / 3, -1 / 3])},
    "pairing": {"random_repeats": ("int", 1), "window_ns": ("int", 2000)},
    "completeness": {
        "p1": ("real", 0.4), "p2": ("real", 0.6), "blocks": ("int", 10),
        "purity_visibilities": ("reals", [0.9, 0.7]), "purity_n": ("int", 10_000),
        "calibration_seeds": ("int", 200), "calibration_n": ("int", 1000),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int
    seed: int = 0
    stream: int = 0
    name: str = ""
    params: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        schema = SCHEMAS[self.kind]
        unknown = sorted(set(self.params) - set(schema))
        if unknown:
            raise ConfigError(f"unknown {self.kind} parameter(s): {', '.join(unknown)}")
        resolved = {}
        for key, (typ, default) in schema.items():
            raw = self.params.get(key, default)
            try:
                resolved[key] = PARSERS[typ](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{self.kind}.{key}: {exc}") from None
        object.__setattr__(self, "params", resolved)
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def seed_obj(self) -> Seed:
        return Seed(self.seed, self.stream)

    def to_dict(self) -> dict:
        """Resolved config, without the output directory."""
        return {"kind": self.kind, "name": self.name, "n": self.n, "seed": self.seed,
                "stream": self.stream, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict, out: str | None = None) -> "ExperimentConfig":
        unknown = sorted(set(d) - {"kind", "name", "n", "seed", "stream", "params", "out"})
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(kind=d["kind"], n=_as_int(d["n"]), seed=_as_int(d.get("seed", 0)),
                       stream=_as_int(d.get("stream", 0)), name=d.get("name", ""),
                       params=dict(d.get("params", {})), out=out if out is not None else d.get("out"))
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc.args[0]!r}") from None

    def with_overrides(self, seed=None, n=None, out=None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if n is not None:
            d["n"] = n
        return ExperimentConfig.from_dict(d, out=out if out is not None else self.out)


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment config strictly."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "experiment" not in cp:
        raise ConfigError(f"{path}: missing [experiment] section")
    exp = dict(cp["experiment"])
    unknown = sorted(set(exp) - set(EXPERIMENT_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown [experiment] key(s): {', '.join(unknown)}")
    kind = exp.get("kind")
    if kind is None:
        raise ConfigError(f"{path}: [experiment] needs a kind")
    extra = sorted(set(cp.sections()) - {"experiment", kind})
    if extra:
        raise ConfigError(f"{path}: unexpected section(s) {', '.join(extra)} for kind {kind!r}")
    params = dict(cp[kind]) if kind in cp else {}
    try:
        n = _as_int(exp.get("n", "0"))
        seed = _as_int(exp.get("seed", "0"))
        stream = _as_int(exp.get("stream", "0"))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = exp.get("out")
    if out is not None and not Path(out).is_absolute():
        out = str(path.parent / out)
    return ExperimentConfig(kind, n, seed, stream, exp.get("name") or path.stem, params, out)


BUNDLED_DIR = Path(__file__).parent / "configs"


def bundled_configs() -> dict[str, Path]:
    return {p.stem: p for p in sorted(BUNDLED_DIR.glob("*.ini"))}


# -- pipelines ---------------------------------------------------------------

def _settings(values, periodicity: int = 1) -> models.Settings:
    if not values:
        return models.Settings.chsh_optimal(periodicity)
    if len(values) != 4:
        raise ConfigError("settings needs four angles a, ap, b, bp")
    return models.Settings(*values)


def _grid(points: int) -> np.ndarray:
    if points < 2:
        raise ConfigError("grid_points must be at least 2")
    return np.linspace(0.0, math.pi, points)


def _pair_z(estimate, analytic) -> float:
    if estimate.std_error == 0:
        return 0.0 if estimate.value == analytic else math.inf
    return (estimate.value - analytic) / estimate.std_error


def _frac(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def _bertrand(cfg, seed):
    out = {}
    for m in cfg.params["methods"]:
        r = probability.bertrand_estimate(m, cfg.n, seed)
        se = math.sqrt(r.analytic * (1 - r.analytic) / r.n)
        out[probability.ChordMethod.parse(m).value] = {
            "estimate": r.estimate, "analytic": r.analytic, "n": r.n, "stderr": se,
            "abs_error": abs(r.estimate - r.analytic),
        }
    return {"methods": out}, {}


def _urn(cfg, seed):
    p = cfg.params
    out = {}
    for repl in (True, False):
        proto = probability.UrnProtocol(p["n_blue"], p["n_other"], p["draws"], repl)
        dist = probability.urn_distribution(proto)
        counts = probability.simulate_urn(proto, cfg.n, seed.substream(f"urn/{repl}"))
        bins = {}
        for k, q in dist.items():
            c = counts.get(k, 0)
            se = math.sqrt(float(q) * (1 - float(q)) / cfg.n)
            bins[str(k)] = {"exact": _frac(q), "probability": float(q), "frequency": c / cfg.n,
                            "z": 0.0 if se == 0 else (c / cfg.n - float(q)) / se}
        out["with_replacement" if repl else "without_replacement"] = {
            "distribution": bins, "total": _frac(sum(dist.values())),
        }
    return out, {}


def _coin(cfg, seed):
    p = cfg.params
    runs = []
    for shift in p["device_shifts"]:
        dev = probability.CoinDevice(p["coin_bias"], shift)
        est = probability.coin_device_run(dev, cfg.n, seed)
        runs.append({"device_shift": shift, "probability": dev.probability, **est.to_dict()})
    return {"coin_bias": p["coin_bias"], "runs": runs}, {}


def _chsh_block(c: ineq.CorrelationSet) -> dict:
    d = c.to_dict()
    del d["stderrs"]
    return d


def _quantum(cfg, seed):
    p = cfg.params
    state = quantum.make_state(p["state"], p["visibility"], p["r"])
    st = _settings(p["settings"], state.periodicity)
    analytic = quantum.chsh_quantum(state, st.a, st.ap, st.b, st.bp)
    stats = []
    pairs = {}
    for key, e_an in zip(ineq.PAIR_KEYS, analytic.correlations):
        x, y = st.pair(key)
        sa, sb = quantum.sample_pairs(state, x, y, cfg.n, seed.substream(f"quantum/{key}"))
        est = correlation_product(sa, sb)
        stats.append(est)
        pairs[key] = {"E_analytic": e_an, "E_estimate": est.value, "stderr": est.std_error,
                      "z": _pair_z(est, e_an)}
    mc = ineq.CorrelationSet(*(e.value for e in stats), stderrs=tuple(e.std_error for e in stats))
    werner = []
    for v in p["werner_visibilities"]:
        w = quantum.chsh_quantum(quantum.werner(v, state.periodicity), st.a, st.ap, st.b, st.bp)
        werner.append({"visibility": v, "max_abs_S": w.max_abs, "exceeds_2": w.max_abs > 2 + ineq.ANALYTIC_TOL})
    rows = []
    grid_n = p["grid_n"] or cfg.n
    for i, d in enumerate(_grid(p["grid_points"])):
        sa, sb = quantum.sample_pairs(state, 0.0, d, grid_n, seed.substream(f"quantum/grid/{i}"))
        est = correlation_product(sa, sb)
        rows.append((float(d), quantum.correlation(state, 0.0, d), est.value, est.std_error))
    report = {
        "state": p["state"], "periodicity": state.periodicity, "settings": st.to_dict(),
        "analytic": {"S": analytic.S, "max_abs_S": analytic.max_abs, "max_orientation": analytic.max_orientation,
                     "tsirelson": 2 * math.sqrt(2)},
        "pairs": pairs, "monte_carlo": _chsh_block(mc), "werner": werner,
    }
    return report, {"E_delta": (E_DELTA_COLUMNS, rows)}


def _model_cfg(cfg) -> models.ModelConfig:
    p = cfg.params
    params = {"eta": p["eta"]} if "eta" in p else {}
    return models.ModelConfig(cfg.kind, p["response"], periodicity=p["periodicity"], params=params)


def _hv_model(cfg, seed):
    p = cfg.params
    mc = _model_cfg(cfg)
    st = _settings(p["settings"], mc.periodicity)
    run = models.run_model(mc, st, cfg.n, seed)
    # undetected outcomes count as zero products: emitted-pair normalization
    count_zero = cfg.kind in ("shvm", "bell71")
    cs = run.correlation_set(count_zero)
    pairs = {}
    for key, e, se in zip(ineq.PAIR_KEYS, cs.values, cs.stderrs):
        a = models.analytic_correlation(mc, *st.pair(key))
        pairs[key] = {"E_analytic": a, "E_estimate": e, "stderr": se,
                      "z": 0.0 if se == 0 else (e - a) / se}
    analytic = ineq.chsh_s(ineq.CorrelationSet(*(pairs[k]["E_analytic"] for k in ineq.PAIR_KEYS)))
    report = {
        "model": mc.to_dict(), "settings": st.to_dict(),
        "normalization": "emitted_pairs" if count_zero else "detected_pairs", "pairs": pairs,
        "analytic": analytic.to_dict(), "monte_carlo": _chsh_block(cs),
        "no_signalling_z": models.no_signalling_z(run),
    }
    if run.spreadsheet is not None:
        sheet = run.spreadsheet.astype(np.int64)
        means = [float(np.mean(sheet[:, i] * sheet[:, j])) for i, j in ((0, 2), (0, 3), (1, 2), (1, 3))]
        max_abs, key = ineq.chsh_max_abs(*means)
        report["spreadsheet"] = {"rows": int(sheet.shape[0]), "S_n": ineq.spreadsheet_chsh(run.spreadsheet),
                                 "max_abs_S_n": max_abs, "max_orientation": key}
    if cfg.kind == "lrhvm" and p["chsh_seeds"]:
        worst = -math.inf
        for k in range(p["chsh_seeds"]):
            r = ineq.chsh_s(models.run_model(mc, st, cfg.n, seed.substream(f"chsh_seed/{k}")).correlation_set())
            worst = max(worst, r.sigma_excess)
        report["seed_sweep"] = {"seeds": p["chsh_seeds"], "max_sigma_excess": worst}
    rows = []
    grid_n = p["grid_n"] or cfg.n
    for i, d in enumerate(_grid(p["grid_points"])):
        gr = models.run_model(mc, models.Settings(0.0, 0.0, float(d), float(d)), grid_n, seed.substream(f"grid/{i}"))
        est = gr.correlation("ab", count_zero)
        rows.append((float(d), models.analytic_correlation(mc, 0.0, float(d)), est.value, est.std_error))
    return report, {"E_delta": (E_DELTA_COLUMNS, rows)}


def _event_cfg(p, window: int) -> models.ModelConfig:
    return models.ModelConfig(
        "contextual_event", periodicity=p["periodicity"], window_ns=window,
        delay_T0_ns=p["delay_t0_ns"], delay_exponent_d=p["delay_exponent_d"],
        setting_dependent_source=p["setting_dependent_source"], source_concentration=p["source_concentration"],
    )


def event_chsh(run: models.RunResult, window: int) -> dict:
    cs, tables = pairing.paired_correlation_set(run, pairing.CoincidenceWindow(window))
    coinc = {k: t.n_pairs for k, t in tables.items()}
    return {"window_ns": window, **_chsh_block(cs), "coincidences": coinc,
            "coincidence_fraction": min(coinc.values()) / run.n}


def _event(cfg, seed):
    p = cfg.params
    windows = sorted(set(p["window_scan_ns"]) | {p["window_ns"]})
    # emission spacing sized for the widest window so every scan uses the same streams
    mc = _event_cfg(p, max(windows))
    st = _settings(p["settings"], mc.periodicity)
    run = models.run_contextual_event(mc, st, cfg.n, seed)
    main = event_chsh(run, p["window_ns"])
    scan = [event_chsh(run, w) for w in windows]
    ns = models.no_signalling_z(run)
    report = {
        "model": _event_cfg(p, p["window_ns"]).to_dict(), "settings": st.to_dict(),
        "normalization": "detected_pairs", "chsh": main, "no_signalling_z": ns,
        "no_signalling_ok": all(abs(z) < 5 for z in ns.values()),
        "window_scan": [{"window_ns": s["window_ns"], "max_abs": s["max_abs"], "combined_stderr": s["combined_stderr"],
                         "coincidence_fraction": s["coincidence_fraction"]} for s in scan],
    }
    rows = [(s["window_ns"], s["max_abs"], s["combined_stderr"], s["coincidence_fraction"]) for s in scan]
    return report, {"S_window": (("window_ns", "S_max_abs", "stderr", "coincidence_fraction"), rows)}


def _inequalities(cfg, seed):
    p = cfg.params
    sing = quantum.singlet()
    ang = (0.0, math.pi / 3, 2 * math.pi / 3)
    qa = quantum.correlation(sing, ang[0], ang[1]), quantum.correlation(sing, ang[0], ang[2]), \
        quantum.correlation(sing, ang[1], ang[2])
    la = tuple(models.sign_model_correlation(y - x) for x, y in ((ang[0], ang[1]), (ang[0], ang[2]), (ang[1], ang[2])))
    bq = ineq.bell64_check(*qa)
    bl = ineq.bell64_check(*la)
    q = quantum.chsh_quantum(sing, *quantum.chsh_optimal_settings(1))
    rng = seed.substream("inequalities/fuzz").generator()
    worst = 0
    for _ in range(p["fuzz_tables"]):
        rows = int(rng.integers(1, p["fuzz_max_rows"] + 1))
        t = rng.choice(np.array([-1, 1], dtype=np.int8), size=(rows, 4))
        worst = max(worst, abs(ineq.spreadsheet_chsh(t)))
    trip = p["jpd_triples"]
    if len(trip) % 3:
        raise ConfigError("jpd_triples needs a multiple of three values")
    jpd = []
    for i in range(0, len(trip), 3):
        tm = ineq.TripleMoments(*trip[i:i + 3])
        res = ineq.jpd_feasible(tm)
        entry = {"e12": tm.e12, "e13": tm.e13, "e23": tm.e23, "feasible": res.feasible,
                 "boole": all(ok for _, ok in ineq.boole_triples(tm))}
        if res.witness is not None:
            entry["witness"] = {",".join(f"{v:+d}" for v in s): _frac(w) for s, w in res.witness.items()}
        jpd.append(entry)
    ch_settings = (0.0, 3 * math.pi / 2, 3 * math.pi / 4, math.pi / 4)
    chq = ineq.ch_check(quantum.detection_probs(sing, *ch_settings))
    chs = ineq.ch_check(models.shvm_cosine_detection_probs(models.Settings(*ch_settings)))
    report = {
        "bell64": {
            "angles": list(ang),
            "quantum": {"correlations": list(qa), **bq._asdict()},
            "lrhvm_sign": {"correlations": list(la), **bl._asdict()},
        },
        "chsh_singlet": q._asdict(),
        "spreadsheet_fuzz": {"tables": p["fuzz_tables"], "max_rows": p["fuzz_max_rows"], "max_abs_S_n": worst,
                             "all_within_bound": worst <= 2},
        "jpd": jpd,
        "ch": {"settings": list(ch_settings), "quantum": chq.to_dict(), "shvm_cosine": chs.to_dict()},
    }
    return report, {}


def _pairing(cfg, seed):
    p = cfg.params
    s1, s2 = pairing.periodic_streams(cfg.n)
    out = {}
    for k in (1, 2):
        proto = pairing.Shift(k)
        t = pairing.estimate_gjpd(s1, s2, pairing.pair_streams(s1, s2, proto), proto)
        out[f"shift_{k}"] = {"correlation": t.correlation().value, "n_pairs": t.n_pairs}
    rnd = []
    for r in range(p["random_repeats"]):
        proto = pairing.RandomPairing(seed.substream(f"pairing/random/{r}"))
        t = pairing.estimate_gjpd(s1, s2, pairing.pair_streams(s1, s2, proto), proto)
        fz = pairing.factorization_test(t)
        rnd.append({"correlation": t.correlation().value, "n_pairs": t.n_pairs,
                    "factorizes": fz.factorizes, "max_z": fz.max_z})
    out["random"] = rnd
    out["random_bound"] = 4 / math.sqrt(cfg.n)
    # the same event-model streams paired by a coincidence window, at delta = 0
    ev = models.ModelConfig("contextual_event", window_ns=p["window_ns"])
    run = models.run_contextual_event(ev, models.Settings(0.0, 0.0, 0.0, 0.0), cfg.n, seed)
    sa, sb = run.streams["ab"]
    proto = pairing.CoincidenceWindow(p["window_ns"])
    pairs = pairing.pair_streams(sa, sb, proto)
    t = pairing.estimate_gjpd(sa, sb, pairs, proto)
    prob = t.probabilities()
    fz = pairing.factorization_test(t)
    out["event_window_delta0"] = {
        "joint": t.to_dict(), "same_sign_probability": prob[(1, 1)] + prob[(-1, -1)],
        "factorizes": fz.factorizes, "max_cell_deviation": fz.max_cell_deviation,
        "singles": list(pairing.singles(sa, sb, pairs)),
    }
    return out, {}


def _completeness(cfg, seed):
    p = cfg.params
    fs = ct.fine_structure_pair(cfg.n, seed)
    naive, diag = ct.inhomogeneity_demo(max(cfg.n, 2 * p["blocks"]), p["p1"], p["p2"], seed, p["blocks"])
    v1, v2 = p["purity_visibilities"][:2] if len(p["purity_visibilities"]) >= 2 else (0.9, 0.7)
    st = models.Settings.chsh_optimal(1)
    streams = {}
    for tag, v in (("t1", v1), ("t2", v2)):
        state = quantum.werner(v)
        streams[tag] = {key: quantum.sample_pairs(state, *st.pair(key), p["purity_n"], seed.substream(f"purity/{tag}/{key}"))
                        for key in ineq.PAIR_KEYS}
    purity = ct.purity_test(streams, list(ineq.PAIR_KEYS))
    cal = {}
    if p["calibration_seeds"]:
        m = p["calibration_n"]
        base = seed.substream("calibration")
        cal["runs"] = ct.calibrate(lambda s: ct.runs_test(_iid(s, m)), p["calibration_seeds"], base)._asdict()
        cal["block_homogeneity"] = ct.calibrate(
            lambda s: ct.block_homogeneity(_iid(s, m), ct.SplitSpec("blocks", p["blocks"], min_block=1)),
            p["calibration_seeds"], base)._asdict()
    report = {
        "fine_structure": {
            "n": cfg.n, "final_frequency": list(fs.final_frequency),
            "runs_alternating": fs.runs_alternating.to_dict(), "runs_shuffled": fs.runs_shuffled.to_dict(),
        },
        "inhomogeneity": {"p1": p["p1"], "p2": p["p2"], "naive": naive.to_dict(), "diagnosis": diag.to_dict()},
        "purity": {"visibilities": [v1, v2], "n_per_setting": p["purity_n"], **purity.to_dict()},
        "calibration": cal,
    }
    return report, {}


def _iid(seed: Seed, n: int):
    return bernoulli_series(0.5, n, seed)


PIPELINES = {
    "bertrand": _bertrand, "urn": _urn, "coin_device": _coin, "quantum": _quantum,
    "lrhvm": _hv_model, "shvm": _hv_model, "bell71": _hv_model, "contextual_event": _event,
    "inequalities": _inequalities, "pairing": _pairing, "completeness": _completeness,
}


def execute(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Run a pipeline; returns the report and ``{table name: (columns, rows)}``."""
    seed = cfg.seed_obj
    try:
        results, tables = PIPELINES[cfg.kind](cfg, seed.substream(f"experiment/{cfg.kind}"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ValueError(f"{cfg.name} ({cfg.kind}): {exc}") from exc
    report = {"artifact_version": __version__, "config": cfg.to_dict(), "seed": seed.to_dict(), "results": results}
    return report, tables


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> dict[str, Path]:
    """Execute and write ``<name>.json`` plus ``<name>_<table>.csv`` into the output directory."""
    report, tables = execute(cfg)
    target = Path(out if out is not None else (cfg.out or "."))
    paths = {"report": write_report(target / f"{cfg.name}.json", report)}
    for tname, (cols, rows) in tables.items():
        paths[tname] = write_csv_table(target / f"{cfg.name}_{tname}.csv", cols, rows)
    return paths
