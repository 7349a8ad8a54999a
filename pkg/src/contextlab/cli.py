"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or config, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import completeness as ct
from . import inequalities as ineq
from . import models, pairing, probability, quantum
from .experiments import ConfigError, bundled_configs, execute, load_config, parse_real, run_experiment
from .fileio import ClickStreamError, dumps_report, parse_click_stream, write_click_stream, write_report
from .stats import OutcomeSeries, as_seed, correlation_product

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


def _emit(result: dict, out: str | None) -> None:
    if out:
        write_report(out, result)
    else:
        sys.stdout.write(dumps_report(result))


def _angles(values) -> list[float]:
    return [parse_real(v) for v in values]


def cmd_bertrand(args) -> dict:
    methods = [args.method] if args.method else [m.value for m in probability.ChordMethod]
    out = {}
    for m in methods:
        r = probability.bertrand_estimate(m, args.n, args.seed)
        out[probability.ChordMethod.parse(m).value] = r._asdict()
    return {"bertrand": out, "n": args.n, "seed": args.seed}


def cmd_urn(args) -> dict:
    proto = probability.UrnProtocol(args.blue, args.other, args.draws, not args.without_replacement)
    dist = probability.urn_distribution(proto)
    counts = probability.simulate_urn(proto, args.n, args.seed)
    return {
        "protocol": {"n_blue": args.blue, "n_other": args.other, "draws": args.draws,
                     "replacement": proto.replacement},
        "distribution": {str(k): f"{q.numerator}/{q.denominator}" for k, q in dist.items()},
        "frequencies": {str(k): c / args.n for k, c in counts.items()},
    }


def _model_settings(args, periodicity: int) -> models.Settings:
    if args.settings:
        if len(args.settings) != 4:
            raise ValueError("--settings takes four angles: a a' b b'")
        return models.Settings(*_angles(args.settings))
    return models.Settings.chsh_optimal(periodicity)


def cmd_simulate(args) -> dict:
    if args.model == "quantum":
        state = quantum.make_state(args.state, args.visibility)
        st = _model_settings(args, state.periodicity)
        est = []
        for key in ineq.PAIR_KEYS:
            sa, sb = quantum.sample_pairs(state, *st.pair(key), args.n, as_seed(args.seed).substream(f"quantum/{key}"))
            est.append(correlation_product(sa, sb))
        cs = ineq.CorrelationSet(*(e.value for e in est), stderrs=tuple(e.std_error for e in est))
        out = {"model": "quantum", "state": args.state, "settings": st.to_dict()}
    else:
        params = {"eta": args.eta} if args.eta is not None else {}
        cfg = models.ModelConfig(args.model, args.response, periodicity=args.periodicity, params=params,
                                 window_ns=args.window_ns if args.model == "contextual_event" else None,
                                 delay_T0_ns=args.t0_ns, delay_exponent_d=args.d)
        st = _model_settings(args, cfg.periodicity)
        run = models.run_model(cfg, st, args.n, args.seed)
        if cfg.family == "contextual_event":
            cs, tables = pairing.paired_correlation_set(run, pairing.CoincidenceWindow(args.window_ns))
            if args.clicks:
                sa, sb = run.streams[args.clicks_pair]
                write_click_stream(args.clicks, sa, sb)
        else:
            cs = run.correlation_set()
        out = {"model": cfg.to_dict(), "settings": st.to_dict(), "no_signalling_z": models.no_signalling_z(run)}
    r = ineq.chsh_s(cs)
    out["correlations"] = dict(zip(ineq.PAIR_KEYS, cs.values))
    out["stderrs"] = dict(zip(ineq.PAIR_KEYS, cs.stderrs))
    out["chsh"] = r.to_dict()
    out["n"] = args.n
    out["seed"] = args.seed
    return out


def _protocol(args):
    if args.protocol == "shift":
        return pairing.Shift(args.k)
    if args.protocol == "random":
        return pairing.RandomPairing(args.seed)
    return pairing.CoincidenceWindow(args.width_ns)


def cmd_pair(args) -> dict:
    sa, sb = parse_click_stream(args.clicks)
    proto = _protocol(args)
    pairs = pairing.pair_streams(sa, sb, proto)
    t = pairing.estimate_gjpd(sa, sb, pairs, proto)
    out = {"table": t.to_dict(), "singles": list(pairing.singles(sa, sb, pairs))}
    if t.n_pairs:
        out["correlation"] = t.correlation().to_dict()
    if t.n_pairs >= 100:
        out["factorization"] = pairing.factorization_test(t)._asdict()
    return out


def cmd_inequality(args) -> dict:
    v = _angles(args.values)
    if args.which == "chsh":
        if len(v) not in (4, 8):
            raise ValueError("chsh takes four correlations, optionally followed by four standard errors")
        cs = ineq.correlation_set_from_values(v[:4], v[4:] or None)
        return {"chsh": ineq.chsh_s(cs).to_dict()}
    if args.which == "bell64":
        if len(v) != 3:
            raise ValueError("bell64 takes E(a,b) E(a,c) E(b,c)")
        return {"bell64": ineq.bell64_check(*v)._asdict()}
    if len(v) != 6:
        raise ValueError("ch takes P12(a,b) P12(a,b') P12(a',b) P12(a',b') P1(a') P2(b)")
    return {"ch": ineq.ch_check(ineq.DetectionProbs(*v)).to_dict()}


def cmd_spreadsheet(args) -> dict:
    table = ineq.read_spreadsheet_csv(args.path)
    s = ineq.spreadsheet_chsh(table)
    return {"rows": int(table.shape[0]), "S_n": s, "bound_satisfied": abs(s) <= 2}


def cmd_jpd(args) -> dict:
    v = _angles(args.values)
    if len(v) not in (3, 6):
        raise ValueError("jpd takes e12 e13 e23, optionally followed by m1 m2 m3")
    t = ineq.TripleMoments(*v[:3], *v[3:])
    res = ineq.jpd_feasible(t)
    out = {"feasible": res.feasible, "boole": dict(ineq.boole_triples(t))}
    if res.witness is not None:
        out["witness"] = {",".join(f"{x:+d}" for x in s): f"{w.numerator}/{w.denominator}"
                          for s, w in res.witness.items()}
    return out


def _side(args) -> OutcomeSeries:
    sa, sb = parse_click_stream(args.clicks)
    return sa if args.side == "A" else sb


def _reals(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


def cmd_test(args) -> dict:
    if args.which == "runs":
        s = ct.alternating_series(args.alternating) if args.alternating else _side(args)
        return ct.runs_test(s, args.alpha, args.method).to_dict()
    if args.which == "blocks":
        return ct.block_homogeneity(_side(args), ct.SplitSpec("blocks", args.blocks), args.alpha).to_dict()
    if args.which == "ks":
        return ct.ks_two_sample(_reals(args.x), _reals(args.y), args.alpha).to_dict()
    naive, diag = ct.inhomogeneity_demo(args.n, args.p1, args.p2, args.seed, args.blocks, args.alpha)
    return {"naive": naive.to_dict(), "diagnosis": diag.to_dict()}


def cmd_run(args) -> dict:
    configs = bundled_configs()
    path = Path(args.config)
    if not path.exists() and args.config in configs:
        path = configs[args.config]
    cfg = load_config(path).with_overrides(seed=args.seed, n=args.n)
    if args.out:
        paths = run_experiment(cfg, args.out)
        return {"written": {k: str(p) for k, p in paths.items()}}
    if cfg.out:
        paths = run_experiment(cfg)
        return {"written": {k: str(p) for k, p in paths.items()}}
    report, _ = execute(cfg)
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contextlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, n=100_000, out=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n", type=int, default=n)
        if out:
            p.add_argument("--out", help="write the JSON result here instead of stdout")
        return p

    p = common(sub.add_parser("bertrand", help="random-chord probabilities"), n=1_000_000)
    p.add_argument("--method", choices=[m.value for m in probability.ChordMethod])
    p.set_defaults(func=cmd_bertrand)

    p = common(sub.add_parser("urn", help="exact and simulated urn draws"))
    p.add_argument("--blue", type=int, default=2)
    p.add_argument("--other", type=int, default=1)
    p.add_argument("--draws", type=int, default=2)
    p.add_argument("--without-replacement", action="store_true")
    p.set_defaults(func=cmd_urn)

    p = common(sub.add_parser("simulate", help="simulate a CHSH experiment"))
    p.add_argument("--model", choices=("quantum",) + models.FAMILIES, default="quantum")
    p.add_argument("--state", choices=quantum.STATE_KINDS, default="singlet")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--response")
    p.add_argument("--eta", type=float)
    p.add_argument("--periodicity", type=int, default=1)
    p.add_argument("--settings", nargs="+", metavar="ANGLE", help="a a' b b' (expressions like pi/4 allowed)")
    p.add_argument("--window-ns", type=int, default=2000)
    p.add_argument("--t0-ns", type=float, default=100_000.0)
    p.add_argument("--d", type=float, default=2.0, help="delay exponent of the event model")
    p.add_argument("--clicks", help="event model: write the click streams of one setting pair to this CSV")
    p.add_argument("--clicks-pair", choices=ineq.PAIR_KEYS, default="ab")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("pair", help="pair a click-stream file and estimate its joint table"))
    p.add_argument("clicks")
    p.add_argument("--protocol", choices=("shift", "random", "window"), default="window")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--width-ns", type=int, default=2000)
    p.set_defaults(func=cmd_pair)

    p = common(sub.add_parser("inequality", help="evaluate CHSH, Bell-64 or CH on given numbers"))
    p.add_argument("which", choices=("chsh", "bell64", "ch"))
    p.add_argument("values", nargs="+")
    p.set_defaults(func=cmd_inequality)

    p = common(sub.add_parser("spreadsheet", help="S_n of an A,Ap,B,Bp spreadsheet CSV"))
    p.add_argument("path")
    p.set_defaults(func=cmd_spreadsheet)

    p = common(sub.add_parser("jpd", help="joint-distribution feasibility of three +-1 variables"))
    p.add_argument("values", nargs="+", help="e12 e13 e23 [m1 m2 m3]")
    p.set_defaults(func=cmd_jpd)

    p = common(sub.add_parser("test", help="completeness tests"), n=10_000)
    p.add_argument("which", choices=("runs", "blocks", "ks", "inhomogeneity"))
    p.add_argument("--clicks", help="click-stream CSV (runs, blocks)")
    p.add_argument("--side", choices=("A", "B"), default="A")
    p.add_argument("--alternating", type=int, help="runs: test an alternating series of this length")
    p.add_argument("--method", choices=("auto", "exact", "normal"), default="auto")
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--x", help="ks: file of reals, one per line")
    p.add_argument("--y", help="ks: file of reals, one per line")
    p.add_argument("--p1", type=float, default=0.4)
    p.add_argument("--p2", type=float, default=0.6)
    p.add_argument("--alpha", type=float, default=ct.DEFAULT_ALPHA)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("run", help="run an experiment config (a path or a bundled config name)")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--out", help="output directory for the report and CSV tables")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "test" and args.which in ("runs", "blocks") and not (args.clicks or args.alternating):
            raise ValueError(f"test {args.which} needs --clicks" + (" or --alternating" if args.which == "runs" else ""))
        if args.command == "test" and args.which == "ks" and not (args.x and args.y):
            raise ValueError("test ks needs --x and --y")
        result = args.func(args)
        out = getattr(args, "out", None) if args.command != "run" else None
        _emit(result, out)
    except (ConfigError, ClickStreamError, ValueError, IndexError, FileNotFoundError) as exc:
        print(f"contextlab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failures, including invariant violations
        print(f"contextlab: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
