import csv
import json
import math

import pytest

from contextlab.experiments import (
    KINDS,
    ConfigError,
    ExperimentConfig,
    bundled_configs,
    execute,
    load_config,
    parse_real,
    run_experiment,
)
from contextlab.fileio import dumps_report


def _ini(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_real():
    assert parse_real("3*pi/4") == pytest.approx(3 * math.pi / 4)
    assert parse_real("-pi") == -math.pi
    assert parse_real("1e-3") == 0.001
    for bad in ("__import__('os')", "pi**2", "x", ""):
        with pytest.raises(ValueError):
            parse_real(bad)


def test_bundled_configs_cover_every_kind():
    kinds = {load_config(p).kind for p in bundled_configs().values()}
    assert kinds == set(KINDS)


@pytest.mark.parametrize("text, msg", [
    ("[experiment]\nkind = urn\nn = 10\ncolour = red\n", "unknown \\[experiment\\] key"),
    ("[experiment]\nkind = urn\nn = 10\n[urn]\nn_blu = 2\n", "unknown urn parameter"),
    ("[experiment]\nkind = urn\nn = 10\n[bertrand]\nmethods = random_center\n", "unexpected section"),
    ("[experiment]\nkind = dice\nn = 10\n", "unknown experiment kind"),
    ("[experiment]\nn = 10\n", "needs a kind"),
    ("[urn]\nn_blue = 2\n", "missing \\[experiment\\]"),
    ("[experiment]\nkind = urn\nn = ten\n", "not an integer"),
    ("[experiment]\nkind = urn\nn = 0\n", "at least 1"),
    ("[experiment]\nkind = urn\nn = 10\nn = 11\n", "cfg.ini"),
    ("[experiment]\nkind = quantum\nn = 10\n[quantum]\nsettings = 0, pi/2, foo\n", "quantum.settings"),
])
def test_strict_config_errors(tmp_path, text, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(_ini(tmp_path, text))


def test_config_defaults_and_out(tmp_path):
    cfg = load_config(_ini(tmp_path, "[experiment]\nkind = urn\nn = 100\nout = results\n", "demo.ini"))
    assert cfg.name == "demo" and cfg.params == {"n_blue": 2, "n_other": 1, "draws": 2}
    assert cfg.out == str(tmp_path / "results")


def test_echo_roundtrip_reproduces_report():
    cfg = load_config(bundled_configs()["urn_demo"])
    report, _ = execute(cfg)
    again, _ = execute(ExperimentConfig.from_dict(json.loads(dumps_report(report))["config"]))
    assert dumps_report(again) == dumps_report(report)


def test_overrides_change_seed():
    cfg = load_config(bundled_configs()["coin_device"]).with_overrides(seed=99, n=1000)
    assert cfg.seed == 99 and cfg.n == 1000
    assert execute(cfg)[0]["seed"] == {"value": 99, "stream_id": 0}


def test_singlet_chsh_report():
    report, tables = execute(load_config(bundled_configs()["singlet_chsh"]))
    r = report["results"]
    assert r["analytic"]["max_abs_S"] == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    mc = r["monte_carlo"]
    assert abs(mc["max_abs"] - 2 * math.sqrt(2)) < 4 * mc["combined_stderr"]
    assert all(abs(p["z"]) < 4 for p in r["pairs"].values())
    cols, rows = tables["E_delta"]
    assert cols == ("delta_rad", "E_analytic", "E_estimate", "stderr") and len(rows) == 9


def test_bertrand_all_report():
    m = execute(load_config(bundled_configs()["bertrand_all"]))[0]["results"]["methods"]
    for key, target in (("random_center", 0.25), ("parallel_chords", 0.5), ("random_endpoints", 1 / 3)):
        assert m[key]["estimate"] == pytest.approx(target, abs=0.005)


def test_pairing_demo_report():
    r = execute(load_config(bundled_configs()["pairing_demo"]))[0]["results"]
    assert r["shift_1"]["correlation"] == -1.0 and r["shift_2"]["correlation"] == 1.0
    assert all(abs(x["correlation"]) < r["random_bound"] == 0.04 for x in r["random"])
    assert r["event_window_delta0"]["same_sign_probability"] < 0.05


def test_run_experiment_writes_files(tmp_path):
    paths = run_experiment(load_config(bundled_configs()["shvm_cosine"]), tmp_path)
    assert paths["report"].name == "shvm_cosine.json"
    with paths["E_delta"].open() as fh:
        assert next(csv.reader(fh)) == ["delta_rad", "E_analytic", "E_estimate", "stderr"]
    rep = json.loads(paths["report"].read_text())
    assert {"artifact_version", "config", "seed", "results"} <= set(rep)


def test_event_report_has_window_scan_table(tmp_path):
    cfg = load_config(bundled_configs()["contextual_event"]).with_overrides(n=20_000)
    report, tables = execute(cfg)
    assert tables["S_window"][0] == ("window_ns", "S_max_abs", "stderr", "coincidence_fraction")
    assert report["results"]["model"]["setting_dependent_source"] is False
