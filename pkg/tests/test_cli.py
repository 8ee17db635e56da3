import csv
import json
import time
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from modalstab.cli import main
from modalstab.config import config_hash, load_config
from modalstab.reports import schemas, shipped

ROOT = Path(__file__).resolve().parents[1]

BBMB = {
    "model": {"kind": "BBMB", "basis": {"kind": "SineDirichlet1D", "modes": 16},
              "f": {"form": "Identity"}, "h": {"kind": "SingleMode", "k": 1, "amplitude": 0.1}},
    "controller": {"variant": "TrackState", "mu": 0.8, "N": 1},
    "integrator": {"dt": 0.005, "t_end": 5.0, "record_every": 10},
    "seed": 7,
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def with_(doc, **sections):
    out = json.loads(json.dumps(doc))
    for k, v in sections.items():
        out[k] = v
    return out


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def validate(doc, name):
    jsonschema.validate(doc, schemas()[name])


# ----------------------------------------------------------------------------
# certify


def test_certify_zero_forcing(tmp_path):
    doc = {"model": {"kind": "NSV2D", "basis": {"kind": "PeriodicZeroMean2DVector", "modes": 8},
                     "nu": 0.01, "alpha": 0.05},
           "controller": {"mu": 1.0, "N": 1}}
    assert run("certify", "--config", write(tmp_path, doc), "--out", tmp_path / "o") == 0
    cert = json.loads((tmp_path / "o" / "certificate.json").read_text())
    validate(cert, "certificate")
    assert cert["mu_min"] == 0.0 and cert["certified"]


def test_certify_ndwave_below_threshold_exits_2(tmp_path):
    doc = {"model": {"kind": "NDWave", "basis": {"kind": "SineDirichlet1D", "length": 10.0, "modes": 32},
                     "f": {"form": "CubicMinusLinear"}},
           "controller": {"variant": "SteadyState", "mu": 0.5, "N": 20, "target": {"kind": "Zero"}},
           "reference": None}
    assert run("certify", "--config", write(tmp_path, doc), "--out", tmp_path / "o") == 2
    cert = json.loads((tmp_path / "o" / "certificate.json").read_text())
    assert not cert["certified"]


@pytest.mark.parametrize("text", ["{", '{"model": {"kind": "Heat"}}', json.dumps(with_(BBMB, seed=-3))])
def test_bad_config_exits_1(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert run("certify", "--config", p, "--out", tmp_path / "o") == 1


def test_missing_config_exits_1(tmp_path):
    assert run("simulate", "--config", tmp_path / "missing.json", "--out", tmp_path) == 1


def test_bad_seed_override_exits_1(tmp_path):
    assert run("certify", "--config", write(tmp_path, BBMB), "--seed", -1, "--out", tmp_path) == 1


# ----------------------------------------------------------------------------
# simulate


def test_simulate_outputs(tmp_path):
    out = tmp_path / "o"
    assert run("simulate", "--config", write(tmp_path, BBMB), "--out", out) == 0
    for name in ("run.csv", "run.meta.json", "certificate.json", "verdict.json", "fit.csv",
                 "run_norms.png", "fit.png"):
        assert (out / name).exists(), name
    meta = json.loads((out / "run.meta.json").read_text())
    validate(meta, "run_meta")
    verdict = json.loads((out / "verdict.json").read_text())
    validate(verdict, "verdict")
    validate(json.loads((out / "certificate.json").read_text()), "certificate")
    assert verdict["verdict"] == "PASS"
    # the recorded config reproduces its hash
    cfg_path = write(tmp_path, meta["config"], "again.json")
    assert config_hash(load_config(cfg_path)) == meta["config_hash"]


def test_zero_gain_identical_data(tmp_path):
    doc = with_(BBMB, controller={"mu": 0.0, "N": 2}, initial_condition={"kind": "SingleMode", "k": 2},
                reference={"kind": "SingleMode", "k": 2}, integrator={"dt": 0.01, "t_end": 1.0})
    out = tmp_path / "o"
    assert run("simulate", "--config", write(tmp_path, doc), "--out", out) == 0
    rows = read_csv(out / "run.csv")
    zcols = [c for c in rows[0] if c.startswith("z_")]
    assert zcols and all(float(r[c]) == 0.0 for r in rows for c in zcols)
    assert json.loads((out / "verdict.json").read_text())["verdict"] == "NOT_APPLICABLE"


def test_seed_override_and_determinism(tmp_path):
    p = write(tmp_path, BBMB)
    for d in ("a", "b"):
        assert run("simulate", "--config", p, "--out", tmp_path / d) == 0
    assert run("simulate", "--config", p, "--seed", 8, "--out", tmp_path / "c") == 0
    a, b, c = ((tmp_path / d / "run.csv").read_text() for d in "abc")
    assert a == b and a != c
    meta = json.loads((tmp_path / "c" / "run.meta.json").read_text())
    assert meta["seed"] == 8 and meta["config"]["seed"] == 8


def test_blowup_exits_3(tmp_path):
    doc = {"model": {"kind": "KdVB", "basis": {"kind": "PeriodicZeroMean1D", "modes": 32}, "nu": 0.1,
                     "f": {"form": "Identity"}},
           "controller": {"mu": 0.0, "N": 0},
           "integrator": {"scheme": "RK4Reference", "dt": 0.01, "t_end": 1.0}}
    out = tmp_path / "o"
    assert run("simulate", "--config", write(tmp_path, doc), "--out", out) == 3
    info = json.loads((out / "blowup.json").read_text())
    assert info["step"] >= 1 and info["warnings"]
    assert np.all(np.isfinite(np.load(out / "blowup_state.npy")))


# ----------------------------------------------------------------------------
# sweep


def test_sweep_empty(tmp_path):
    out = tmp_path / "o"
    assert run("sweep", "--config", write(tmp_path, BBMB), "--axis", "controller.mu", "--values", "",
               "--out", out) == 0
    assert (out / "sweep.csv").read_text().strip() == "index,value,fitted_rate,r_squared,verdict,certified,error"


def test_sweep_bad_axis_exits_1(tmp_path):
    assert run("sweep", "--config", write(tmp_path, BBMB), "--axis", "controller.gain", "--values", "1",
               "--out", tmp_path) == 1


def test_sweep_rows_and_errors(tmp_path):
    out = tmp_path / "o"
    assert run("sweep", "--config", write(tmp_path, BBMB), "--axis", "controller.mu",
               "--values", "1.6,-1,0.8", "--workers", 2, "--out", out) == 0
    rows = read_csv(out / "sweep.csv")
    assert [float(r["value"]) for r in rows] == [1.6, -1.0, 0.8]
    assert rows[1]["error"].startswith("input") and rows[0]["error"] == "" == rows[2]["error"]
    assert (out / "sweep.png").exists() and (out / "run_000" / "run.csv").exists()


def test_gain_sweep_rates_increase_on_certified_tail(tmp_path):
    p = write(tmp_path, BBMB)
    run("certify", "--config", p, "--out", tmp_path / "c")
    mu_min = json.loads((tmp_path / "c" / "certificate.json").read_text())["mu_min"]
    out = tmp_path / "o"
    values = ",".join(repr(v) for v in (0.0, mu_min / 2, mu_min, 2 * mu_min))
    assert run("sweep", "--config", p, "--axis", "controller.mu", "--values", values, "--out", out) == 0
    rows = read_csv(out / "sweep.csv")
    assert [r["certified"] for r in rows] == ["False", "False", "True", "True"]
    tail = [float(r["fitted_rate"]) for r in rows[2:]]
    assert tail[1] >= tail[0]
    assert all(r["verdict"] == "PASS" for r in rows[2:])


def test_mode_sweep_passes_beyond_n_min(tmp_path):
    p = write(tmp_path, BBMB)
    assert run("certify", "--config", p, "--out", tmp_path / "c") == 0
    n_min = json.loads((tmp_path / "c" / "certificate.json").read_text())["N_min"]
    out = tmp_path / "o"
    assert run("sweep", "--config", p, "--axis", "controller.N", "--values", "0,1,2,4,8", "--out", out) == 0
    for r in read_csv(out / "sweep.csv"):
        if int(float(r["value"])) >= n_min:
            assert r["certified"] == "True" and r["verdict"] == "PASS"
        else:
            assert r["certified"] == "False" and r["verdict"] == "NOT_APPLICABLE"


# ----------------------------------------------------------------------------
# check-order


@pytest.mark.parametrize("scheme,dts,band", [("IMEX_CNAB2", "0.02,0.01,0.005", (1.8, 2.2)),
                                              ("RK4Reference", "0.2,0.1,0.05", (3.7, 4.3))])
def test_check_order(tmp_path, scheme, dts, band):
    doc = with_(BBMB, integrator={"dt": 0.005, "t_end": 2.0}, model={
        "kind": "BBMB", "basis": {"kind": "SineDirichlet1D", "modes": 8}, "f": {"form": "Identity"}})
    out = tmp_path / "o"
    assert run("check-order", "--config", write(tmp_path, doc), "--scheme", scheme, "--dts", dts,
               "--out", out) == 0
    doc = json.loads((out / "order.json").read_text())
    validate(doc, "order")
    assert doc["passed"] and band[0] <= doc["order"] <= band[1]


def test_check_order_bad_dts_exit_1(tmp_path):
    assert run("check-order", "--config", write(tmp_path, BBMB), "--dts", "0.01,0.02", "--out", tmp_path) == 1


# ----------------------------------------------------------------------------
# shipped files


def test_shipped_schemas_are_current():
    for name, doc in schemas().items():
        assert shipped(name) == json.loads(json.dumps(doc)), name


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.json")), ids=lambda p: p.stem)
def test_example_configs_validate(path):
    doc = json.loads(path.read_text())
    validate(doc, "experiment_config")
    load_config(path)


def test_smoke_config_is_fast(tmp_path):
    t0 = time.perf_counter()
    assert run("simulate", "--config", ROOT / "configs" / "bbmb.json", "--out", tmp_path) == 0
    assert time.perf_counter() - t0 < 60


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        run("--version")
    assert e.value.code == 0 and capsys.readouterr().out.strip()


def test_short_ndwave_horizon_is_not_applicable(tmp_path):
    cfg = json.loads((ROOT / "configs" / "ndwave.json").read_text())
    cfg["integrator"] = {"dt": 0.01, "t_end": 0.05}
    out = tmp_path / "o"
    assert run("simulate", "--config", write(tmp_path, cfg), "--out", out) == 0
    v = json.loads((out / "verdict.json").read_text())
    validate(v, "verdict")
    assert v["verdict"] in ("PASS", "FAIL", "NOT_APPLICABLE")


def test_forced_nsv_window_starts_after_absorption(tmp_path):
    doc = {"model": {"kind": "NSV2D", "basis": {"kind": "PeriodicZeroMean2DVector", "modes": 16}, "nu": 0.1,
                     "alpha": 0.3, "h": {"kind": "SingleMode", "k": 1, "amplitude": 0.05}},
           "controller": {"mu": 10.0, "N": 12}, "integrator": {"dt": 0.005, "t_end": 10.0, "record_every": 10},
           "seed": 2, "initial_condition": {"kind": "RandomSmooth", "amplitude": 3.0},
           "reference": {"kind": "RandomSmooth", "amplitude": 3.0}}
    out = tmp_path / "o"
    assert run("simulate", "--config", write(tmp_path, doc), "--out", out) == 0
    v = json.loads((out / "verdict.json").read_text())
    validate(v, "verdict")
    assert v["absorbing_entry"] > 2.0
    assert v["fit"]["window"][0] == v["absorbing_entry"]
    rows = read_csv(out / "run.csv")
    after = [max(float(r["u_energy"]), float(r["v_energy"])) for r in rows if float(r["t"]) >= v["absorbing_entry"]]
    assert max(after) <= v["absorbing_radius"]
    assert v["certified"] and v["verdict"] == "PASS"
