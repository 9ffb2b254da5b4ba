import json
import os
import re
import subprocess
import sys

import numpy as np
import pytest
from sklearn.base import clone

from simgap import io as sio
from simgap.cli import main
from simgap.domain import BoundedScalar, Dataset, Empirical1D, ScenarioRecord, Simplex
from simgap.estimators import PairwiseComparator, SimToRealCalibrator
from simgap.exceptions import DatasetInvalid, SchemaError
from simgap.synthetic import GeneratorConfig, generate


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs))
    return str(path)


def bounded_file(tmp_path, m=30, seed=0, second=False):
    rng = np.random.default_rng(seed)
    objs = []
    for i in range(m):
        p = rng.uniform(-0.5, 0.5)
        o = {"scenario_id": f"s{i}", "family": "bounded", "n": 200, "k": 100, "p_hat": p,
             "q_hat": p + rng.normal(0, 0.05)}
        if second:
            o["q_hat_2"] = p + 0.4
        objs.append(o)
    return write_lines(tmp_path / "data.jsonl", objs)


def test_counts_imply_sample_size(tmp_path):
    f = write_lines(tmp_path / "a.jsonl", [{"scenario_id": "a", "family": "multinomial", "gt_counts": [45, 30, 25],
                                            "q_hat": [0.3, 0.3, 0.4], "k": 50}])
    rec = sio.ingest(f).records[0]
    assert rec.n == 100 and rec.p_hat == Simplex((0.45, 0.30, 0.25))


def test_schema_errors_carry_line_numbers(tmp_path):
    good = {"scenario_id": "a", "family": "bounded", "p_hat": 0.1, "n": 5, "q_hat": 0.2, "k": 5}
    f = write_lines(tmp_path / "b.jsonl", [good, {k: v for k, v in good.items() if k != "k"}])
    with pytest.raises(SchemaError, match="line 2"):
        sio.ingest(f)
    with pytest.raises(SchemaError):
        sio.parse_record({**good, "extra": 1})
    with pytest.raises(SchemaError):
        sio.parse_record({**good, "gt_samples": [0.1, 0.2], "n": 3})
    with pytest.raises(SchemaError):
        sio.parse_record({**good, "family": "multinomial", "p_hat": [0.5, 0.6], "q_hat": [0.5, 0.5]})


def test_mixed_families_rejected(tmp_path):
    f = write_lines(tmp_path / "c.jsonl", [
        {"scenario_id": "a", "family": "bernoulli", "p_hat": 0.3, "n": 5, "q_hat": 0.2, "k": 5},
        {"scenario_id": "b", "family": "multinomial", "p_hat": [0.3, 0.7], "n": 5, "q_hat": [0.2, 0.8], "k": 5},
    ])
    with pytest.raises(DatasetInvalid) as err:
        sio.ingest(f)
    assert any("family" in str(x) for x in err.value.findings)


def test_renormalisation_window():
    rec, _ = sio.parse_record({"scenario_id": "a", "family": "multinomial", "p_hat": [0.2, 0.3, 0.5 + 5e-7],
                               "n": 5, "q_hat": [0.2, 0.3, 0.5], "k": 5})
    assert abs(sum(rec.p_hat.probs) - 1) < 1e-12
    with pytest.raises(SchemaError):
        sio.parse_record({"scenario_id": "a", "family": "multinomial", "p_hat": [0.2, 0.3, 0.51], "n": 5,
                          "q_hat": [0.2, 0.3, 0.5], "k": 5})


@pytest.mark.parametrize("family", ["bounded", "bernoulli", "multinomial", "empirical1d"])
def test_dataset_round_trip(tmp_path, family):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        cfg = GeneratorConfig(family=family, d=4, m_calibration=15, m_holdout=150, k=20, n_law=[10, 30])
    data, _ = generate(cfg, 0, second_simulator={"tilt": 0.9} if family != "bounded" and family != "empirical1d"
                       else {"shift": 0.2})
    path = tmp_path / "d.jsonl"
    sio.write_dataset(data, path)
    back = sio.ingest(path)
    assert back == data
    assert sio.dumps_dataset(back) == path.read_text()


def test_fmt():
    assert sio.fmt(True) == "true" and sio.fmt(np.bool_(False)) == "false"
    assert float(sio.fmt(0.1 + 0.2)) == 0.1 + 0.2
    assert sio.fmt(3) == "3"


def _strip_timestamp(text):
    obj = json.loads(text)
    obj["metadata"].pop("timestamp")
    obj["run_config"].pop("out")
    return obj


def test_calibrate_outputs(tmp_path):
    f = bounded_file(tmp_path, m=60)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["calibrate", f, "--out", str(out1)], environ={}) == 0
    assert main(["calibrate", f, "--out", str(out2)], environ={}) == 0
    for name in ("curve.csv", "calibrated_curve.csv", "summary.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    r1, r2 = (_strip_timestamp((o / "report.json").read_text()) for o in (out1, out2))
    assert r1 == r2
    assert len((out1 / "curve.csv").read_text().splitlines()) == 100
    # every number in the summary comes verbatim from the report
    report_text = (out1 / "report.json").read_text()
    for num in re.findall(r"-?\d+\.\d+(?:e-?\d+)?", (out1 / "summary.txt").read_text()):
        assert num in report_text
    assert r1["params"]["m"] == 60 and "dataset_sha256" in r1["metadata"]


def test_compare_band_and_new_scenario(tmp_path):
    f = bounded_file(tmp_path, m=40, second=True)
    assert main(["compare", f, "--out", str(tmp_path / "cmp"), "--alpha-grid", "0.2,0.5"], environ={}) == 0
    rows = (tmp_path / "cmp" / "dominance.csv").read_text().splitlines()
    assert rows[0] == "alpha,threshold,raw,clamped,vacuous,certified,strict,tie" and len(rows) == 3
    assert main(["band", f, "--out", str(tmp_path / "band"), "--taus", "0.2,0.8"], environ={}) == 0
    assert len((tmp_path / "band" / "band.csv").read_text().splitlines()) == 3
    assert main(["new-scenario", f, "--out", str(tmp_path / "new"), "--q-hat", "0.1", "--alpha", "0.5"],
                environ={}) == 0
    rep = json.loads((tmp_path / "new" / "report.json").read_text())
    lo, hi = rep["new_scenario"]["interval"]
    assert lo <= 0.1 <= hi


def test_config_precedence(tmp_path):
    f = bounded_file(tmp_path, m=20)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gamma": 0.3, "eta": 0.1}))

    def gamma_eta(args, env):
        out = tmp_path / f"p{len(os.listdir(tmp_path))}"
        assert main(["calibrate", f, "--config", str(cfg), "--out", str(out)] + args, environ=env) == 0
        p = json.loads((out / "report.json").read_text())["params"]
        return p["gamma"], p["eta"]

    assert gamma_eta([], {}) == (0.3, 0.1)
    assert gamma_eta([], {"SIMGAP_GAMMA": "0.4"}) == (0.4, 0.1)
    assert gamma_eta(["--gamma", "0.6"], {"SIMGAP_GAMMA": "0.4"}) == (0.6, 0.1)


def test_exit_codes(tmp_path, capsys):
    f = bounded_file(tmp_path, m=5)
    assert main(["calibrate", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "x")], environ={}) == 4
    bad = write_lines(tmp_path / "bad.jsonl", [{"scenario_id": "a", "family": "bounded"}])
    assert main(["calibrate", bad, "--out", str(tmp_path / "x")], environ={}) == 2
    assert main(["calibrate", f, "--out", str(tmp_path / "x"), "--gamma", "1.5"], environ={}) == 2
    assert main(["calibrate", f, "--out", str(tmp_path / "x")], environ={"SIMGAP_BOGUS": "1"}) == 2
    kl = write_lines(tmp_path / "kl.jsonl", [{"scenario_id": "a", "family": "multinomial", "p_hat": [0.5, 0.3, 0.2],
                                              "n": 50, "q_hat": [0.0, 0.5, 0.5], "k": 50}])
    assert main(["calibrate", kl, "--out", str(tmp_path / "x"), "--loss", "kl"], environ={}) == 3
    assert "numerical" in capsys.readouterr().err


def test_simulate_subcommand(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"experiment": "coverage",
                               "generator": {"family": "bernoulli", "m_calibration": 20, "m_holdout": 200,
                                             "k": 30, "n_law": 60, "replications": 2},
                               "experiment_params": {"alpha_grid": [0.3]}}))
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(out)], environ={}) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["params"]["config"]["seed"] == 5
    assert (out / "coverage.csv").read_text().startswith("alpha,bound,")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "simgap", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "calibrate" in res.stdout


def test_estimators_follow_sklearn_conventions():
    est = SimToRealCalibrator(gamma=0.3, loss="squared")
    assert est.get_params()["gamma"] == 0.3
    assert clone(est).get_params() == est.get_params()
    recs = [ScenarioRecord(f"s{i}", BoundedScalar(0.1 * (i % 5)), 100, BoundedScalar(0.05 * (i % 7)), 100)
            for i in range(20)]
    est.fit(recs)
    assert est.transform(None).shape == (20, 3)
    assert np.array_equal(est.transform(recs[:3]), est.transform(None)[:3])
    assert est.cvar(0.5) >= est.auc() - 1e-12
    assert est.threshold(0.2) == est.calibrated(0.8)
    comp = clone(PairwiseComparator(alpha_grid=[0.1]))
    assert comp.get_params()["alpha_grid"] == [0.1]
    with pytest.raises(Exception):
        SimToRealCalibrator().auc()


def test_empirical_round_trip_keeps_sigma():
    rec = ScenarioRecord("w", Empirical1D((0.1, 0.2), 2.0), 2, Empirical1D((0.3,), 2.0), 1)
    back, fam = sio.parse_record(json.loads(json.dumps(sio.record_to_json(rec))))
    assert fam == "empirical1d" and back == rec
    assert sio.dataset_hash(Dataset((rec,))) == sio.dataset_hash(Dataset((back,)))
