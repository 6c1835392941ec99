"""Command-line interface: exit codes, output layout, determinism.

Everything runs in-process through cli.main so exit codes come back
directly; one subprocess test proves the installed console script wiring.
"""

import csv
import json
import os
import subprocess
import sys

import pytest

from schwarzscope.cli import main

from conftest import data_path


def _read_json(tmp, name):
    with open(os.path.join(tmp, name)) as fh:
        return json.load(fh)


def _read_csv(tmp, name):
    with open(os.path.join(tmp, name)) as fh:
        return list(csv.reader(fh))


def _write_map(tmp, name, doc):
    path = os.path.join(str(tmp), name)
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path


## ------------------------------------------------------------- exit code 0


def test_parse_summary(tmp_path):
    out = str(tmp_path)
    rc = main(["parse", "--map", data_path("logistic.json"), "--out", out])
    assert rc == 0
    doc = _read_json(out, "parse_summary.json")
    assert doc["domain"] == [0.0, 1.0]
    assert doc["params"] == {"a": 4.0}
    assert doc["smoothness_class"] >= 3
    assert doc["self_map"] is True
    assert len(doc["critical_points"]) == 1
    assert doc["critical_points"][0]["x"] == 0.5
    assert doc["critical_points"][0]["order"] == 2


def test_json_output_is_sorted_and_newline_terminated(tmp_path):
    out = str(tmp_path)
    assert main(["parse", "--map", data_path("logistic.json"),
                 "--out", out]) == 0
    raw = open(os.path.join(out, "parse_summary.json")).read()
    assert raw.endswith("\n")
    assert raw == json.dumps(json.loads(raw), indent=2, sort_keys=True) + "\n"


def test_schwarzian_value(tmp_path):
    out = str(tmp_path)
    rc = main(["schwarzian", "--map", data_path("logistic.json"),
               "--x", "0.3", "--k", "1", "--out", out])
    assert rc == 0
    doc = _read_json(out, "schwarzian_summary.json")
    assert doc["value"] == pytest.approx(-37.5, rel=1e-12)
    assert doc["orbit_clear"] is True


def test_convexity_verdict(tmp_path):
    out = str(tmp_path)
    rc = main(["convexity", "--map", data_path("logistic.json"),
               "--k", "1", "--grid", "512", "--out", out])
    assert rc == 0
    assert _read_json(out, "convexity_summary.json")["verdict"] == "pass"


def test_certify_and_verify_round_trip(tmp_path):
    out = str(tmp_path)
    rc = main(["certify", "--map", data_path("logistic.json"),
               "--kmax", "1", "--out", out])
    assert rc == 0
    cert_path = os.path.join(out, "certify_result.json")
    doc = _read_json(out, "certify_result.json")
    assert doc["order_bound"] == 1
    assert doc["rigor"] == "interval"

    rc = main(["verify", "--map", data_path("logistic.json"),
               "--certificate", cert_path, "--out", out])
    assert rc == 0
    assert _read_json(out, "verify_result.json")["valid"] is True

    ## tampering must flip the verdict and the exit code
    doc["bounds"][0]["T"] = -1e-9
    with open(cert_path, "w") as fh:
        json.dump(doc, fh)
    rc = main(["verify", "--map", data_path("logistic.json"),
               "--certificate", cert_path, "--out", out])
    assert rc == 2
    assert _read_json(out, "verify_result.json")["valid"] is False


def test_certify_with_partition_file(tmp_path):
    out = str(tmp_path)
    rc = main(["certify", "--map", data_path("tan_family.json"),
               "--partition", data_path("tan_partition.json"),
               "--kmax", "4", "--refine", "--out", out])
    assert rc == 0
    doc = _read_json(out, "certify_result.json")
    assert doc["order_bound"] == 2
    assert len(doc["partition"]) - 1 == len(doc["bounds"])


def test_orbits_inventory(tmp_path):
    out = str(tmp_path)
    m = _write_map(tmp_path, "lg32.json", {
        "domain": [0.0, 1.0],
        "pieces": [{"on": [0.0, 1.0], "expr": "a*x*(1 - x)"}],
        "params": {"a": 3.2}})
    rc = main(["orbits", "--map", m, "--pmax", "2", "--out", out])
    assert rc == 0
    doc = _read_json(out, "orbits_summary.json")
    classes = sorted(o["classification"] for o in doc["orbits"])
    assert classes == ["attracting", "repelling", "repelling"]


def test_census_clean_map(tmp_path):
    out = str(tmp_path)
    m = _write_map(tmp_path, "lg32.json", {
        "domain": [0.0, 1.0],
        "pieces": [{"on": [0.0, 1.0], "expr": "a*x*(1 - x)"}],
        "params": {"a": 3.2}})
    rc = main(["census", "--map", m, "--pmax", "4", "--out", out])
    assert rc == 0
    doc = _read_json(out, "census_summary.json")
    assert doc["violations"] == []
    assert doc["attracting_count"] == 1
    assert doc["bound"] == 3


def test_measure_dn_outputs(tmp_path):
    out = str(tmp_path)
    rc = main(["measure", "dn", "--map", data_path("logistic.json"),
               "--N", "50", "--out", out])
    assert rc == 0
    rows = _read_csv(out, "measure_dn.csv")
    assert rows[0] == ["n", "D_n", "log_D_n"]
    assert len(rows) == 51
    assert float(rows[1][1]) == pytest.approx(4.0, rel=1e-12)
    doc = _read_json(out, "measure_dn_summary.json")
    assert doc["growth"]["kind"] == "exponential"
    assert doc["summability"]["verdict"] == "convergent"


def test_measure_acip_outputs(tmp_path):
    out = str(tmp_path)
    rc = main(["measure", "acip", "--map", data_path("logistic.json"),
               "--bins", "128", "--out", out])
    assert rc == 0
    rows = _read_csv(out, "measure_acip.csv")
    assert rows[0] == ["bin_lo", "bin_hi", "weight", "density"]
    assert len(rows) == 129
    total = sum(float(r[2]) for r in rows[1:])
    assert total == pytest.approx(1.0, abs=1e-9)


def test_neuro_sweep_csv(tmp_path):
    out = str(tmp_path)
    rc = main(["neuro", "sweep", "--steps", "10", "--out", out])
    assert rc == 0
    rows = _read_csv(out, "neuro_sweep.csv")
    assert rows[0] == ["delta", "c", "alpha", "critical_value", "regime"]
    assert len(rows) == 11
    assert all(r[4] in ("diffeo", "unimodal") for r in rows[1:])


def test_neuro_landmarks(tmp_path):
    out = str(tmp_path)
    rc = main(["neuro", "landmarks", "--out", out])
    assert rc == 0
    doc = _read_json(out, "neuro_landmarks_summary.json")
    assert doc["delta0"] == pytest.approx(0.5417690386827279, abs=1e-9)
    assert doc["delta0"] < doc["delta_n"] < doc["delta_b"]


def test_neuro_misiurewicz_default_bracket(tmp_path):
    out = str(tmp_path)
    rc = main(["neuro", "misiurewicz", "--m", "3", "--out", out])
    assert rc == 0
    doc = _read_json(out, "neuro_misiurewicz_result.json")
    assert doc["ok"] is True
    assert doc["delta_star"] == pytest.approx(0.599480459427786, abs=1e-11)


def test_plot_data_series(tmp_path):
    out = str(tmp_path)
    rc = main(["plot-data", "--map", data_path("logistic.json"),
               "--k", "1", "--grid", "256", "--out", out])
    assert rc == 0
    rows = _read_csv(out, "plot_data.csv")
    assert rows[0] == ["span", "x", "g"]
    gs = [float(r[2]) for r in rows[1:]]
    assert gs and all(g > 0.0 for g in gs)


## --------------------------------------------------------- exit codes 1/2/3


def test_missing_map_file_is_input_error(tmp_path):
    out = str(tmp_path)
    rc = main(["parse", "--map", os.path.join(out, "nope.json"),
               "--out", out])
    assert rc == 1
    err = _read_json(out, "parse_error.json")
    assert err["command"] == "parse"
    assert err["error"]


def test_bad_expression_is_input_error(tmp_path):
    out = str(tmp_path)
    m = _write_map(tmp_path, "bad.json", {
        "domain": [0.0, 1.0],
        "pieces": [{"on": [0.0, 1.0], "expr": "2 ** x"}]})
    assert main(["parse", "--map", m, "--out", out]) == 1
    assert os.path.exists(os.path.join(out, "parse_error.json"))


def test_bad_partition_file_is_input_error(tmp_path):
    out = str(tmp_path)
    bad = os.path.join(out, "part.json")
    with open(bad, "w") as fh:
        json.dump({"cells": [0, 1]}, fh)
    rc = main(["certify", "--map", data_path("tan_family.json"),
               "--partition", bad, "--out", out])
    assert rc == 1


def test_threads_validation(tmp_path):
    out = str(tmp_path)
    rc = main(["parse", "--map", data_path("logistic.json"),
               "--out", out, "--threads", "0"])
    assert rc == 1


def test_certify_refusal_is_exit_2(tmp_path):
    ## The literal stock partition cannot certify the tangent family at
    ## k <= 2; without refinement that is a refusal, not an error.
    out = str(tmp_path)
    rc = main(["certify", "--map", data_path("tan_family.json"),
               "--partition", data_path("tan_partition.json"),
               "--kmax", "2", "--out", out])
    assert rc == 2
    doc = _read_json(out, "certify_result.json")
    assert "no k <= 2" in doc["reason"]


def test_misiurewicz_refusal_is_exit_2(tmp_path):
    out = str(tmp_path)
    rc = main(["neuro", "misiurewicz", "--m", "3",
               "--bracket", "0.50", "0.61", "--out", out])
    assert rc == 2
    doc = _read_json(out, "neuro_misiurewicz_result.json")
    assert doc["ok"] is False
    assert "not inside" in doc["reason"]


def test_census_violation_is_exit_3(tmp_path):
    ## x - (x - 1/2)^3 fixes 1/2 with unit multiplier: an interior neutral
    ## orbit, which the census must report as a violation.
    out = str(tmp_path)
    m = _write_map(tmp_path, "neutral.json", {
        "domain": [0.0, 1.0],
        "pieces": [{"on": [0.0, 1.0], "expr": "x - (x - 1/2)^3"}]})
    rc = main(["census", "--map", m, "--pmax", "2", "--out", out])
    assert rc == 3
    doc = _read_json(out, "census_summary.json")
    kinds = [v["kind"] for v in doc["violations"]]
    assert "interior_neutral_orbit" in kinds
    assert {"kind": "empty_critical_set"} in doc["flags"]


## ------------------------------------------------------------- determinism


def test_reruns_are_byte_identical(tmp_path):
    args = ["measure", "corr", "--map", data_path("logistic.json"),
            "--phi", "x", "--psi", "x", "--N", "3", "--bins", "128",
            "--orbit-steps", "20000"]
    outs = []
    for sub in ("a", "b"):
        out = os.path.join(str(tmp_path), sub)
        assert main(args + ["--out", out]) == 0
        outs.append(out)
    for name in ("measure_corr_summary.json", "measure_corr.csv"):
        with open(os.path.join(outs[0], name), "rb") as fh:
            b0 = fh.read()
        with open(os.path.join(outs[1], name), "rb") as fh:
            b1 = fh.read()
        assert b0 == b1


def test_env_seed_overrides_flag(tmp_path, monkeypatch):
    out = str(tmp_path)
    monkeypatch.setenv("SCHWARZSCOPE_SEED", "99")
    rc = main(["measure", "corr", "--map", data_path("logistic.json"),
               "--phi", "x", "--psi", "x", "--N", "2", "--bins", "128",
               "--orbit-steps", "10000", "--seed", "5", "--out", out])
    assert rc == 0
    assert _read_json(out, "measure_corr_summary.json")["seed"] == 99


## ----------------------------------------------------------- console script


def test_console_script_entry_point(tmp_path):
    out = str(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "schwarzscope.cli", "parse",
         "--map", data_path("logistic.json"), "--out", out],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["domain"] == [0.0, 1.0]
