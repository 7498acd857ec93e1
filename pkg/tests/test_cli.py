"""End-to-end runs of the command-line front end through main(argv)."""

import json
import math

import numpy as np
import pytest

from hullgap.cli import (
    EXIT_FAIL,
    EXIT_INPUT,
    EXIT_NOT_FOUND,
    EXIT_OK,
    EXIT_REFUSED,
    main,
)
from hullgap.lipmetric import geometric_chain, line_metric, save_metric


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert out, f"no stdout (stderr: {err!r})"
    return code, json.loads(out)


class TestLip:
    def test_constant_function_has_zero_seminorm(self, capsys):
        code, doc = run_json(
            capsys, "lip", "--metric", "chain(0.1,4)", "--values", "3,3,3,3"
        )
        assert code == EXIT_OK
        assert doc["seminorm"] == 0.0
        assert doc["points"] == 4

    def test_distance_to_base_point_has_seminorm_one(self, capsys, tmp_path):
        M = line_metric([0.0, 1.0, 2.5, 7.0])
        path = tmp_path / "line.metric"
        save_metric(M, path)
        vals = ",".join(repr(M.d(i, 0)) for i in range(M.size))
        code, doc = run_json(capsys, "lip", "--metric", str(path), "--values", vals)
        assert code == EXIT_OK
        assert doc["seminorm"] == pytest.approx(1.0, abs=1e-12)

    def test_identity_on_three_level_chain(self, capsys):
        # oracle: max over the three pairs of |f_i - f_j| / d_ij
        M = geometric_chain(0.1, 3)
        f = np.array([0.0, 0.1, 0.01])
        quot = max(
            abs(f[i] - f[j]) / M.d(i, j)
            for i in range(3)
            for j in range(i + 1, 3)
        )
        code, doc = run_json(
            capsys, "lip", "--metric", "chain(0.1,3)", "--values", "0,0.1,0.01"
        )
        assert code == EXIT_OK
        assert doc["seminorm"] == pytest.approx(quot, abs=1e-12)
        assert doc["seminorm"] == pytest.approx(1.0, abs=1e-12)

    def test_masked_extension_agrees_and_matches_restricted(self, capsys):
        code, doc = run_json(
            capsys,
            "lip", "--metric", "chain(0.5,5)",
            "--values", "0,1,0,0,0", "--mask", "0,1",
        )
        assert code == EXIT_OK
        ext = doc["extension"]
        assert ext["agrees_on_mask"] is True
        assert ext["seminorm"] == pytest.approx(doc["seminorm"], abs=1e-12)
        assert len(ext["values"]) == 5

    def test_values_file_input(self, capsys, tmp_path):
        vf = tmp_path / "vals.txt"
        vf.write_text("0 0.1 0.01\n")
        code, doc = run_json(
            capsys, "lip", "--metric", "chain(0.1,3)", "--values", f"@{vf}"
        )
        assert code == EXIT_OK
        assert doc["seminorm"] == pytest.approx(1.0, abs=1e-12)

    def test_wrong_value_count_is_input_error(self, capsys):
        code, out, err = run(
            capsys, "lip", "--metric", "chain(0.1,3)", "--values", "0,1"
        )
        assert code == EXIT_INPUT
        assert "3 points" in err

    def test_csv_format_rejected(self, capsys):
        code, out, err = run(
            capsys,
            "lip", "--metric", "chain(0.1,3)", "--values", "0,1,2",
            "--format", "csv",
        )
        assert code == EXIT_INPUT

    def test_config_echoed(self, capsys):
        code, doc = run_json(
            capsys, "lip", "--metric", "chain(0.1,3)", "--values", "1,2,3"
        )
        assert doc["config"]["command"] == "lip"
        assert doc["config"]["metric"] == "chain(0.1,3)"
        assert doc["config"]["values"] == "1,2,3"


class TestRings:
    def test_chain_family_of_three(self, capsys, tmp_path):
        out_path = tmp_path / "family.json"
        code, out, err = run(
            capsys,
            "rings", "--metric", "chain(0.01,12)", "--eps", "0.5",
            "--k", "3", "--out", str(out_path),
        )
        assert code == EXIT_OK
        doc = json.loads(out_path.read_text())
        assert doc["size"] >= 3
        assert doc["validation"]["passed"] is True
        assert len(doc["family"]["entries"]) == doc["size"]

    def test_two_point_space_not_found(self, capsys, tmp_path):
        path = tmp_path / "two.metric"
        save_metric(line_metric([0.0, 1.0]), path)
        code, doc = run_json(
            capsys, "rings", "--metric", str(path), "--eps", "0.5", "--k", "2"
        )
        assert code == EXIT_NOT_FOUND
        assert doc["not_found"]["accepted"] < 2
        assert doc["not_found"]["pairs_examined"] >= 1

    def test_malformed_metric_reports_line(self, capsys, tmp_path):
        path = tmp_path / "bad.metric"
        path.write_text("3\n0 1 2\n1 0 oops\n2 1 0\n")
        code, out, err = run(
            capsys, "rings", "--metric", str(path), "--eps", "0.5", "--k", "2"
        )
        assert code == EXIT_INPUT
        assert "line 3" in err

    def test_missing_eps_is_input_error(self, capsys):
        code, out, err = run(capsys, "rings", "--metric", "chain(0.01,12)", "--k", "3")
        assert code == EXIT_INPUT
        assert "--eps" in err


class TestCert:
    def test_centralizer_sup8_passes_quarter_bound(self, capsys):
        code, doc = run_json(
            capsys,
            "cert", "--space", "lp(inf,8)", "--n", "2", "--eps", "0.2",
            "--m", "8", "--seed", "7",
        )
        assert code == EXIT_OK
        assert doc["route"] == "partition"
        assert doc["report"]["passed"] is True
        mix = [c for c in doc["report"]["checks"] if c["name"].startswith("mix-approx")]
        assert mix
        assert all(c["value"] <= 0.25 + 1e-12 for c in mix)

    def test_ivakhno_chain_passes_five_thirds(self, capsys):
        code, doc = run_json(
            capsys,
            "cert", "--metric", "chain(0.01,12)", "--n", "2", "--eps", "0.5",
            "--k", "3", "--seed", "3",
        )
        assert code == EXIT_OK
        assert doc["route"] == "annulus"
        assert doc["family_validation"]["passed"] is True
        assert doc["report"]["passed"] is True
        mix = [c for c in doc["report"]["checks"] if c["name"].startswith("mix-approx")]
        assert mix
        assert all(c["value"] <= 5.0 / 3.0 + 1e-9 for c in mix)

    def test_family_file_round_trip(self, capsys, tmp_path):
        fam_path = tmp_path / "family.json"
        code, _, _ = run(
            capsys,
            "rings", "--metric", "chain(0.01,12)", "--eps", "0.5",
            "--k", "3", "--out", str(fam_path),
        )
        assert code == EXIT_OK
        code, doc = run_json(
            capsys,
            "cert", "--metric", "chain(0.01,12)", "--family", str(fam_path),
            "--n", "1", "--eps", "0.5", "--k", "3", "--seed", "11",
        )
        assert code == EXIT_OK
        assert doc["report"]["passed"] is True

    def test_corrupted_family_fails_named_check(self, capsys, tmp_path):
        fam_path = tmp_path / "family.json"
        run(
            capsys,
            "rings", "--metric", "chain(0.01,12)", "--eps", "0.5",
            "--k", "3", "--out", str(fam_path),
        )
        doc = json.loads(fam_path.read_text())
        doc["family"]["entries"][0]["R"] *= 0.01
        fam_path.write_text(json.dumps(doc["family"]))
        code, rep = run_json(
            capsys,
            "cert", "--metric", "chain(0.01,12)", "--family", str(fam_path),
            "--n", "1", "--eps", "0.5", "--k", "3", "--seed", "11",
        )
        assert code == EXIT_FAIL
        assert rep["family_validation"]["passed"] is False
        failing = [
            c["name"] for c in rep["family_validation"]["checks"] if not c["passed"]
        ]
        assert any("outer-ratio" in name or "radius-order" in name for name in failing)
        assert rep["report"] is None

    def test_space_and_metric_together_rejected(self, capsys):
        code, out, err = run(
            capsys,
            "cert", "--space", "lp(inf,8)", "--metric", "chain(0.1,3)",
            "--n", "1", "--eps", "0.2", "--m", "2", "--seed", "0",
        )
        assert code == EXIT_INPUT
        assert "exactly one" in err

    def test_seed_required(self, capsys):
        code, out, err = run(
            capsys, "cert", "--space", "lp(inf,8)", "--n", "1", "--eps", "0.2",
            "--m", "2",
        )
        assert code == EXIT_INPUT
        assert "--seed" in err


class TestDk:
    def test_scalar_grid_profile_csv(self, capsys):
        code, out, err = run(
            capsys,
            "dk", "--space", "lp(2,1)", "--n", "2", "--eps", "0.1",
            "--alpha", "1", "--k", "1..4", "--resolution", "0.01", "--seed", "0",
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        preamble = [ln for ln in lines if ln.startswith("# ")]
        assert any(ln.startswith("# command=") for ln in preamble)
        body = [ln for ln in lines if not ln.startswith("# ")]
        assert body[0] == "k,lower,upper,method,witness-id"
        rows = {}
        for ln in body[1:]:
            k, lower, upper, method, wid = ln.split(",")
            rows[int(k)] = (float(lower), float(upper), method, wid)
        assert set(rows) == {1, 2, 3, 4}
        lo1, up1, _, wid1 = rows[1]
        assert 1.75 <= lo1 <= 1.8 <= up1 <= 1.85
        assert wid1
        for k in (2, 3, 4):
            lo, up, _, _ = rows[k]
            assert 0.85 <= lo <= 0.9 <= up <= 0.95

    def test_function_module_constructive_route(self, capsys):
        code, out, err = run(
            capsys,
            "dk", "--space", "fmod(8, lp(2,1))", "--n", "2", "--eps", "0.2",
            "--k", "1..8", "--seed", "1",
        )
        assert code == EXIT_OK
        body = [ln for ln in out.splitlines() if not ln.startswith("# ")]
        assert body[0] == "k,lower,upper,method,witness-id"
        for ln in body[1:]:
            k, _, upper, method, _ = ln.split(",")
            assert float(upper) == pytest.approx(2.0 / int(k), abs=1e-15)
            assert method == "partition-ceiling"
        assert len(body) == 9

    def test_json_format(self, capsys):
        code, doc = run_json(
            capsys,
            "dk", "--space", "fmod(4, lp(2,1))", "--n", "1", "--eps", "0.2",
            "--k", "1,2", "--seed", "5", "--format", "json",
        )
        assert code == EXIT_OK
        assert doc["route"] == "partition-ceiling"
        assert set(doc["profile"]["entries"]) == {"1", "2"}

    def test_byte_identical_reruns(self, capsys, tmp_path):
        out = tmp_path / "profile.csv"
        argv = [
            "dk", "--space", "lp(2,2)", "--n", "2", "--eps", "0.25",
            "--k", "1..3", "--resolution", "0.25", "--seed", "9",
            "--out", str(out),
        ]
        assert main(list(argv)) == EXIT_OK
        first = out.read_bytes()
        assert main(list(argv)) == EXIT_OK
        assert out.read_bytes() == first

    def test_cert_byte_identical_reruns(self, capsys, tmp_path):
        out = tmp_path / "report.json"
        argv = [
            "cert", "--space", "lp(inf,4)", "--n", "2", "--eps", "0.2",
            "--m", "4", "--seed", "21", "--out", str(out),
        ]
        assert main(list(argv)) == EXIT_OK
        first = out.read_bytes()
        assert main(list(argv)) == EXIT_OK
        assert out.read_bytes() == first

    def test_grid_guard_refusal(self, capsys):
        code, doc = run_json(
            capsys,
            "dk", "--space", "lp(inf,4)", "--n", "4", "--eps", "0.2",
            "--k", "1..2", "--resolution", "0.05", "--seed", "0",
        )
        assert code == EXIT_REFUSED
        assert "refusal" in doc
        assert doc["report"]["required_resolution"] > 0.05

    def test_bad_space_grammar(self, capsys):
        code, out, err = run(
            capsys,
            "dk", "--space", "wedge(2)", "--n", "1", "--eps", "0.2",
            "--k", "1", "--seed", "0",
        )
        assert code == EXIT_INPUT
        assert "constructor" in err

    def test_empty_k_range(self, capsys):
        code, out, err = run(
            capsys,
            "dk", "--space", "lp(2,1)", "--n", "1", "--eps", "0.2",
            "--k", "4..1", "--seed", "0",
        )
        assert code == EXIT_INPUT

    def test_seed_required(self, capsys):
        code, out, err = run(
            capsys, "dk", "--space", "lp(2,1)", "--n", "1", "--eps", "0.2", "--k", "1"
        )
        assert code == EXIT_INPUT
        assert "--seed" in err


class TestPlumbing:
    def test_no_arguments_is_input_error(self, capsys):
        assert main([]) == EXIT_INPUT
        capsys.readouterr()

    def test_unknown_command_is_input_error(self, capsys):
        assert main(["frobnicate"]) == EXIT_INPUT
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        cap = capsys.readouterr()
        assert "rings" in cap.out

    def test_missing_metric_file(self, capsys, tmp_path):
        code, out, err = run(
            capsys,
            "lip", "--metric", str(tmp_path / "nope.metric"), "--values", "0",
        )
        assert code == EXIT_INPUT

    def test_ray_generator_accepted(self, capsys):
        code, doc = run_json(
            capsys, "lip", "--metric", "ray(2,4)", "--values", "0,1,2,3"
        )
        assert code == EXIT_OK
        assert doc["points"] == 4
