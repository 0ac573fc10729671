import json
import math
import subprocess
import sys

import pytest

from ocran.cli import main


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def golden_gaussian_doc(fronthaul=2.0, snr=1.0, users=1):
    return {
        "schema": 1,
        "users": users,
        "relays": 1,
        "fronthaul": [fronthaul],
        "time_share": [1.0],
        "channel": {
            "kind": "gaussian",
            "H": [[[[[1.0, 0.0]]] for _ in range(users)]],
            "Sigma": [[[[1.0, 0.0]]]],
            "Kin": [[[[snr, 0.0]]] for _ in range(users)],
            "power": [snr] * users,
        },
    }


def discrete_doc(with_aux=True, factorizing=True):
    if factorizing:
        channel = [0.81, 0.09, 0.09, 0.01, 0.01, 0.09, 0.09, 0.81]
    else:
        # shared noise: y1 = y2 = x xor z, wire axes (Y1, Y2, X1)
        channel = [0.75, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25, 0.75]
    doc = {
        "schema": 1,
        "users": 1,
        "relays": 2,
        "fronthaul": [0.7, 0.7],
        "time_share": [1.0],
        "channel": {
            "kind": "discrete",
            "alphabets": {"X": [2], "Y": [2, 2]},
            "px": [[[0.5, 0.5]]],
            "channel": channel,
        },
    }
    if with_aux:
        doc["channel"]["aux"] = [
            [[[0.9, 0.1], [0.1, 0.9]]],
            [[[0.8, 0.2], [0.2, 0.8]]],
        ]
    return doc


class TestRegionCommand:
    def test_golden_csv_to_stdout(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        rc = main(["region", "--scenario", scenario, "--quantizers", quant])
        out = capsys.readouterr().out
        assert rc == 0
        lines = out.strip().splitlines()
        assert lines[0] == "T_mask,S_mask,bound_bits"
        assert len(lines) == 3
        bounds = {tuple(l.split(",")[:2]): float(l.split(",")[2]) for l in lines[1:]}
        assert bounds[("1", "0")] == pytest.approx(math.log2(1.5), abs=1e-9)
        assert bounds[("1", "1")] == pytest.approx(1.0, abs=1e-9)

    def test_out_files_and_manifest(self, tmp_path):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        out = tmp_path / "region.csv"
        rc = main(
            ["region", "--scenario", scenario, "--quantizers", quant, "--out", str(out)]
        )
        assert rc == 0
        assert out.exists()
        summary = json.loads((tmp_path / "region.csv.summary.json").read_text())
        assert summary["sum_rate_bound_bits"] == pytest.approx(math.log2(1.5), abs=1e-9)
        manifest = json.loads((tmp_path / "region.csv.manifest.json").read_text())
        assert manifest["command"] == "region"
        assert manifest["scenario_sha256"]
        assert str(out) in manifest["outputs"]

    def test_reproducible_output_bytes(self, tmp_path):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["region", "--scenario", scenario, "--quantizers", quant, "--out", str(a)])
        main(["region", "--scenario", scenario, "--quantizers", quant, "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.csv.summary.json").read_bytes() == (
            tmp_path / "b.csv.summary.json"
        ).read_bytes()

    def test_missing_aux_is_validation_error(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", discrete_doc(with_aux=False))
        rc = main(["region", "--scenario", scenario])
        assert rc == 2
        assert "aux channels required" in capsys.readouterr().err

    def test_thm1_on_correlated_channel_warns_but_succeeds(self, tmp_path, capsys):
        scenario = write_json(
            tmp_path / "sc.json", discrete_doc(with_aux=True, factorizing=False)
        )
        rc = main(["region", "--scenario", scenario, "--which", "thm1"])
        captured = capsys.readouterr()
        assert rc == 0
        assert "warning" in captured.err.lower()
        assert "conditionally independent" in captured.err

    def test_minus_inf_literal(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[1.0, 0.0]]]]})
        rc = main(["region", "--scenario", scenario, "--quantizers", quant])
        out = capsys.readouterr().out
        assert rc == 0
        assert "-inf" in out
        assert "nan" not in out.lower()

    def test_bad_scenario_exit_code(self, tmp_path, capsys):
        doc = golden_gaussian_doc()
        doc["time_share"] = [0.9]
        scenario = write_json(tmp_path / "sc.json", doc)
        rc = main(["region", "--scenario", scenario])
        assert rc == 2
        assert "time_share" in capsys.readouterr().err

    def test_json_summary_to_stdout(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        rc = main(
            ["region", "--scenario", scenario, "--quantizers", quant, "--format", "json"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["num_constraints"] == 2


class TestBoundaryCommand:
    def _two_user_doc(self, fronthaul=1.0):
        return {
            "schema": 1,
            "users": 2,
            "relays": 1,
            "fronthaul": [fronthaul],
            "time_share": [1.0],
            "channel": {
                "kind": "gaussian",
                "H": [[[[[1.0, 0.0]]], [[[1.0, 0.0]]]]],
                "Sigma": [[[[1.0, 0.0]]]],
                "Kin": [[[[1.0, 0.0]]], [[[1.0, 0.0]]]],
                "power": [1.0, 1.0],
            },
        }

    def test_symmetric_scenario_gives_symmetric_boundary(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", self._two_user_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        rc = main(
            ["boundary", "--scenario", scenario, "--quantizers", quant, "--points", "21"]
        )
        assert rc == 0
        rows = [
            tuple(float(v) for v in line.split(","))
            for line in capsys.readouterr().out.strip().splitlines()[1:]
        ]
        assert len(rows) == 21
        by_weight = {round(r[0], 9): (r[2], r[3]) for r in rows}
        for w1, (r1, r2) in by_weight.items():
            mirrored = by_weight[round(1.0 - w1, 9)]
            assert r1 == pytest.approx(mirrored[1], abs=1e-6)
            assert r2 == pytest.approx(mirrored[0], abs=1e-6)

    def test_endpoints_match_per_user_capacities(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", self._two_user_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        main(["region", "--scenario", scenario, "--quantizers", quant, "--format", "json"])
        summary = json.loads(capsys.readouterr().out)
        rc = main(
            ["boundary", "--scenario", scenario, "--quantizers", quant, "--points", "5"]
        )
        assert rc == 0
        rows = [
            tuple(float(v) for v in line.split(","))
            for line in capsys.readouterr().out.strip().splitlines()[1:]
        ]
        first, last = rows[0], rows[-1]
        assert first[2] == pytest.approx(summary["per_user_max_bits"][0], abs=1e-6)
        assert last[3] == pytest.approx(summary["per_user_max_bits"][1], abs=1e-6)

    def test_zero_fronthaul_single_point(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", self._two_user_doc(fronthaul=0.0))
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.0, 0.0]]]]})
        rc = main(
            ["boundary", "--scenario", scenario, "--quantizers", quant, "--points", "7"]
        )
        assert rc == 0
        rows = capsys.readouterr().out.strip().splitlines()[1:]
        assert all(line.split(",")[2:] == ["0", "0"] for line in rows)

    def test_wrong_user_count(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        rc = main(["boundary", "--scenario", scenario])
        assert rc == 2


class TestOptimizeCommand:
    def test_gaussian_golden(self, tmp_path):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc(fronthaul=1.0))
        out = tmp_path / "opt.json"
        rc = main(
            [
                "optimize",
                "--scenario",
                scenario,
                "--restarts",
                "2",
                "--seed",
                "3",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        expected = math.log2(1.0 + 1.0 * (2.0 - 1.0) / (2.0 + 1.0))
        assert payload["objective_bits"] == pytest.approx(expected, abs=1e-4)
        assert payload["trace_bits"] == sorted(payload["trace_bits"])
        assert payload["quantizers"]["B"]

    def test_discrete(self, tmp_path):
        scenario = write_json(tmp_path / "sc.json", discrete_doc(with_aux=False))
        out = tmp_path / "opt.json"
        rc = main(
            [
                "optimize",
                "--scenario",
                scenario,
                "--aux-sizes",
                "2,2",
                "--restarts",
                "2",
                "--iters",
                "6",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["objective_bits"] > 0.0
        assert len(payload["quantizers"]["aux"]) == 2


class TestSumRateCommands:
    def test_discrete_sumrate(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", discrete_doc())
        rc = main(["sumrate", "--scenario", scenario])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["sum_rate_bits"] >= 0.0

    def test_swz_check(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", discrete_doc())
        rc = main(["swz-check", "--scenario", scenario])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["gap"] <= 1e-9
        assert payload["equal"] is True
        assert payload["best_ordering"] in ([1, 2], [2, 1])

    def test_extreme_points_csv(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", discrete_doc())
        rc = main(["extreme-points", "--scenario", scenario])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "ordering,k,relay,C_tilde_bits"
        assert len(lines) == 1 + 2 * 2  # 2 orderings x 2 relays

    def test_gaussian_sumrate(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        rc = main(["sumrate", "--scenario", scenario, "--quantizers", quant])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["sum_rate_bits"] == pytest.approx(math.log2(1.5), abs=1e-9)


class TestCheckCommands:
    def test_mc_check(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", golden_gaussian_doc())
        quant = write_json(tmp_path / "q.json", {"B": [[[[0.5, 0.0]]]]})
        rc = main(
            [
                "mc-check",
                "--scenario",
                scenario,
                "--quantizers",
                quant,
                "--samples",
                "100000",
                "--seed",
                "1",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["within_3se"] is True
        assert payload["analytic_bits"] == pytest.approx(math.log2(1.5), abs=1e-9)

    def test_codebook_check(self, tmp_path, capsys):
        scenario = write_json(tmp_path / "sc.json", discrete_doc())
        rc = main(
            [
                "codebook-check",
                "--scenario",
                scenario,
                "--blocklength",
                "4",
                "--rate",
                "1.0",
                "--trials",
                "20000",
                "--seed",
                "5",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["num_codewords"] == 16
        assert payload["max_tv"] <= 0.02


class TestVerifyCommand:
    def test_small_pass(self, tmp_path, capsys):
        rc = main(
            [
                "verify",
                "--suite",
                "class_equivalence",
                "--instances",
                "4",
                "--seed",
                "2",
                "--threads",
                "2",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"] is True
        assert payload["suites"][0]["cases"] == 4

    def test_injected_fault_fails_with_named_suite(self, tmp_path, capsys):
        rc = main(
            [
                "verify",
                "--suite",
                "class_equivalence",
                "--instances",
                "4",
                "--inject-fault",
                "class_equivalence",
            ]
        )
        captured = capsys.readouterr()
        assert rc == 1
        assert "class_equivalence" in captured.err
        payload = json.loads(captured.out)
        assert payload["passed"] is False


def test_console_entry_point(tmp_path):
    scenario = tmp_path / "sc.json"
    scenario.write_text(json.dumps(golden_gaussian_doc()))
    quant = tmp_path / "q.json"
    quant.write_text(json.dumps({"B": [[[[0.5, 0.0]]]]}))
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "ocran.cli",
            "region",
            "--scenario",
            str(scenario),
            "--quantizers",
            str(quant),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("T_mask,S_mask,bound_bits")
    # manifest goes to stderr when no --out is given
    manifest = json.loads(proc.stderr.strip().splitlines()[-1])
    assert manifest["command"] == "region"
