import json

import numpy as np
import pytest

import quotasim.cli as cli
import quotasim.itf
from quotasim.model import Allocation


PROBLEM_EA = {
    "users": [
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
    ],
    "q_total": 2.0,
    "qos": 1.0,
}

PROBLEM_IDF = {
    "users": [
        {"psi": 2.0, "cost": 1.0, "demand": 10.0},
        {"psi": 1.0, "cost": 1.0, "demand": 10.0},
    ],
    "q_total": 10.0,
    "qos": 1.0,
}

PROBLEM_SYMMETRIC = {
    "users": [
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
        {"psi": 1.0, "cost": 1.0, "demand": 1.0},
    ],
    "q_total": 10.0,
    "qos": 1.0,
}

CONFIG_SMALL = {
    "n_users": 30,
    "seed": 77,
    "rounds": 3,
}


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestAllocate:
    def test_equal_split_fixture(self, tmp_path, capsys):
        inp = write(tmp_path, "p.json", PROBLEM_EA)
        out = tmp_path / "alloc.json"
        code = cli.main(["allocate", "--scheme", "ea", "--input", inp, "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["quotas"] == [0.5, 0.5, 0.5, 0.5]

    def test_demand_fair_fixture(self, tmp_path):
        inp = write(tmp_path, "p.json", PROBLEM_IDF)
        out = tmp_path / "alloc.json"
        assert cli.main(["allocate", "--scheme", "idf", "--input", inp, "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["quotas"][0] == pytest.approx(6.66666666667, abs=1e-9)
        assert doc["quotas"][1] == pytest.approx(3.33333333333, abs=1e-9)

    def test_stdout_when_no_output(self, tmp_path, capsys):
        inp = write(tmp_path, "p.json", PROBLEM_EA)
        assert cli.main(["allocate", "--scheme", "ea", "--input", inp]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["quotas"] == [0.5, 0.5, 0.5, 0.5]

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code = cli.main(["allocate", "--scheme", "ea", "--input", str(path)])
        assert code == 2
        assert "input-error" in capsys.readouterr().err

    def test_schema_violation_exits_2(self, tmp_path, capsys):
        inp = write(tmp_path, "p.json", {"users": [], "q_total": 1, "qos": 1})
        assert cli.main(["allocate", "--scheme", "ea", "--input", inp]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert cli.main(["allocate", "--scheme", "ea", "--input", str(tmp_path / "no.json")]) == 2

    def test_domain_error_exits_3(self, tmp_path, capsys):
        doc = {
            "users": [
                {"psi": 0.0, "cost": 1.0, "demand": 1.0},
                {"psi": 0.0, "cost": 1.0, "demand": 1.0},
            ],
            "q_total": 1.0,
            "qos": 1.0,
        }
        inp = write(tmp_path, "p.json", doc)
        code = cli.main(["allocate", "--scheme", "ne", "--input", inp])
        assert code == 3
        assert "domain-error" in capsys.readouterr().err


class TestNash:
    def test_symmetric_fixture(self, tmp_path, capsys):
        inp = write(tmp_path, "p.json", PROBLEM_SYMMETRIC)
        assert cli.main(["nash", "--input", inp]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["demands"] == [5.0, 5.0]
        assert doc["total_residual"] < 1e-9
        assert doc["level_spread"] < 1e-9
        assert doc["max_deviation_gain"] <= 1e-9

    def test_weighted_fixture(self, tmp_path, capsys):
        doc_in = {
            "users": [
                {"psi": 2.0, "cost": 1.0, "demand": 1.0},
                {"psi": 1.0, "cost": 1.0, "demand": 1.0},
            ],
            "q_total": 10.0,
            "qos": 1.0,
        }
        inp = write(tmp_path, "p.json", doc_in)
        assert cli.main(["nash", "--input", inp]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["demands"][0] == pytest.approx(20 / 3, abs=1e-9)
        assert doc["demands"][1] == pytest.approx(10 / 3, abs=1e-9)

    def test_zero_contribution_exits_3(self, tmp_path):
        doc_in = {
            "users": [{"psi": 0.0, "cost": 1.0, "demand": 1.0}],
            "q_total": 1.0,
            "qos": 1.0,
        }
        inp = write(tmp_path, "p.json", doc_in)
        assert cli.main(["nash", "--input", inp]) == 3


class TestSimulate:
    def test_macro_outputs(self, tmp_path, capsys):
        cfg = write(tmp_path, "cfg.json", CONFIG_SMALL)
        out = tmp_path / "out"
        code = cli.main(["simulate", "--config", cfg, "--mode", "macro", "--out", str(out)])
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "rounds.csv").exists()
        stdout = capsys.readouterr().out
        for scheme in ("ea", "da", "idf", "itf", "ne", "itf-ccp"):
            assert scheme in stdout
        report = json.loads((out / "report.json").read_text())
        assert len(report["aggregates"]) == 6

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", CONFIG_SMALL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert cli.main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "rounds.csv").read_bytes() == (out2 / "rounds.csv").read_bytes()

    def test_uncertainty_mode(self, tmp_path, capsys):
        cfg = write(tmp_path, "cfg.json", {"n_users": 100, "seed": 12345})
        out = tmp_path / "u"
        code = cli.main([
            "simulate", "--config", cfg, "--mode", "uncertainty", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads((out / "uncertainty.json").read_text())
        assert doc["ccp"]["over_provision_count"] < doc["evm"]["over_provision_count"]

    def test_uncertainty_single_method_with_burst(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", {"n_users": 100, "seed": 12345})
        out = tmp_path / "u"
        code = cli.main([
            "simulate", "--config", cfg, "--mode", "uncertainty",
            "--method", "ccp", "--burst", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads((out / "uncertainty.json").read_text())
        assert doc["ccp"]["q_ext"] > 0
        assert doc["ccp"]["total_granted"] > 0

    def test_micro_mode(self, tmp_path, capsys):
        cfg = write(tmp_path, "cfg.json", {"n_users": 100, "seed": 1})
        out = tmp_path / "m"
        code = cli.main(["simulate", "--config", cfg, "--mode", "micro", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "micro.json").read_text())
        assert doc["users"][1]["label"] == "low-contribution"
        assert doc["users"][1]["idf"]["quota_over_demand"] == pytest.approx(0.3769, abs=2e-3)

    def test_invalid_config_exits_2(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", {"n_users": 10})
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", CONFIG_SMALL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["simulate", "--config", cfg, "--out", str(out1)])
        cli.main(["simulate", "--config", cfg, "--seed", "999", "--out", str(out2)])
        assert (out1 / "report.json").read_text() != (out2 / "report.json").read_text()

    def test_scheme_selection(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", CONFIG_SMALL)
        out = tmp_path / "sel"
        code = cli.main([
            "simulate", "--config", cfg, "--schemes", "ea,pca", "--out", str(out),
        ])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert [a["scheme"] for a in report["aggregates"]] == ["ea", "pca"]

    def test_bad_scheme_selection_exits_2(self, tmp_path):
        cfg = write(tmp_path, "cfg.json", CONFIG_SMALL)
        code = cli.main([
            "simulate", "--config", cfg, "--schemes", "ea,zzz",
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2


class TestOracleCheck:
    def test_default_small_run_passes(self, capsys):
        assert cli.main(["oracle-check", "--instances", "40", "--seed", "5"]) == 0
        out = capsys.readouterr().out
        assert "[pass]" in out
        assert "FAIL" not in out

    def test_zero_instances(self, capsys):
        assert cli.main(["oracle-check", "--instances", "0"]) == 0
        assert "zero instances" in capsys.readouterr().out

    def test_injected_bug_detected(self, monkeypatch, capsys):
        real = quotasim.itf.allocate_itf

        def broken(problem, method="sweep"):
            allocation = real(problem, method)
            q = allocation.quotas.copy()
            if q.sum() > 0:
                big = int(np.argmax(q))
                q[big] *= 0.9  # quietly shave the largest grant
            return Allocation(quotas=q)

        monkeypatch.setattr(quotasim.itf, "allocate_itf", broken)
        code = cli.main(["oracle-check", "--instances", "20", "--seed", "5"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out
