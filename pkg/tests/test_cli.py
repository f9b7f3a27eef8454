"""End-to-end command-line tests: exit codes, provenance, determinism.

Everything drives main(argv) in-process against tmp_path files; nothing
here shells out.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from gepflow.cli import main
from gepflow.harness import CSV_HEADER
from gepflow.generative import model_to_json, random_mlp, random_subspace
from gepflow.problems import ProblemInstance, instance_from_json


def _generate(tmp_path, name="inst.json", **overrides):
    argv = [
        "generate", "--kind", "spiked", "--n", "16", "--m", "300",
        "--seed", "7", "--out", str(tmp_path / name),
    ]
    for key, value in overrides.items():
        argv.extend([f"--{key}", str(value)])
    assert main(argv) == 0
    return tmp_path / name


class TestGenerate:
    def test_writes_valid_bundle_with_provenance(self, tmp_path):
        path = _generate(tmp_path)
        obj = json.loads(path.read_text())
        prov = obj["provenance"]
        assert prov["version"] == "0.1.0"
        assert prov["seed"] == 7
        assert len(prov["config"]) == 16
        inst = instance_from_json(obj)
        assert inst.dim == 16 and inst.m == 300 and inst.kind == "spiked"
        assert inst.truth is not None
        assert np.all(inst.truth.v_star >= 0)  # nonneg default policy

    def test_byte_identical_reruns(self, tmp_path):
        a = _generate(tmp_path, name="a.json")
        b = _generate(tmp_path, name="b.json")
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_hash_and_content(self, tmp_path):
        a = _generate(tmp_path, name="a.json")
        argv = [
            "generate", "--kind", "spiked", "--n", "16", "--m", "300",
            "--seed", "8", "--out", str(tmp_path / "b.json"),
        ]
        assert main(argv) == 0
        obj_a = json.loads(a.read_text())
        obj_b = json.loads((tmp_path / "b.json").read_text())
        assert obj_a["provenance"]["config"] != obj_b["provenance"]["config"]
        assert obj_a["a_hat"] != obj_b["a_hat"]

    def test_raw_vstar_policy(self, tmp_path):
        path = _generate(tmp_path, vstar="raw")
        inst = instance_from_json(json.loads(path.read_text()))
        assert np.any(inst.truth.v_star < 0)

    def test_missing_required_flag(self, tmp_path, capsys):
        code = main(["generate", "--kind", "spiked", "--n", "16", "--m", "300"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_choice_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["generate", "--kind", "mystery", "--n", "8", "--m", "10",
                  "--out", str(tmp_path / "x.json")])
        assert info.value.code == 1

    def test_no_subcommand_prints_help(self, capsys):
        assert main([]) == 1
        assert "subcommand" in capsys.readouterr().err or True


class TestSolve:
    def test_trace_schema_and_metrics(self, tmp_path, capsys):
        inst = _generate(tmp_path)
        out = tmp_path / "trace.json"
        code = main([
            "solve", "--solver", "prfm", "--prior", "subspace", "--k", "4",
            "--eta", "7/32", "--in", str(inst), "--out", str(out),
            "--seed", "3", "--restarts", "3", "--max-iters", "60",
        ])
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["solver"] == "prfm"
        assert obj["config"]["step_size"] == 0.21875  # 7/32 parsed exactly
        assert obj["status"] == "ok"
        assert len(obj["rows"]) >= 2
        assert {"t", "rho", "cos_sim", "dist"} <= set(obj["rows"][0])
        assert len(obj["estimate"]) == 16
        assert obj["metrics"]["abs_cos_sim"] > 0.9
        assert "|cos|" in capsys.readouterr().out

    def test_sphere_prior_and_decimal_eta_agree_with_fraction(self, tmp_path):
        inst = _generate(tmp_path)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        base = ["solve", "--solver", "prfm", "--in", str(inst), "--seed", "1",
                "--max-iters", "40"]
        assert main(base + ["--eta", "7/32", "--out", str(out_a)]) == 0
        assert main(base + ["--eta", "0.21875", "--out", str(out_b)]) == 0
        a = json.loads(out_a.read_text())
        b = json.loads(out_b.read_text())
        assert a["rows"] == b["rows"]

    def test_model_backed_subspace_prior(self, tmp_path):
        inst = _generate(tmp_path)
        model = tmp_path / "model.json"
        model.write_text(json.dumps(model_to_json(random_subspace(16, 5, seed=2))))
        out = tmp_path / "trace.json"
        code = main([
            "solve", "--solver", "prfm", "--prior", "subspace",
            "--model", str(model), "--in", str(inst), "--out", str(out),
            "--max-iters", "30", "--restarts", "2",
        ])
        assert code == 0
        assert json.loads(out.read_text())["status"] == "ok"

    def test_rifle_requires_s(self, tmp_path, capsys):
        inst = _generate(tmp_path)
        code = main([
            "solve", "--solver", "rifle", "--in", str(inst),
            "--out", str(tmp_path / "t.json"),
        ])
        assert code == 1
        assert "requires --s" in capsys.readouterr().err

    def test_solver_failure_exits_two(self, tmp_path, capsys):
        # Indefinite B_hat: every restart hits a nonpositive denominator.
        bad = ProblemInstance(
            a_hat=np.eye(4), b_hat=-np.eye(4), truth=None, m=5,
            kind="custom", seed=0,
        )
        from gepflow.problems import instance_to_json

        path = tmp_path / "bad.json"
        path.write_text(json.dumps(instance_to_json(bad)))
        code = main([
            "solve", "--solver", "prfm", "--in", str(path),
            "--out", str(tmp_path / "t.json"), "--restarts", "2",
        ])
        assert code == 2
        assert "solver error" in capsys.readouterr().err

    def test_missing_instance_file(self, tmp_path, capsys):
        code = main([
            "solve", "--solver", "prfm", "--in", str(tmp_path / "absent.json"),
            "--out", str(tmp_path / "t.json"),
        ])
        assert code == 1


class TestSweep:
    def _argv(self, tmp_path, out_name, extra=()):
        return [
            "sweep", "--kind", "spiked", "--n", "8", "--m-values", "40,80",
            "--solvers", "prfm", "--trials", "2", "--restarts", "1",
            "--max-iters", "20", "--seed", "5", "--timing", "zero",
            "--out", str(tmp_path / out_name), *extra,
        ]

    def test_csv_with_provenance_header(self, tmp_path, capsys):
        assert main(self._argv(tmp_path, "out.csv")) == 0
        lines = (tmp_path / "out.csv").read_text().splitlines()
        assert lines[0].startswith("# provenance: version=0.1.0 seed=5 config=")
        assert lines[1] == CSV_HEADER
        assert len(lines) == 2 + 4  # 2 m-values x 2 trials
        assert "solver" in capsys.readouterr().out  # summary table printed

    def test_jobs_do_not_change_bytes(self, tmp_path):
        assert main(self._argv(tmp_path, "a.csv", ("--jobs", "1"))) == 0
        assert main(self._argv(tmp_path, "b.csv", ("--jobs", "4"))) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_summary_json(self, tmp_path):
        assert main(
            self._argv(tmp_path, "out.csv", ("--summary-out", str(tmp_path / "sum.json")))
        ) == 0
        obj = json.loads((tmp_path / "sum.json").read_text())
        assert "provenance" in obj
        cells = obj["cells"]
        assert {c["m"] for c in cells} == {40, 80}
        assert all(c["count"] == 2 for c in cells)

    def test_flag_change_alters_hash(self, tmp_path):
        assert main(self._argv(tmp_path, "a.csv")) == 0
        argv = self._argv(tmp_path, "b.csv")
        argv[argv.index("--trials") + 1] = "3"
        assert main(argv) == 0
        head_a = (tmp_path / "a.csv").read_text().splitlines()[0]
        head_b = (tmp_path / "b.csv").read_text().splitlines()[0]
        assert head_a != head_b

    def test_invalid_spec(self, tmp_path, capsys):
        argv = self._argv(tmp_path, "x.csv")
        argv[argv.index("--m-values") + 1] = "80,40"
        assert main(argv) == 1
        assert "ascending" in capsys.readouterr().err


class TestConfigLayer:
    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"kind": "spiked", "n": 8, "m": 50}))
        out = tmp_path / "inst.json"
        code = main(["generate", "--config", str(cfg), "--seed", "1",
                     "--out", str(out)])
        assert code == 0
        inst = instance_from_json(json.loads(out.read_text()))
        assert inst.dim == 8 and inst.m == 50

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"kind": "spiked", "n": 8, "m": 50}))
        out = tmp_path / "inst.json"
        code = main(["generate", "--config", str(cfg), "--m", "75",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        assert instance_from_json(json.loads(out.read_text())).m == 75

    def test_config_file_must_be_object(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        assert main(["generate", "--config", str(cfg), "--out", "x"]) == 1

    def test_gep_seed_fallback_and_flag_priority(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GEP_SEED", "9")
        out = tmp_path / "a.json"
        assert main(["generate", "--kind", "spiked", "--n", "8", "--m", "40",
                     "--out", str(out)]) == 0
        assert json.loads(out.read_text())["provenance"]["seed"] == 9
        out2 = tmp_path / "b.json"
        assert main(["generate", "--kind", "spiked", "--n", "8", "--m", "40",
                     "--seed", "4", "--out", str(out2)]) == 0
        assert json.loads(out2.read_text())["provenance"]["seed"] == 4

    def test_bad_gep_seed(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("GEP_SEED", "pi")
        code = main(["generate", "--kind", "spiked", "--n", "8", "--m", "40",
                     "--out", str(tmp_path / "x.json")])
        assert code == 1
        assert "GEP_SEED" in capsys.readouterr().err


class TestVerify:
    def test_report_roundtrip(self, tmp_path, capsys):
        inst = _generate(tmp_path)
        out = tmp_path / "report.json"
        code = main(["verify", "--in", str(inst), "--set-size", "10",
                     "--seed", "2", "--out", str(out)])
        assert code == 0
        assert "max|s1'Es2|" in capsys.readouterr().out
        obj = json.loads(out.read_text())
        assert obj["set_size"] == 10
        assert obj["max_e_bilinear"] > 0

    def test_generator_probes(self, tmp_path):
        inst = _generate(tmp_path)
        model = tmp_path / "gen.json"
        model.write_text(
            json.dumps(model_to_json(random_mlp(16, 4, hidden=(8,), seed=3)))
        )
        code = main(["verify", "--in", str(inst), "--set-size", "6",
                     "--seed", "2", "--model", str(model)])
        assert code == 0

    def test_truthless_instance_rejected(self, tmp_path, capsys):
        from gepflow.problems import instance_to_json

        bare = ProblemInstance(
            a_hat=np.eye(4), b_hat=np.eye(4), truth=None, m=5,
            kind="custom", seed=0,
        )
        path = tmp_path / "bare.json"
        path.write_text(json.dumps(instance_to_json(bare)))
        assert main(["verify", "--in", str(path)]) == 1


class TestTheoryCheck:
    def test_prints_gammas_and_conditions(self, tmp_path, capsys):
        inst = _generate(tmp_path)
        out = tmp_path / "report.json"
        code = main(["theory-check", "--in", str(inst), "--eta", "0.21875",
                     "--draws", "120", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "gamma1       0.875" in text
        assert "gamma2       0.875" in text
        assert "satisfied" in text
        assert "suite sandwich" in text
        obj = json.loads(out.read_text())
        assert obj["conditions"]["gamma1"] == pytest.approx(0.875, abs=1e-9)
        assert len(obj["suites"]) == 3
        assert all(s["failures"] == 0 for s in obj["suites"])

    def test_fraction_eta_accepted(self, tmp_path, capsys):
        inst = _generate(tmp_path)
        code = main(["theory-check", "--in", str(inst), "--eta", "7/32",
                     "--draws", "60"])
        assert code == 0
        assert "0.875" in capsys.readouterr().out

    def test_truthless_instance_rejected(self, tmp_path):
        from gepflow.problems import instance_to_json

        bare = ProblemInstance(
            a_hat=np.eye(4), b_hat=np.eye(4), truth=None, m=5,
            kind="custom", seed=0,
        )
        path = tmp_path / "bare.json"
        path.write_text(json.dumps(instance_to_json(bare)))
        assert main(["theory-check", "--in", str(path), "--draws", "40"]) == 1
