import json

import pytest

from mapsynth import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestValidate:
    def test_valid_model(self, capsys):
        code, out, _ = run(capsys, "validate", "models/example_team.json")
        assert code == 0
        assert "6 agents" in out

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "validate", "models/nope.json")
        assert code == 1

    def test_bad_row_sum_names_row(self, capsys, tmp_path):
        doc = {
            "agents": [
                {
                    "id": 1,
                    "states": ["s"],
                    "initial": "s",
                    "independent_actions": ["a"],
                    "transitions": [["s", "a", "s", 0.5]],
                    "formula": "P>=0.5 [ F a ]",
                }
            ]
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run(capsys, "validate", str(path))
        assert code == 1
        assert "'a'" in err

    def test_unparseable_formula_reports_position(self, capsys, tmp_path):
        doc = {
            "agents": [
                {
                    "id": 1,
                    "states": ["s"],
                    "initial": "s",
                    "independent_actions": ["a"],
                    "transitions": [["s", "a", "s", 1.0]],
                    "formula": "P>=0.5 [ X ]",
                }
            ]
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run(capsys, "validate", str(path))
        assert code == 1
        assert "position" in err


class TestCluster:
    def test_example_team(self, capsys):
        code, out, _ = run(capsys, "cluster", "models/example_team.json")
        assert code == 0
        assert "cluster 1: agents [1, 2]" in out
        assert "cluster 2: agents [3, 4, 5]" in out
        assert "cluster 3: agents [6]" in out
        assert "centralized product states: 4096" in out
        assert "max cluster <= centralized: True" in out

    def test_singleton_warning(self, capsys):
        code, out, _ = run(capsys, "cluster", "models/lossy.json")
        assert code == 0
        assert "no two agents are dependent" in out


class TestSynthesize:
    def test_rendezvous_writes_policy(self, capsys, tmp_path):
        out_path = tmp_path / "policy.json"
        code, out, _ = run(
            capsys, "synthesize", "models/rendezvous.json", "--out", str(out_path)
        )
        assert code == 0
        assert out_path.exists()
        assert "policy written" in out
        assert "agent 1:" in out and "agent 2:" in out
        doc = json.loads(out_path.read_text())
        assert doc["clusters"][0]["agents"] == [1, 2]

    def test_unsatisfiable_is_exit_two(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "synthesize", "models/lossy.json",
            "--out", str(tmp_path / "p.json"),
        )
        assert code == 2
        assert "no solution" in out

    def test_blocked_handshake_is_exit_two(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "synthesize", "models/blocked_handshake.json",
            "--out", str(tmp_path / "p.json"),
        )
        assert code == 2

    def test_enumeration_cap_is_exit_three(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "synthesize", "models/blocked_handshake.json",
            "--max-policies", "1", "--out", str(tmp_path / "p.json"),
        )
        assert code == 3
        assert "inconclusive" in out

    def test_jobs_env_default(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("MAPSYNTH_JOBS", "2")
        code, _, _ = run(
            capsys, "synthesize", "models/example_team.json",
            "--out", str(tmp_path / "p.json"),
        )
        assert code == 0


class TestSimulate:
    def synthesize(self, capsys, tmp_path, model):
        out_path = tmp_path / "policy.json"
        code, _, _ = run(capsys, "synthesize", model, "--out", str(out_path))
        assert code == 0
        return str(out_path)

    def test_composition(self, capsys, tmp_path):
        policy_path = self.synthesize(capsys, tmp_path, "models/rendezvous.json")
        code, out, _ = run(
            capsys, "simulate", "models/rendezvous.json", policy_path,
            "--trials", "2000", "--seed", "5",
        )
        assert code == 0
        assert "computed" in out and "simulated" in out

    def test_estimates_near_computed(self, capsys, tmp_path):
        policy_path = self.synthesize(capsys, tmp_path, "models/rendezvous.json")
        code, out, _ = run(
            capsys, "simulate", "models/rendezvous.json", policy_path,
            "--trials", "500",
        )
        assert code == 0
        for line in out.splitlines():
            if "computed" not in line:
                continue
            computed = float(line.split("computed ")[1].split(" ")[0])
            simulated = float(line.split("simulated ")[1].split(" ")[0])
            stderr = float(line.split("+/- ")[1].split(" ")[0])
            assert abs(computed - simulated) <= max(4 * stderr, 1e-9)

    def test_wrong_model_policy_pair(self, capsys, tmp_path):
        policy_path = self.synthesize(capsys, tmp_path, "models/rendezvous.json")
        code, _, err = run(
            capsys, "simulate", "models/example_team.json", policy_path,
        )
        assert code == 1
        assert "digest" in err

    def test_trace_output(self, capsys, tmp_path):
        policy_path = self.synthesize(capsys, tmp_path, "models/rendezvous.json")
        code, out, _ = run(
            capsys, "simulate", "models/rendezvous.json", policy_path,
            "--trials", "1", "--trace",
        )
        assert code == 0
        assert "0\t" in out
