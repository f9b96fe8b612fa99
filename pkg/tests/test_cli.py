import json
import os

import numpy as np

from qextract.cli import main

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenFamily:
    def test_field_family_file(self, capsys, tmp_path):
        out = tmp_path / "fam.json"
        code, stdout, _ = run(capsys, "gen-family", "--n", "8", "--m", "8",
                              "--r", "0", "--out", str(out))
        assert code == 0
        payload = json.loads(stdout)
        assert payload["construction"] == "field-mult"
        fam = json.load(open(out))
        assert fam["n"] == 8 and len(fam["matrices"]) == 8
        assert list(fam) == ["n", "m", "r", "construction", "matrices"]

    def test_circulant(self, capsys, tmp_path):
        out = tmp_path / "fam.json"
        code, stdout, _ = run(capsys, "gen-family", "--n", "5", "--m", "3",
                              "--r", "1", "--out", str(out))
        assert code == 0
        assert json.load(open(out))["construction"] == "circulant"

    def test_invalid_combination_exits_2(self, capsys, tmp_path):
        out = tmp_path / "fam.json"
        code, _, err = run(capsys, "gen-family", "--n", "4", "--m", "2",
                           "--r", "1", "--out", str(out))
        assert code == 2
        assert "not prime" in err
        assert not out.exists()


class TestExtract:
    def test_ip_pipeline(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        x, y = tmp_path / "x", tmp_path / "y"
        x.write_bytes(rng.bytes(400))
        y.write_bytes(rng.bytes(400))
        out = tmp_path / "z"
        code, stdout, _ = run(capsys, "extract", "--ip", "--n", "32",
                              "--x", str(x), "--y", str(y),
                              "--blocks", "100", "--out", str(out))
        assert code == 0
        assert json.loads(stdout)["out_bits_per_block"] == 1
        assert len(out.read_bytes()) == 13

    def test_family_pipeline_strong(self, capsys, tmp_path):
        fam = tmp_path / "fam.json"
        run(capsys, "gen-family", "--n", "5", "--m", "3", "--r", "1",
            "--out", str(fam))
        rng = np.random.default_rng(1)
        x, y = tmp_path / "x", tmp_path / "y"
        x.write_bytes(rng.bytes(100))
        y.write_bytes(rng.bytes(100))
        out = tmp_path / "z"
        code, stdout, _ = run(capsys, "extract", "--family", str(fam),
                              "--x", str(x), "--y", str(y), "--blocks", "64",
                              "--strong", "--out", str(out))
        assert code == 0
        payload = json.loads(stdout)
        assert payload["out_bits_per_block"] == 8
        assert payload["bytes_written"] == 64

    def test_truncated_exits_3_no_partial_output(self, capsys, tmp_path):
        x, y = tmp_path / "x", tmp_path / "y"
        x.write_bytes(b"\x00" * 3)
        y.write_bytes(b"\x00" * 16)
        out = tmp_path / "z"
        code, _, err = run(capsys, "extract", "--ip", "--n", "8",
                           "--x", str(x), "--y", str(y), "--blocks", "16",
                           "--out", str(out))
        assert code == 3
        assert "block 3" in err
        assert not out.exists()
        assert not list(tmp_path.glob(".qextract-*"))

    def test_missing_input_exits_3(self, capsys, tmp_path):
        code, _, err = run(capsys, "extract", "--ip", "--n", "8",
                           "--x", str(tmp_path / "nope"), "--y", str(tmp_path / "nope"),
                           "--blocks", "1", "--out", str(tmp_path / "z"))
        assert code == 3

    def test_zero_blocks_empty_output(self, capsys, tmp_path):
        x, y = tmp_path / "x", tmp_path / "y"
        x.write_bytes(b"")
        y.write_bytes(b"")
        out = tmp_path / "z"
        code, _, _ = run(capsys, "extract", "--ip", "--n", "8", "--x", str(x),
                         "--y", str(y), "--blocks", "0", "--out", str(out))
        assert code == 0
        assert out.read_bytes() == b""


class TestEntropy:
    def test_counterexample_fixture(self, capsys):
        code, stdout, _ = run(capsys, "entropy", "--kind", "hmin",
                              "--state", f"{FIXTURES}/counterexample_eta.json",
                              "--target", "X", "--condition", "B")
        assert code == 0
        payload = json.loads(stdout)
        assert abs(payload["value_bits"] - 0.45689) < 1e-3
        assert payload["gap"] <= 1e-6

    def test_maximally_entangled_fixture(self, capsys):
        code, stdout, _ = run(capsys, "entropy", "--kind", "hmin",
                              "--state", f"{FIXTURES}/maximally_entangled.json",
                              "--target", "A", "--condition", "B")
        assert code == 0
        assert abs(json.loads(stdout)["value_bits"] + 1.0) < 1e-6

    def test_product_uniform_fixture(self, capsys):
        code, stdout, _ = run(capsys, "entropy", "--kind", "hmin",
                              "--state", f"{FIXTURES}/product_uniform_n3.json",
                              "--target", "X", "--condition", "B")
        assert code == 0
        assert abs(json.loads(stdout)["value_bits"] - 3.0) < 1e-6

    def test_pguess(self, capsys):
        code, stdout, _ = run(capsys, "entropy", "--kind", "pguess",
                              "--state", f"{FIXTURES}/counterexample_eta.json")
        assert code == 0
        payload = json.loads(stdout)
        assert abs(payload["value_prob"] - 2 ** -0.45689) < 1e-3

    def test_h2_and_hinf(self, capsys):
        for kind, expect in (("h2", -1.0), ("hinf", -1.0)):
            code, stdout, _ = run(capsys, "entropy", "--kind", kind,
                                  "--state", f"{FIXTURES}/maximally_entangled.json",
                                  "--target", "A", "--condition", "B")
            assert code == 0
            assert abs(json.loads(stdout)["value_bits"] - expect) < 1e-8

    def test_gap_override_via_env(self, capsys, monkeypatch):
        monkeypatch.setenv("QEXTRACT_GAP", "1e-4")
        code, stdout, _ = run(capsys, "entropy", "--kind", "hmin",
                              "--state", f"{FIXTURES}/counterexample_eta.json",
                              "--target", "X", "--condition", "B")
        assert code == 0
        assert json.loads(stdout)["requested_gap"] == 1e-4

    def test_plain_output(self, capsys):
        code, stdout, _ = run(capsys, "--plain", "entropy", "--kind", "hinf",
                              "--state", f"{FIXTURES}/maximally_entangled.json",
                              "--target", "A", "--condition", "B")
        assert code == 0
        assert "value_bits:" in stdout


class TestVerifySuites:
    def test_tightness(self, capsys):
        code, stdout, _ = run(capsys, "verify", "--suite", "tightness")
        assert code == 0
        checks = json.loads(stdout)
        assert isinstance(checks, list) and checks[0]["passed"]

    def test_counterexample(self, capsys):
        code, stdout, _ = run(capsys, "verify", "--suite", "counterexample")
        assert code == 0
        checks = json.loads(stdout)
        assert checks[0]["separation_strict"] and checks[0]["passed"]

    def test_xor(self, capsys):
        code, stdout, _ = run(capsys, "verify", "--suite", "xor",
                              "--count", "10", "--seed", "5")
        assert code == 0
        checks = json.loads(stdout)
        assert len(checks) == 10
        assert all(c["seed"] == 5 and c["suite"] == "xor" for c in checks)

    def test_ip_bound_small(self, capsys):
        code, stdout, _ = run(capsys, "verify", "--suite", "ip-bound",
                              "--count", "3")
        assert code == 0

    def test_chaining_and_alt_model(self, capsys):
        for suite in ("chaining", "alt-model"):
            code, stdout, _ = run(capsys, "verify", "--suite", suite,
                                  "--count", "4")
            assert code == 0, suite
            checks = json.loads(stdout)
            assert len(checks) == 4
            assert all(c.get("passed", c.get("holds")) for c in checks)

    def test_deterministic_given_seed(self, capsys):
        _, first, _ = run(capsys, "verify", "--suite", "xor", "--count", "6",
                          "--seed", "11")
        _, second, _ = run(capsys, "verify", "--suite", "xor", "--count", "6",
                           "--seed", "11")
        assert first == second


class TestDiraRate:
    def test_json_fields(self, capsys):
        code, stdout, _ = run(capsys, "dira-rate", "--n", "1000000",
                              "--h", "1.2", "--mu", "0.1", "--eps", "1e-6",
                              "--eps-s", "1e-9", "--c", "10")
        assert code == 0
        payload = json.loads(stdout)
        assert payload["m"] == 326946
        assert not payload["flag"]
        assert payload["epsilon_check"] <= 1e-6

    def test_flagged_region(self, capsys):
        code, stdout, _ = run(capsys, "dira-rate", "--n", "1000",
                              "--h", "0.1", "--mu", "0.4", "--eps", "1e-6",
                              "--eps-s", "1e-9")
        assert code == 0
        payload = json.loads(stdout)
        assert payload["flag"] and payload["m"] == 0

    def test_bad_params_exit_2(self, capsys):
        code, _, err = run(capsys, "dira-rate", "--n", "10", "--h", "1.0",
                           "--mu", "0.6", "--eps", "1e-6", "--eps-s", "1e-9")
        assert code == 2

    def test_privatized_flag_changes_no_numbers(self, capsys):
        base = ("dira-rate", "--n", "10000", "--h", "1.2", "--mu", "0.1",
                "--eps", "1e-6", "--eps-s", "1e-9")
        _, plain_out, _ = run(capsys, *base)
        _, priv_out, _ = run(capsys, *base, "--privatized")
        a, b = json.loads(plain_out), json.loads(priv_out)
        assert not a["privatized"] and b["privatized"]
        assert a["m"] == b["m"] and a["epsilon_check"] == b["epsilon_check"]


class TestSolverFailureExit:
    def test_entropy_exit_4_prints_bracket(self, capsys, monkeypatch):
        import qextract.entropy as ent

        monkeypatch.setattr(ent, "MAX_OUTER", 3)
        code, stdout, _ = run(capsys, "entropy", "--kind", "hmin",
                              "--state", f"{FIXTURES}/counterexample_eta.json",
                              "--target", "X", "--condition", "B",
                              "--gap", "1e-10")
        assert code == 4
        payload = json.loads(stdout)
        assert payload["converged"] is False
        assert payload["lower"] <= payload["upper"]


class TestFixtureFreshness:
    def test_fixtures_match_generators(self, tmp_path):
        # the checked-in fixtures must be exactly what the script produces
        import subprocess
        import sys

        script = os.path.join(os.path.dirname(__file__), "..", "tools",
                              "make_fixtures.py")
        subprocess.run([sys.executable, script, str(tmp_path)], check=True,
                       capture_output=True)
        names = os.listdir(str(tmp_path))
        assert len(names) == 4
        for name in names:
            fresh = json.load(open(tmp_path / name))
            checked_in = json.load(open(os.path.join(FIXTURES, name)))
            assert fresh == checked_in, name
