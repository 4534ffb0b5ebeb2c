import json
import subprocess
import sys

import pytest

from raretype.cli import cli_dispatch


def run_cli(argv, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "raretype", *argv],
        capture_output=True,
        text=True,
        **kwargs,
    )


class TestDispatch:
    def test_lr_reference_value(self, capsys):
        code = cli_dispatch(["lr", "--n", "18925", "--alpha", "0.51", "--theta", "216"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["log10_lr"] == pytest.approx(4.5918, abs=0.005)

    def test_lr_csv_format(self, capsys):
        code = cli_dispatch(
            ["lr", "--n", "100", "--alpha", "0.5", "--theta", "10", "--format", "csv", "--quiet"]
        )
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "lr,log10_lr"
        assert float(out[1].split(",")[0]) == pytest.approx(111 / 0.5)

    def test_fixture_payload(self, capsys):
        assert cli_dispatch(["fixture", "--quiet"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["a"][:3] == [1, 2, 3]
        assert payload["r"][0] == 356
        assert sum(a * r for a, r in zip(payload["a"], payload["r"])) == 2085

    def test_fixture_with_meta(self, capsys):
        assert cli_dispatch(["fixture", "--with-meta", "--quiet"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["metadata"]["reported_n"] == 2037

    def test_unknown_subcommand_exits_2(self, capsys):
        assert cli_dispatch(["frobnicate"]) == 2
        capsys.readouterr()

    def test_unknown_flag_exits_2(self, capsys):
        assert cli_dispatch(["lr", "--n", "5", "--alpha", "0.5", "--theta", "1", "--wat"]) == 2
        capsys.readouterr()

    def test_missing_file_exits_2(self, capsys):
        assert cli_dispatch(["fit", "--partition", "/nonexistent.json", "--quiet"]) == 2
        capsys.readouterr()

    def test_invalid_params_exit_2(self, capsys):
        assert cli_dispatch(["lr", "--n", "10", "--alpha", "1.5", "--theta", "1"]) == 2
        capsys.readouterr()

    def test_fit_non_convergence_exits_3(self, capsys, tmp_path):
        path = tmp_path / "oneblock.json"
        path.write_text(json.dumps({"a": [4], "r": [1]}))
        assert cli_dispatch(["fit", "--partition", str(path), "--quiet"]) == 3
        payload = json.loads(capsys.readouterr().out)
        assert payload["converged"] is False

    def test_reduce_and_fit_pipeline(self, capsys, tmp_path):
        profiles = tmp_path / "profiles.tsv"
        rows = ["x"] * 6 + ["y"] * 3 + ["z", "w", "v", "u", "t", "s", "r", "q"]
        profiles.write_text("L\n" + "\n".join(rows) + "\n")
        part_path = tmp_path / "part.json"
        code = cli_dispatch(
            ["reduce", "--input", str(profiles), "--integer", "--out", str(part_path), "--quiet"]
        )
        assert code == 0
        part = json.loads(part_path.read_text())
        assert part == {"a": [1, 3, 6], "r": [8, 1, 1]}
        code = cli_dispatch(["fit", "--partition", str(part_path), "--quiet"])
        assert code in (0, 3)  # tiny sample may legitimately sit on a boundary
        capsys.readouterr()

    def test_freq_lr(self, capsys, tmp_path):
        pop = tmp_path / "pop.json"
        pop.write_text(json.dumps({"probs": [0.5, 0.3, 0.2], "pop_size": 10}))
        assert cli_dispatch(["freq-lr", "--population", str(pop), "--rank", "3", "--quiet"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lr"] == pytest.approx(5.0)

    def test_true_lr_infeasible_exits_3(self, capsys, tmp_path):
        part = tmp_path / "part.json"
        part.write_text(json.dumps({"a": [1], "r": [5]}))
        pop = tmp_path / "pop.json"
        pop.write_text(json.dumps({"probs": [0.5, 0.5], "pop_size": 10}))
        code = cli_dispatch(
            [
                "true-lr", "--partition", str(part), "--population", str(pop),
                "--iterations", "1000", "--burn-in", "100", "--thinning", "10",
                "--seed", "1", "--quiet",
            ]
        )
        assert code == 3
        capsys.readouterr()

    def test_surface_csv(self, capsys, tmp_path):
        part = tmp_path / "part.json"
        part.write_text(json.dumps({"a": [1, 2, 4, 8], "r": [20, 6, 2, 1]}))
        code = cli_dispatch(
            [
                "surface", "--partition", str(part), "--format", "csv",
                "--n-phi", "5", "--n-theta", "5", "--quiet",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "phi,theta,rel_loglik,gauss_overlay,valid"
        assert len(lines) == 26


@pytest.mark.slow
class TestSubprocessDeterminism:
    def test_simulate_crp_byte_identical(self):
        argv = ["simulate", "--mode", "crp", "--n", "60", "--alpha", "0.62",
                "--theta", "22", "--seed", "7", "--format", "csv", "--quiet"]
        a = run_cli(argv)
        b = run_cli(argv)
        assert a.returncode == b.returncode == 0
        assert a.stdout == b.stdout and a.stdout

    def test_simulate_gem_byte_identical(self):
        argv = ["simulate", "--mode", "gem", "--m", "40", "--alpha", "0.5",
                "--theta", "10", "--seed", "3", "--powerlaw", "--format", "csv", "--quiet"]
        a = run_cli(argv)
        b = run_cli(argv)
        assert a.returncode == 0
        assert a.stdout == b.stdout

    def test_true_lr_byte_identical(self, tmp_path):
        part = tmp_path / "part.json"
        part.write_text(json.dumps({"a": [1, 2], "r": [3, 2]}))
        pop = tmp_path / "pop.json"
        pop.write_text(json.dumps({"probs": [0.3, 0.2, 0.15, 0.1, 0.1, 0.05, 0.05, 0.05],
                                   "pop_size": 200}))
        argv = ["true-lr", "--partition", str(part), "--population", str(pop),
                "--iterations", "5000", "--burn-in", "500", "--thinning", "50",
                "--seed", "11", "--quiet"]
        a = run_cli(argv)
        b = run_cli(argv)
        assert a.returncode == 0, a.stderr
        assert a.stdout == b.stdout
