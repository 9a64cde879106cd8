"""End-to-end runs of the command-line entry point."""

import json

import pytest

from src.cli import EXIT_OK, EXIT_USAGE, build_parser, run


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str, name: str = "config.yml"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return _write


def test_generate_ideal(write_config, tmp_path):
    config = write_config("protocol:\n  blocks: [[2], [1]]\n")
    out = tmp_path / "state.txt"
    assert run(["generate", "--config", config, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# fidelity: 1"
    assert lines[1] == "# closed_form: 1"
    assert lines[2] == "# component 1 weight 1"
    assert len(lines) == 3 + 2 ** (2 + 1)


def test_generate_json_with_mixed_spin(write_config, tmp_path):
    config = write_config(
        "protocol:\n  vertices: 2\nerrors:\n  spin_init_fidelity: 0.9\n"
    )
    out = tmp_path / "state.json"
    assert run(["generate", "--config", config, "--out", str(out), "--format", "json"]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["fidelity"] == pytest.approx(0.9)
    assert data["closed_form"] == pytest.approx(0.9)
    assert [c["weight"] for c in data["components"]] == pytest.approx([0.9, 0.1])


def test_sweep_closed_form_only(write_config, tmp_path):
    config = write_config(
        """
sweep:
  mechanism: loss
  layout: ghz
  grid:
    p_loss: [0.01]
    photons: [1, 2, 3]
"""
    )
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--config", config, "--closed-form-only", "--out", str(out)]
    assert run(args) == EXIT_OK
    header, *rows = out.read_text().splitlines()
    assert header == "mechanism,p_loss,photons,closed_form,simulated,difference"
    assert rows[2] == f"loss,0.01,3,{0.99**3:.12g},,"


def test_sweep_with_simulation(write_config, tmp_path):
    config = write_config(
        "protocol:\n  vertices: 2\nsweep:\n  mechanism: step5b\n  grid:\n    dy: [0.0, 0.3]\n"
    )
    out = tmp_path / "sweep.json"
    assert run(["sweep", "--config", config, "--format", "json", "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert all(row["difference"] < 1e-9 for row in data)


def test_fusion_preset(write_config, tmp_path):
    config = write_config("fusion:\n  preset: ideal\n")
    out = tmp_path / "fusion.json"
    assert run(["fusion", "--config", config, "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["scenario"] == "ideal"
    assert data["success_probability"] == pytest.approx(0.5)
    assert "boosted" not in data


def test_fusion_with_boost(write_config, tmp_path):
    config = write_config(
        "fusion:\n  preset: ideal\nboost:\n  m: 2\n  eta: 1.0\n  trials: 20000\n  seed: 3\n"
    )
    out = tmp_path / "fusion.json"
    assert run(["fusion", "--config", config, "--out", str(out)]) == EXIT_OK
    boosted = json.loads(out.read_text())["boosted"]
    assert boosted["closed_form"] == pytest.approx(0.75)
    assert boosted["passed"] is True


def test_boost_scan_without_config(tmp_path):
    out = tmp_path / "boost.csv"
    args = ["boost-scan", "--eta", "0.8", "0.95", "--m-max", "4", "--closed-form-only"]
    assert run([*args, "--out", str(out)]) == EXIT_OK
    header, *rows = out.read_text().splitlines()
    assert header == "eta,m,closed_form,monte_carlo,stderr,optimal_m"
    assert len(rows) == 8
    assert rows[0].startswith("0.8,1,")


def test_boost_scan_records(tmp_path):
    out = tmp_path / "boost.csv"
    records = tmp_path / "trials.jsonl"
    args = ["boost-scan", "--eta", "0.9", "--m-max", "1", "--trials", "50", "--seed", "1"]
    assert run([*args, "--out", str(out), "--records", str(records)]) == EXIT_OK
    lines = records.read_text().splitlines()
    assert len(lines) == 50
    assert json.loads(lines[0])["trial"] == 0


def test_boost_scan_records_cover_every_grid_point(tmp_path):
    out = tmp_path / "boost.csv"
    records = tmp_path / "trials.jsonl"
    args = ["boost-scan", "--eta", "0.8", "0.95", "--m-max", "3", "--trials", "400"]
    args += ["--seed", "2", "--records-trials", "30"]
    assert run([*args, "--out", str(out), "--records", str(records)]) == EXIT_OK
    parsed = [json.loads(line) for line in records.read_text().splitlines()]
    assert len(parsed) == 2 * 3 * 30
    points = {(r["eta"], r["m"]) for r in parsed}
    assert points == {(eta, m) for eta in (0.8, 0.95) for m in (1, 2, 3)}
    assert max(r["attempts_used"] for r in parsed if r["m"] == 3) == 3
    assert all(r["attempts_used"] <= r["m"] for r in parsed)


def test_repeated_runs_are_byte_identical(tmp_path):
    outputs = []
    for i in range(2):
        out = tmp_path / f"boost-{i}.csv"
        args = ["boost-scan", "--eta", "0.9", "--m-max", "2", "--trials", "2000", "--seed", "5"]
        run([*args, "--out", str(out)])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


class TestUsageErrors:
    def test_missing_config(self, tmp_path):
        assert run(["generate", "--config", str(tmp_path / "absent.yml")]) == EXIT_USAGE

    def test_bad_yaml(self, write_config):
        config = write_config("protocol: [unclosed\n")
        assert run(["generate", "--config", config]) == EXIT_USAGE

    def test_invalid_protocol(self, write_config):
        config = write_config("protocol:\n  blocks: [[0]]\n")
        assert run(["generate", "--config", config]) == EXIT_USAGE

    def test_unknown_command(self):
        assert run(["teleport"]) == EXIT_USAGE

    def test_missing_section(self, write_config):
        config = write_config("protocol:\n  vertices: 1\n")
        assert run(["sweep", "--config", config]) == EXIT_USAGE

    def test_negative_trials(self):
        assert run(["boost-scan", "--trials", "0"]) == EXIT_USAGE

    def test_help_exits_cleanly(self):
        assert run(["--help"]) == EXIT_OK


def test_parser_commands():
    parser = build_parser()
    args = parser.parse_args(["sweep", "--config", "x.yml", "--workers", "2"])
    assert args.command == "sweep"
    assert args.workers == 2
