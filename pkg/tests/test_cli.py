"""Command line client tests, exercised against the in-process service."""

import pytest

from vppsim.cli import build_parser, main


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "tiny.txt"
    path.write_text(
        "[scenario]\n"
        "name = cli\n"
        "fleet = basecase\n"
        "variant = safe\n"
        "episodes = 2\n"
        "eval_episodes = 1\n"
        "warmup_episodes = 2\n"
        "hidden = 8,8\n"
        "batch_size = 8\n"
        "buffer_capacity = 512\n"
        "checkpoint_every = 2\n"
        "seed = 5\n"
        "res_noise_frac = 0\n"
        "rival_noise = false\n"
    )
    return path


def test_parser_covers_all_subcommands():
    parser = build_parser()
    assert parser.parse_args(["serve", "--port", "9000"]).port == 9000
    args = parser.parse_args(["train", "scn.txt", "--out", "d", "--local"])
    assert args.command == "train" and args.local
    assert parser.parse_args(
        ["eval", "scn.txt", "--out", "d", "--episodes", "3"]).episodes == 3
    assert parser.parse_args(
        ["baseline", "scn.txt", "--policy", "no_vpp", "--out", "d"]
    ).policy == "no_vpp"
    args = parser.parse_args(
        ["report", "--runs", "a", "b", "--baselines", "c", "--out", "d"])
    assert args.runs == ["a", "b"] and args.baselines == ["c"]


def test_train_eval_baseline_report_roundtrip(scenario_file, tmp_path, capsys):
    run_dir = tmp_path / "run"
    rc = main(["train", str(scenario_file), "--out", str(run_dir),
               "--local", "--poll", "0.05"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "episodes_run = 2" in out
    assert (run_dir / "checkpoint.npz").exists()

    rc = main(["eval", str(scenario_file), "--out", str(run_dir),
               "--local", "--poll", "0.05"])
    assert rc == 0
    assert (run_dir / "eval_hours.csv").exists()

    baseline_dir = tmp_path / "pt"
    rc = main(["baseline", str(scenario_file), "--policy", "price_taker",
               "--out", str(baseline_dir), "--local", "--poll", "0.05"])
    assert rc == 0
    assert (baseline_dir / "baseline_hours.csv").exists()

    report_dir = tmp_path / "rep"
    rc = main(["report", "--runs", str(run_dir),
               "--baselines", str(baseline_dir),
               "--out", str(report_dir), "--local", "--poll", "0.05"])
    assert rc == 0
    assert (report_dir / "variant_summary.csv").exists()
    assert (report_dir / "report.md").exists()


def test_eval_without_checkpoint_fails_cleanly(scenario_file, tmp_path, capsys):
    rc = main(["eval", str(scenario_file), "--out", str(tmp_path / "nothing"),
               "--local", "--poll", "0.05"])
    assert rc == 2
    assert "checkpoint" in capsys.readouterr().err


def test_bad_scenario_file_is_a_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("[scenario]\nname = x\nmystery_knob = 1\n")
    rc = main(["train", str(path), "--out", str(tmp_path / "d"), "--local"])
    assert rc == 2
    assert "mystery_knob" in capsys.readouterr().err


def test_unknown_baseline_policy_is_rejected(scenario_file, tmp_path, capsys):
    rc = main(["baseline", str(scenario_file), "--policy", "clairvoyant",
               "--out", str(tmp_path / "d"), "--local", "--poll", "0.05"])
    assert rc == 2
    assert "policy" in capsys.readouterr().err
