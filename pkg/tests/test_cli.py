"""CLI surface: flags, reports, exit codes."""

import numpy as np
import pytest

from hlcbayes.audio import FrameConfig, synthesize_demo_clip
from hlcbayes.cli import main
from hlcbayes.fitting import Segment, TrainingSet
from hlcbayes.model import HearingLossParams, synthesize_pairs, theta_to_config, Theta


@pytest.fixture
def training_file(tmp_path):
    rng = np.random.default_rng(7)
    clean = rng.uniform(50.0, 85.0, size=2000)
    s, g = synthesize_pairs(clean, HearingLossParams(2.0, -90.0), noise_sd=3.0, rng=rng)
    path = tmp_path / "train.jsonl"
    path.write_text(TrainingSet([Segment(s, g)]).to_jsonl())
    return path


class TestSpCommand:
    def test_synthetic_run_prints_the_ratio(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = main(
            [
                "sp",
                "--alpha", "2", "--beta", "-90", "--obs-var", "10", "--gain-prec", "1",
                "--levels", "80,55", "--steps", "200",
                "--output", str(out),
            ]
        )
        captured = capsys.readouterr().out
        assert code == 0
        assert "CR = 2" in captured
        assert out.read_text().startswith("k,s_dB,g_mean_dB,g_sd_dB")

    def test_missing_input_file_exits_two(self, capsys):
        code = main(["sp", "--input", "/no/such/file.wav"])
        assert code == 2
        assert "/no/such/file.wav" in capsys.readouterr().err

    def test_wav_processing_with_config(self, tmp_path, capsys):
        clip = synthesize_demo_clip(tmp_path / "in.wav", FrameConfig(), seconds=2.0)
        cfg = tmp_path / "theta.cfg"
        cfg.write_text(theta_to_config(Theta.make(2.0, -90.0, 10.0, 1.0)))
        out = tmp_path / "out.wav"
        code = main(
            ["sp", "--input", str(clip), "--output", str(out), "--config", str(cfg)]
        )
        assert code == 0
        assert out.exists()
        assert "CR = 2" in capsys.readouterr().out


class TestPeCommand:
    def test_recovery_report(self, training_file, capsys):
        code = main(["pe", "--data", str(training_file), "--iters", "200"])
        assert code == 0
        out = capsys.readouterr().out
        values = {
            line.split(" = ")[0]: float(line.split(" = ")[1])
            for line in out.strip().splitlines()
        }
        assert 1.7 <= values["alpha_mean"] <= 2.3
        assert -105.0 <= values["beta_mean"] <= -75.0

    def test_empty_data_reports_priors_with_warning(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = main(["pe", "--data", str(empty)])
        captured = capsys.readouterr()
        assert code == 0
        assert "warning" in captured.err.lower()
        assert "alpha_mean = 1.5" in captured.out

    def test_missing_data_file(self, capsys):
        assert main(["pe", "--data", "/no/train.jsonl"]) == 2


class TestMcCommand:
    def test_report_contains_the_score(self, training_file, tmp_path, capsys):
        report = tmp_path / "mc.txt"
        code = main(
            ["mc", "--data", str(training_file), "--omega", "0.25", "--output", str(report)]
        )
        assert code == 0
        text = report.read_text()
        assert "BF_dHart = " in text
        assert "posterior_mass_in_O = " in text

    def test_stdout_report(self, training_file, capsys):
        code = main(["mc", "--data", str(training_file)])
        assert code == 0
        assert "BF_ratio = " in capsys.readouterr().out
