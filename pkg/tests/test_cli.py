import shutil
import subprocess
import sys

import pytest

from collchain.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from collchain.pipeline import read_csv, read_manifest

SHORT = "[time]\nt_min = 0.1\nt_max = 100\npoints = 5\n"


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(SHORT)
    return str(path)


def test_parser_knows_every_subcommand():
    parser = build_parser()
    for name in ("spectrum", "tensor", "evolve", "steady", "classify", "run", "sweep", "reproduce"):
        args = parser.parse_args([name, "fig2"] if name == "reproduce" else [name])
        assert args.command == name
        assert args.threads == 1 and args.seed is None


def test_spectrum_to_stdout(capsys):
    assert main(["spectrum"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "# format_version: 1"
    assert out[1] == "j,energy,n"
    assert len(out) == 2 + 8
    assert out[2].startswith("0,0,0")


def test_tensor_and_classify(tmp_path, cfg, capsys):
    out = str(tmp_path / "out")
    assert main(["tensor", "--config", cfg, "--out", out, "--variant", "Narrow"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "tp_defect:" in text and (tmp_path / "out" / "tensor.txt").exists()
    assert main(["classify", "--config", cfg, "--out", out, "--variant", "Narrow"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "is_TIO: true" in text and "is_IO: true" in text


def test_evolve_and_steady(tmp_path, cfg, capsys):
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == EXIT_OK
    data = read_csv(out / "trajectory.csv")
    assert len(data["t"]) == 5
    assert main(["steady", "--config", cfg, "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "beta_eff:" in text and (out / "steady.csv").exists()


def test_run_and_sweep(tmp_path, capsys):
    path = tmp_path / "sweep.cfg"
    path.write_text(SHORT + "[sweep]\nparameter = epsilon\nvalues = 0.1, 0.01\n")
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(path), "--out", str(out), "--threads", "2"]) == EXIT_OK
    assert read_manifest(out / "manifest.txt")["status"] == "ok"
    assert (out / "epsilon=0.01" / "steady.csv").exists()

    plain = tmp_path / "plain.cfg"
    plain.write_text(SHORT)
    assert main(["sweep", "--config", str(plain), "--out", str(out)]) == EXIT_CONFIG
    assert main(["run", "--config", str(plain), "--out", str(tmp_path / "single")]) == EXIT_OK


def test_config_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[chain]\nepsilon = -1\n")
    assert main(["spectrum", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text("[chain]\nwidth = 3\n")
    assert main(["spectrum", "--config", str(bad)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main(["spectrum", "--variant", "Fancy"]) == EXIT_CONFIG


def test_runtime_errors_exit_one(tmp_path, capsys):
    path = tmp_path / "c.cfg"
    path.write_text("[chain]\nepsilon = 1.5\n")
    # the band-separated variants need epsilon < h/4
    assert main(["tensor", "--config", str(path), "--variant", "Narrow", "--out", str(tmp_path)]) == EXIT_RUNTIME
    assert "BandOverlap" in capsys.readouterr().err
    assert main(["reproduce", "fig7", "--out", str(tmp_path)]) == EXIT_RUNTIME


@pytest.mark.skipif(shutil.which("collchain") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["collchain", "spectrum"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("# format_version: 1")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "collchain.cli", "spectrum"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert "j,energy,n" in res.stdout
