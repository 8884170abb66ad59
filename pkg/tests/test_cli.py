import subprocess
import sys

import pytest

from fbsr.cli import format_exact, main, parse_value
from fractions import Fraction


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spec_examples(capsys):
    assert run(capsys, "bias", "--variant", "srff", "--bits", "3", "--excess", "5", "--method", "exact")[1] == "-0.046875 (-3/64)\n"
    assert run(capsys, "round", "--format", "binary8p4", "--mode", "tne", "--value", "1.0625")[1] == "1\n"
    assert run(capsys, "bias", "--variant", "srf", "--bits", "2", "--method", "bound")[1] == "0\n"


def test_bias_from_formats_and_floorsum(capsys):
    code, out, _ = run(capsys, "bias", "--variant", "srf", "--bits", "3", "--src-format", "bfloat16",
                       "--dst-format", "p3", "--method", "floorsum")
    assert (code, out) == (0, "0.015625 (1/64)\n")
    assert run(capsys, "bias", "--variant", "srff", "--bits", "3", "--excess", "5", "--method", "closed")[1].endswith("(bound)\n")


def test_round_counter(capsys):
    code, out, _ = run(capsys, "round", "--mode", "srff", "--bits", "2", "--value", "35/32",
                       "--bit-source", "counter", "--count", "4")
    assert out.split() == ["1", "1.125", "(9/8)", "1.125", "(9/8)", "1.125", "(9/8)"]


def test_exit_codes(capsys):
    assert run(capsys, "round", "--mode", "srff", "--value", "1")[0] == 2  # missing --bits
    assert run(capsys, "bias", "--bits", "20", "--excess", "20")[0] == 1  # guard
    with pytest.raises(SystemExit) as e:
        main(["nope"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["round", "--nope"])
    assert e.value.code == 2
    assert "--nope" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bias defaults\nvariant = srf\nbits = 3\nexcess = 5\n")
    assert run(capsys, "--config", str(cfg), "bias")[1] == "0.015625 (1/64)\n"
    # flags still win
    assert run(capsys, "--config", str(cfg), "bias", "--variant", "srff")[1] == "-0.046875 (-3/64)\n"
    cfg.write_text("colour = red\n")
    assert run(capsys, "--config", str(cfg), "bias")[0] == 2
    cfg.write_text("variant = tne\n")
    assert run(capsys, "--config", str(cfg), "bias")[0] == 2


def test_csv_output_is_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for i, p in enumerate(paths):
        code, out, _ = run(capsys, "--threads", str(i + 1), "fig1", "--samples", "50", "--points", "32",
                           "--seed", "4", "--out", str(p))
        assert code == 0
        assert "srff" in out
    assert paths[0].read_bytes() == paths[1].read_bytes()
    lines = paths[0].read_text().splitlines()
    assert lines[0].startswith("# ")
    assert "x,mean_srff,mean_srf" in lines


def test_qat_csv(capsys):
    code, out, err = run(capsys, "qat", "--steps", "10", "--replicas", "2")
    assert code == 0
    body = [l for l in out.splitlines() if not l.startswith("#")]
    assert body[0] == "step,loss,mean_abs_weight"
    assert len(body) == 12
    assert "stagnated=" in err


def test_helpers():
    assert format_exact(Fraction(-3, 64)) == "-0.046875 (-3/64)"
    assert format_exact(2) == "2"
    assert parse_value("1/3") == Fraction(1 / 3)
    assert parse_value("1.0625") == Fraction(17, 16)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fbsr", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "bias" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "fbsr", "formats"], capture_output=True, text=True)
    assert "bfloat16" in proc.stdout.lower()
