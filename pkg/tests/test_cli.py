import csv

import pytest

from vpfft import cli
from vpfft import microstructure as MS


@pytest.fixture
def micro(tmp_path):
    path = tmp_path / "grid.txt"
    path.write_text(MS.emit_grid(MS.synth_inclusion(7, 7, 0.17)))
    return path


def test_synth_stdout(capsys):
    assert cli.main(["synth", "--nx", "5", "--vf", "0.2"]) == 0
    grid = MS.load_grid(capsys.readouterr().out)
    assert grid.shape == (5, 5) and grid.phases.sum() == 5


def test_synth_file(tmp_path):
    out = tmp_path / "s.txt"
    assert cli.main(["synth", "--nx", "6", "--ny", "4", "--shape", "square", "--out", str(out)]) == 0
    assert MS.load_grid(out.read_bytes()).shape == (4, 6)


def test_synth_bad_fraction():
    assert cli.main(["synth", "--nx", "5", "--vf", "2"]) == cli.EXIT_CONFIG


def test_solve(micro, tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["solve", "--micro", str(micro), "--preset", "perfect", "--ig", "improved",
                   "--steps", "3", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(open(out / "steps.csv")))
    assert len(rows) == 3 and rows[0]["ig_mode"] == "improved"
    assert "total_nr_iters" in capsys.readouterr().out


def test_compare_trapz(micro, tmp_path):
    out = tmp_path / "cmp"
    rc = cli.main(["compare", "--micro", str(micro), "--scheme", "trapz", "--theta", "0.5",
                   "--steps", "4", "--eps-final", "0.004", "--out", str(out)])
    assert rc == 0
    assert "config.theta = 0.5" in (out / "summary.txt").read_text()


def test_compare_has_no_ig_flag(micro):
    with pytest.raises(SystemExit):
        cli.main(["compare", "--micro", str(micro), "--ig", "improved"])


def test_config_file_and_override(micro, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# desk run\nmicro = {micro}\nsteps = 5\npreset = perfect\nout = {tmp_path / 'a'}\n")
    assert cli.main(["solve", "--config", str(cfg), "--steps", "2"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "a" / "steps.csv")))
    assert len(rows) == 2


def test_config_errors(micro, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert cli.main(["solve", "--config", str(bad)]) == cli.EXIT_CONFIG
    bad.write_text("steps = many\n")
    assert cli.main(["solve", "--config", str(bad), "--micro", str(micro)]) == cli.EXIT_CONFIG
    assert cli.main(["solve"]) == cli.EXIT_CONFIG
    assert cli.main(["solve", "--micro", str(micro), "--scheme", "trapz", "--theta", "3"]) == cli.EXIT_CONFIG


def test_io_errors(tmp_path):
    assert cli.main(["solve", "--micro", str(tmp_path / "missing.txt")]) == cli.EXIT_IO
    bad = tmp_path / "bad.txt"
    bad.write_text("2 2\n0 1\n")
    assert cli.main(["solve", "--micro", str(bad)]) == cli.EXIT_IO
    assert cli.main(["solve", "--config", str(tmp_path / "none.cfg")]) == cli.EXIT_IO


def test_solver_failure(micro, tmp_path):
    rc = cli.main(["solve", "--micro", str(micro), "--steps", "1", "--newton-max", "1",
                   "--out", str(tmp_path)])
    assert rc == cli.EXIT_SOLVER


def test_incomplete_softening_exit(tmp_path):
    micro = tmp_path / "ferrite.txt"
    micro.write_text("2 2\n0 0\n0 0\n")
    rc = cli.main(["solve", "--micro", str(micro), "--preset", "softening", "--eps-final", "0.6",
                   "--steps", "6", "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_SOLVER
    assert (tmp_path / "o" / "steps.csv").exists()


def test_verify_command(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path), "--fd-points", "5"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "verify.csv")))
    assert all(r["passed"] == "1" for r in rows)
    assert "PASS fd_tangent_be" in capsys.readouterr().out
