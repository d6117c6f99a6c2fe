import math
import subprocess
import sys

import pytest

from escmeasure.cli import main
from escmeasure.schroeder import Linearizer


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_fixed_point(capsys, tmp_path):
    code, out, _ = run(capsys, "fixed-point", "--beta", "0.2", "--out", str(tmp_path))
    assert code == 0
    xi, lam = (float(tok.split("=")[1]) for tok in out.split())
    assert out.startswith("xi=12.713") and " lambda=2.542" in out
    assert math.exp(0.2 * xi) == pytest.approx(xi, rel=1e-12)
    assert (tmp_path / "manifest.txt").read_text().startswith("subcommand=fixed-point\n")


def test_escape_without_region(capsys, tmp_path):
    code, _, err = run(capsys, "escape", "--family", "sin", "--out", str(tmp_path))
    assert code == 2 and "--region" in err


def test_parameter_error_names_flag(capsys, tmp_path):
    code, _, err = run(capsys, "fixed-point", "--beta", "0.5", "--out", str(tmp_path))
    assert code == 2 and "--beta" in err
    code, _, err = run(capsys, "cui-cond", "--c", "0.9", "--out", str(tmp_path))
    assert code == 2 and "--c" in err


def test_numeric_error_exit_code(capsys, tmp_path, monkeypatch):
    from escmeasure import cli
    from escmeasure.errors import NumericError

    def boom(beta):
        raise NumericError("bisection stalled", {"last_bracket": (1.0, 2.0)})

    monkeypatch.setattr(cli.schroeder, "repelling_fixed_point", boom)
    code, _, err = run(capsys, "fixed-point", "--out", str(tmp_path))
    assert code == 3 and "last_bracket" in err


def test_series_geometric(capsys, tmp_path):
    code, out, _ = run(capsys, "series", "--kind", "geometric-phi", "--beta", "0.2", "--x0", "20", "--k", "60",
                       "--out", str(tmp_path))
    assert code == 0
    lin = Linearizer.from_beta(0.2)
    closed = 1 / ((lin.lam - 1) * float(lin.phi(20.0)))
    last = out.strip().splitlines()[-1]
    assert last.startswith("verdict=converged limit=")
    assert float(last.split("=")[-1]) == pytest.approx(closed, rel=1e-10)
    rows = (tmp_path / "series.csv").read_text().splitlines()
    assert rows[0] == "k,term_lo,term_hi,partial_lo,partial_hi" and len(rows) == 61


def test_series_diverging_verdict(capsys, tmp_path):
    code, out, _ = run(capsys, "series", "--kind", "theta0-E-iterates", "--k", "2000", "--out", str(tmp_path))
    assert code == 0 and out.strip().splitlines()[-1].startswith("verdict=diverging rate=")


def test_manifest_replay_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "escape", "scan", "--family", "exp", "--scale", "0.1", "--region", "-3:3:-3:3",
               "--res", "64", "--out", str(a))[0] == 0
    assert run(capsys, "--config", str(a / "manifest.txt"), "escape", "--out", str(b))[0] == 0
    for name in ("density.csv", "density.pgm"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_workers_do_not_change_output(capsys, tmp_path):
    outs = []
    for w in ("1", "8"):
        d = tmp_path / w
        run(capsys, "escape", "scan", "--family", "sin", "--region", "-3:3:-3:3", "--res", "64",
            "--workers", w, "--out", str(d))
        outs.append((d / "density.pgm").read_bytes())
    assert outs[0] == outs[1]


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("beta=0.2\nbogus=1\n")
    code, _, err = run(capsys, "--config", str(cfg), "fixed-point", "--out", str(tmp_path))
    assert code == 2 and "bogus" in err


def test_config_then_flag_override(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("beta=0.1\n")
    _, out, _ = run(capsys, "--config", str(cfg), "fixed-point", "--out", str(tmp_path))
    assert out.startswith("xi=")
    _, out2, _ = run(capsys, "--config", str(cfg), "fixed-point", "--beta", "0.2", "--out", str(tmp_path))
    assert out2.startswith("xi=12.713") and out != out2


def test_hexfloat_round_trip(capsys, tmp_path):
    run(capsys, "theta", "--r-min", "100", "--r-max", "1000", "--points", "2", "--hexfloat", "--out", str(tmp_path))
    rows = (tmp_path / "theta.csv").read_text().splitlines()
    assert rows[0] == "r,theta"
    assert float.fromhex(rows[1].split(",")[0]) == 100.0


def test_decimal_round_trip(capsys, tmp_path):
    run(capsys, "schroeder", "--out", str(tmp_path))
    rows = (tmp_path / "schroeder.csv").read_text().splitlines()
    for cell in rows[1].split(","):
        assert repr(float(cell)) == cell


@pytest.mark.parametrize("argv", [
    ["prox-report"],
    ["zeros", "--count", "2000", "--tail-tol", "1e-2"],
    ["product-verify", "--count", "3000", "--tail-tol", "1e-3", "--r", "100,300", "--angles", "3", "--boundary",
     "--boundary-r-max", "300"],
    ["growth-report", "--points", "3"],
    ["el", "--points", "2"],
    ["cui-cond"],
    ["tsuji"],
    ["tracts", "--region", "-10:10:-10:10"],
    ["lift", "--family", "exp", "--scale", "0.1", "--r0", "1", "--region", "-10:10:-10:10", "--w", "1.5+0.2j"],
    ["escape", "classify", "--z", "100", "--resc", "50"],
    ["density-bound", "--kmax", "1000"],
    ["nevanlinna", "--r", "5"],
])
def test_every_subcommand_runs(capsys, tmp_path, argv):
    code, out, err = run(capsys, *argv, "--out", str(tmp_path))
    assert code == 0, err
    assert out
    assert (tmp_path / "manifest.txt").exists()


def test_zeros_file_is_hex(capsys, tmp_path):
    run(capsys, "zeros", "--count", "100", "--tail-tol", "1", "--out", str(tmp_path))
    lines = (tmp_path / "zeros.txt").read_text().split()
    assert float.fromhex(lines[0]) == 1.0 and len(lines) == 100


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "escmeasure", "fixed-point", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("xi=")
