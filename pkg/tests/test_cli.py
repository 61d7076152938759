import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ellrad.cli import main
from ellrad.phantom import canonical_phantoms, read_grid_csv, save_phantom
from ellrad.geometry import make_geometry
from ellrad.transform import read_sinogram


@pytest.fixture
def disk_json(tmp_path):
    g = make_geometry(math.pi / 4)
    path = tmp_path / "disk.json"
    save_phantom(canonical_phantoms(g)["offset_disk"], path)
    return path


def test_phantom_command(tmp_path, disk_json):
    out = tmp_path / "out"
    rc = main(["phantom", "--phantom", str(disk_json), "--n", "32",
               "--supersample", "-o", str(out)])
    assert rc == 0
    grid = read_grid_csv(out / "phantom.csv")
    assert grid.n == 32
    assert (out / "phantom.pgm").exists()
    assert (out / "phantom.pgm.range.txt").exists()
    meta = json.loads((out / "phantom_meta.json").read_text())
    assert meta["supersample"] is True


def test_forward_adjoint_recon_pipeline(tmp_path, disk_json):
    out = tmp_path / "out"
    rc = main(["forward", "--alpha", "0.5", "--phantom", str(disk_json),
               "--ns", "36", "--nl", "30", "-o", str(out)])
    assert rc == 0
    sino_path = out / "run.sino.txt"
    sino = read_sinogram(sino_path)
    assert sino.n_s == 36 and sino.n_l == 30
    assert sino.geometry.alpha == 0.5
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["n_s"] == 36

    rc = main(["adjoint", "--sino", str(sino_path), "--n", "24",
               "-o", str(out)])
    assert rc == 0
    img = read_grid_csv(out / "adjoint.csv")
    assert img.n == 24
    assert abs(img.extent - math.cos(0.5)) < 1e-15

    rc = main(["recon", "--mode", "lambda", "--sino", str(sino_path),
               "--n", "24", "-o", str(out)])
    assert rc == 0
    lam = read_grid_csv(out / "recon_lambda.csv")
    assert np.any(lam.values != 0.0)

    rc = main(["recon", "--mode", "normal", "--phantom", str(disk_json),
               "--ns", "24", "--nl", "20", "--n", "16", "-o", str(out)])
    assert rc == 0
    assert (out / "recon_normal.csv").exists()


def test_forward_binary_variant(tmp_path, disk_json):
    out = tmp_path / "out"
    rc = main(["forward", "--phantom", str(disk_json), "--ns", "12",
               "--nl", "10", "--binary", "--name", "bin", "-o", str(out)])
    assert rc == 0
    sino = read_sinogram(out / "bin.sino.bin")
    assert sino.values.shape == (12, 10)


def test_verify_command(tmp_path):
    out = tmp_path / "cert"
    rc = main(["verify", "--alpha", "1.0", "--grid", "64", "-o", str(out)])
    assert rc == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["all_passed"] is True
    assert all(c["passed"] for c in cert["checks"])
    text = (out / "certificate.txt").read_text()
    assert "all checks passed" in text


def test_config_file_precedence(tmp_path, disk_json):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ns": 24, "nl": 20}))
    out1 = tmp_path / "o1"
    rc = main(["forward", "--phantom", str(disk_json), "--config", str(cfg),
               "-o", str(out1)])
    assert rc == 0
    assert read_sinogram(out1 / "run.sino.txt").n_s == 24

    out2 = tmp_path / "o2"
    rc = main(["forward", "--phantom", str(disk_json), "--config", str(cfg),
               "--ns", "28", "-o", str(out2)])
    assert rc == 0
    assert read_sinogram(out2 / "run.sino.txt").n_s == 28


def test_error_codes_and_prefix(tmp_path, capsys, disk_json):
    out = tmp_path / "out"

    rc = main(["forward", "--phantom", str(tmp_path / "missing.json"),
               "-o", str(out)])
    assert rc == 1
    assert capsys.readouterr().err.startswith("ERROR 1:")

    rc = main(["forward", "--phantom", str(disk_json), "--bogus-flag",
               "-o", str(out)])
    assert rc == 1
    assert capsys.readouterr().err.startswith("ERROR 1:")

    rc = main(["forward", "--phantom", str(disk_json), "--alpha", "1.6",
               "-o", str(out)])
    assert rc == 1
    assert "ERROR 1:" in capsys.readouterr().err

    rc = main(["forward", "--phantom", str(disk_json), "--ns", "2",
               "-o", str(out)])
    assert rc == 1
    assert "at least 4" in capsys.readouterr().err

    bad_sino = tmp_path / "bad.sino.txt"
    bad_sino.write_text("alpha=0.5\nnonsense\n")
    rc = main(["adjoint", "--sino", str(bad_sino), "-o", str(out)])
    assert rc == 1
    assert "ERROR 1:" in capsys.readouterr().err

    rc = main(["recon", "--sino", str(tmp_path / "a"), "--phantom",
               str(tmp_path / "b"), "-o", str(out)])
    assert rc == 1
    assert "exactly one input" in capsys.readouterr().err

    rc = main(["recon", "-o", str(out)])
    assert rc == 1
    capsys.readouterr()


def test_help_lists_flags(capsys):
    assert main(["--help"]) == 0
    top = capsys.readouterr().out
    for cmd in ("phantom", "forward", "adjoint", "recon", "verify"):
        assert cmd in top
    assert main(["forward", "--help"]) == 0
    fw = capsys.readouterr().out
    for flag in ("--ns", "--nl", "--panels", "--nodes", "--eps-l",
                 "--binary", "--workers", "--backend", "--config"):
        assert flag in fw
    assert "default" in fw


def test_module_entry_point(tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "ellrad", "verify", "--alpha", "0.9",
         "--grid", "32", "-o", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "certificate.json").exists()
