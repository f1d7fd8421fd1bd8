"""End-to-end exercises of the command line interface.

Every test drives ``obslab.cli.main`` in-process with a config file in a
temporary directory and inspects exit codes, stdout/stderr, and the files
written into the experiment directory.
"""

import csv
import json
import math

import numpy as np
import pytest

from obslab.cli import main
from obslab.spectral import load_eigenbasis
from obslab.surface import build_torus


def write_config(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv):
    return main(argv)


def only_outdir(base):
    entries = [p for p in base.iterdir() if p.is_dir()]
    assert len(entries) == 1, f"expected one experiment dir, got {entries}"
    return entries[0]


def read_rows(outdir):
    with open(outdir / "results.csv") as fh:
        return list(csv.DictReader(fh))


def rows_for(rows, quantity):
    return [r for r in rows if r["quantity"] == quantity]


def single_value(rows, quantity):
    matches = rows_for(rows, quantity)
    assert len(matches) == 1, f"{quantity}: {matches}"
    return float(matches[0]["value"])


# ---------------------------------------------------------------------------
# mesh


def test_mesh_torus_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, "surface.kind = torus\nsurface.n = 8\n")
    out = tmp_path / "runs"
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 0
    outdir = only_outdir(out)
    assert outdir.name.startswith("mesh-")
    for fname in ("config.txt", "meta.json", "mesh.txt",
                  "results.csv", "results.json"):
        assert (outdir / fname).exists(), fname
    rows = read_rows(outdir)
    assert single_value(rows, "area") == pytest.approx(1.0, abs=1e-12)
    assert single_value(rows, "euler_characteristic") == 0
    assert single_value(rows, "n_vertices") == 81
    assert single_value(rows, "n_triangles") == 128
    assert single_value(rows, "n_quotient") == 64
    # uniform right triangles on a unit torus at n=8
    assert single_value(rows, "min_chart_area") == pytest.approx(
        0.5 / 64, rel=1e-12)
    text = capsys.readouterr().out
    assert "surface=torus" in text
    assert "euler_characteristic=0" in text


def test_mesh_rerun_needs_force(tmp_path, capsys):
    cfg = write_config(tmp_path, "surface.kind = torus\nsurface.n = 8\n")
    out = tmp_path / "runs"
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 0
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 4
    err = capsys.readouterr().err
    assert "io error" in err
    assert "--force" in err
    assert run(["mesh", "--config", cfg, "--out", str(out), "--force"]) == 0


def test_mesh_bolza_area(tmp_path):
    cfg = write_config(tmp_path, "surface.kind = bolza\nsurface.refine = 4\n")
    out = tmp_path / "runs"
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(only_outdir(out))
    area = single_value(rows, "area")
    assert abs(area - 4 * math.pi) / (4 * math.pi) < 0.01
    assert single_value(rows, "euler_characteristic") == -2
    assert single_value(rows, "n_quotient") == 1022


def test_unknown_surface_kind_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "surface.kind = klein\n")
    assert run(["mesh", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert "surface.kind" in err


@pytest.mark.parametrize("text, fragment", [
    ("surface.sides = 8\n", "unknown config key"),
    ("surface.n = 8\nsurface.n = 16\n", "duplicate config key"),
    ("surface.n = eight\n", "surface.n"),
    ("just some words\n", "expected 'key = value'"),
], ids=["unknown-key", "duplicate-key", "bad-int", "no-assignment"])
def test_config_parse_errors_exit_2(tmp_path, capsys, text, fragment):
    cfg = write_config(tmp_path, text)
    assert run(["mesh", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert fragment in capsys.readouterr().err


# ---------------------------------------------------------------------------
# spectrum


def test_spectrum_torus_small(tmp_path):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    outdir = only_outdir(out)
    rows = read_rows(outdir)
    lam_rows = rows_for(rows, "lambda")
    assert [int(r["h_or_k"]) for r in lam_rows] == list(range(8))
    lams = [float(r["value"]) for r in lam_rows]
    assert lams[0] <= 1e-9
    for lam in lams[1:5]:
        assert abs(lam - 4 * math.pi ** 2) / (4 * math.pi ** 2) < 0.02
    assert single_value(rows, "orthonormality_defect") < 1e-12
    assert single_value(rows, "residual_max") <= 1e-8
    assert 0.5 <= single_value(rows, "weyl_ratio") <= 1.6
    basis = load_eigenbasis(outdir / "basis.txt", build_torus(16, 1.0))
    assert basis.n_modes == 8
    np.testing.assert_allclose(basis.lambdas, lams, rtol=1e-12, atol=1e-12)


def test_spectrum_bolza_extrapolates_lambda1(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = bolza",
        "surface.refine = 3",
        "spectrum.n_modes = 6",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(only_outdir(out))
    extrap = single_value(rows, "lambda1_extrapolated")
    err_bar = single_value(rows, "lambda1_error_bar")
    assert 3.4 < extrap < 4.2
    assert 0.05 < err_bar < 0.5
    assert "extrapolated" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# gramian


def test_gramian_full_region_closed_form(tmp_path):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
        "region.kind = full",
        "time.T = 0.5, 1.0, 2.0",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["gramian", "--config", cfg, "--out", str(out)]) == 0
    outdir = only_outdir(out)
    assert (outdir / "region.txt").exists()
    rows = read_rows(outdir)
    k_rows = rows_for(rows, "K")
    assert len(k_rows) == 3
    for row in k_rows:
        T = float(row["T"])
        assert float(row["value"]) == pytest.approx(1.0 / T, rel=1e-9)
    lam_rows = rows_for(rows, "lambda_min")
    for row in lam_rows:
        assert float(row["value"]) == pytest.approx(float(row["T"]), rel=1e-9)
    ks = [float(r["value"]) for r in k_rows]
    assert ks == sorted(ks, reverse=True)


# ---------------------------------------------------------------------------
# control


def test_control_full_region(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
        "region.kind = full",
        "time.T = 1.0",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["control", "--config", cfg, "--out", str(out)]) == 0
    outdir = only_outdir(out)
    assert (outdir / "control.csv").exists()
    rows = read_rows(outdir)
    assert single_value(rows, "residual_T_rel") <= 1e-10
    assert single_value(rows, "K") == pytest.approx(1.0, rel=1e-9)
    assert single_value(rows, "energy_defect") <= 1e-9
    with open(outdir / "control_diagnostics.json") as fh:
        diag = json.load(fh)
    assert diag["optimality_ok"] is True
    assert diag["not_observable"] is False
    text = capsys.readouterr().out
    assert "terminal residual" in text
    assert "control energy" in text
    assert ": ok" in text


def test_control_unobservable_region_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 25",
        "region.kind = vertices",
        "region.vertices = 0",
        "time.T = 1.0",
        "hum.epsilon = 1e-8",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["control", "--config", cfg, "--out", str(out)]) == 3
    err = capsys.readouterr().err
    assert "numerical failure" in err
    assert "cannot synthesize" in err


def test_control_rejects_multiple_horizons(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
        "time.T = 0.5, 1.0",
    ]) + "\n")
    assert run(["control", "--config", cfg,
                "--out", str(tmp_path / "r")]) == 2
    assert "single horizon" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep


def test_sweep_windowed_and_wave_tables(tmp_path):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 24",
        "region.kind = strip",
        "region.width = 0.3",
        "time.T = 1.0",
        "windows.k = 5, 6",
        "windows.h = 0.2",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(only_outdir(out))
    kk = rows_for(rows, "K_k")
    assert sorted(int(r["h_or_k"]) for r in kk) == [5, 6]
    for row in kk:
        value = float(row["value"])
        assert math.isnan(value) or value > 0
    wave = rows_for(rows, "K_wave")
    assert len(wave) == 1
    assert float(wave[0]["h_or_k"]) == pytest.approx(0.2)
    assert float(wave[0]["T"]) == pytest.approx(math.log(5.0), rel=1e-9)
    assert float(wave[0]["value"]) > 0


def test_sweep_spillover_band_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 24",
        "region.kind = strip",
        "region.width = 0.3",
        "time.T = 1.0",
        "windows.k = 5, 7",
    ]) + "\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "r")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_sweep_empty_grid_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
    ]) + "\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "sweep grid is empty" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# check


def test_check_suite_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 16",
        "region.kind = strip",
        "region.width = 0.3",
        "time.T = 1.0",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["check", "--config", cfg, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "checks passed: 21/21" in text
    assert "FAIL" not in text
    # the pass flag is an extra column, carried by the json sink only
    with open(only_outdir(out) / "results.json") as fh:
        results = json.load(fh)["results"]
    check_rows = [r for r in results if r["quantity"].startswith("check.")]
    assert len(check_rows) == 21
    assert all(r["passed"] is True for r in check_rows)


def test_check_flags_corrupted_basis(tmp_path, capsys):
    spec_cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
    ]) + "\n", name="spec.cfg")
    out = tmp_path / "spec_runs"
    assert run(["spectrum", "--config", spec_cfg, "--out", str(out)]) == 0
    basis_path = only_outdir(out) / "basis.txt"

    # overwrite mode 1 with a copy of mode 0 so the basis loses orthogonality
    lines = basis_path.read_text().splitlines()
    n_modes, nv = (int(t) for t in lines[0].split())
    assert n_modes == 8
    lines[3 + nv:3 + 2 * nv] = lines[2:2 + nv]
    basis_path.write_text("\n".join(lines) + "\n")

    chk_cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        f"check.basis_file = {basis_path}",
        "hum.epsilon = 1e-8",
        "time.T = 1.0",
    ]) + "\n", name="chk.cfg")
    capsys.readouterr()
    assert run(["check", "--config", chk_cfg,
                "--out", str(tmp_path / "chk_runs")]) == 3
    captured = capsys.readouterr()
    assert "failed checks:" in captured.err
    assert "spectrum.orthonormality" in captured.err
    assert "FAIL" in captured.out


# ---------------------------------------------------------------------------
# determinism and bookkeeping


def test_reruns_are_byte_identical(tmp_path):
    text = "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
        "region.kind = strip",
        "region.width = 0.3",
        "time.T = 1.0",
    ]) + "\n"
    cfg = write_config(tmp_path, text)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(["control", "--config", cfg, "--out", str(out1)]) == 0
    assert run(["control", "--config", cfg, "--out", str(out2)]) == 0
    dir1, dir2 = only_outdir(out1), only_outdir(out2)
    assert dir1.name == dir2.name
    for fname in ("results.csv", "results.json", "config.txt", "control.csv"):
        assert (dir1 / fname).read_bytes() == (dir2 / fname).read_bytes(), fname


def test_seed_changes_experiment_id_and_state(tmp_path):
    cfg = write_config(tmp_path, "\n".join([
        "surface.kind = torus",
        "surface.n = 16",
        "spectrum.n_modes = 8",
        "time.T = 1.0",
    ]) + "\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(["control", "--config", cfg, "--out", str(out1),
                "--seed", "0"]) == 0
    assert run(["control", "--config", cfg, "--out", str(out2),
                "--seed", "1"]) == 0
    dir1, dir2 = only_outdir(out1), only_outdir(out2)
    assert dir1.name != dir2.name
    with open(dir1 / "meta.json") as fh:
        assert json.load(fh)["seed"] == 0
    with open(dir2 / "meta.json") as fh:
        assert json.load(fh)["seed"] == 1
    norm1 = single_value(read_rows(dir1), "control_norm_sq")
    norm2 = single_value(read_rows(dir2), "control_norm_sq")
    assert norm1 != norm2


def test_config_echo_is_canonical(tmp_path):
    cfg = write_config(tmp_path, "\n".join([
        "time.T = 1.0   # horizon",
        "surface.n = 16",
        "",
        "surface.kind = torus",
    ]) + "\n")
    out = tmp_path / "runs"
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 0
    echo = (only_outdir(out) / "config.txt").read_text()
    assert echo == "surface.kind = torus\nsurface.n = 16\ntime.T = 1.0\n"


def test_quiet_suppresses_stdout(tmp_path, capsys):
    cfg = write_config(tmp_path, "surface.kind = torus\nsurface.n = 8\n")
    assert run(["mesh", "--config", cfg, "--out", str(tmp_path / "runs"),
                "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_meta_records_command_and_config_hash(tmp_path):
    cfg = write_config(tmp_path, "surface.kind = torus\nsurface.n = 8\n")
    out = tmp_path / "runs"
    assert run(["mesh", "--config", cfg, "--out", str(out)]) == 0
    outdir = only_outdir(out)
    with open(outdir / "meta.json") as fh:
        meta = json.load(fh)
    assert meta["command"] == "mesh"
    assert outdir.name == f"mesh-{meta['experiment_id']}"
    assert meta["config_hash"] == meta["experiment_id"]
    assert meta["effective_config"]["surface.n"] == 8
    assert meta["effective_config"]["region.kind"] == "full"
