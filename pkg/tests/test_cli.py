"""End-to-end command line tests: config parsing, validation, pipelines,
exit codes, and byte-level report determinism."""
import json
import textwrap

import pytest

from rigidity_cert import cli, errors


def _write(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return str(path)


def _stretch_config(tmp_path, pipeline, extra=""):
    return _write(tmp_path, "scenario.cfg", f"""
        # 5% uniaxial stretch, pure displacement
        name = stretch
        pipeline = {pipeline}
        seed = 0

        mesh.kind = rectangle
        mesh.nx = 6
        mesh.ny = 6

        material.model = stvk
        material.lambda = 1.0
        material.mu = 1.0

        loads.dirichlet = affine
        loads.matrix = 1.05 0.0 0.0 1.0

        certify.taylor_samples = 300
        certify.j2_count = 3
        certify.candidates = 2
        {extra}
    """)


# ------------------------------------------------------------------ parsing

def test_parse_config_basics(tmp_path):
    path = _write(tmp_path, "a.cfg", """
        # comment
        name = demo   # trailing comment
        pipeline = solve

        seed = 3
    """)
    raw = cli.parse_config(path)
    assert raw["name"] == ("demo", 3)
    assert raw["pipeline"] == ("solve", 4)
    assert raw["seed"] == ("3", 6)


def test_parse_config_rejects_garbage(tmp_path):
    path = _write(tmp_path, "a.cfg", "name demo\n")
    with pytest.raises(errors.ConfigError, match="line 1"):
        cli.parse_config(path)
    path = _write(tmp_path, "b.cfg", "name = a\nname = b\n")
    with pytest.raises(errors.ConfigError, match="duplicate"):
        cli.parse_config(path)


def test_unknown_key_rejected(tmp_path):
    path = _write(tmp_path, "a.cfg", """
        name = demo
        pipeline = solve
        mesh.resolution = 8
    """)
    with pytest.raises(errors.ConfigError, match=r"mesh\.resolution.*line 4"):
        cli.load_scenario(path)


def test_missing_required_key(tmp_path):
    path = _write(tmp_path, "a.cfg", "name = demo\n")
    with pytest.raises(errors.ConfigError, match="pipeline"):
        cli.load_scenario(path)


def test_bad_value_types(tmp_path):
    path = _write(tmp_path, "a.cfg", """
        name = demo
        pipeline = solve
        mesh.nx = many
    """)
    with pytest.raises(errors.ConfigError, match="integer"):
        cli.load_scenario(path)
    path = _write(tmp_path, "b.cfg", """
        name = demo
        pipeline = dance
    """)
    with pytest.raises(errors.ConfigError, match="one of"):
        cli.load_scenario(path)


def test_seed_override(tmp_path):
    path = _write(tmp_path, "a.cfg", "name = demo\npipeline = solve\nseed = 5\n")
    assert cli.load_scenario(path)["seed"] == 5
    assert cli.load_scenario(path, seed_override=9)["seed"] == 9


# --------------------------------------------------------------- validation

def test_validate_command_ok(tmp_path, capsys):
    cfg = _stretch_config(tmp_path, "solve")
    assert cli.main(["validate", cfg]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_boundary_p_hypothesis(tmp_path, capsys):
    cfg = _stretch_config(tmp_path, "certify-small-strain",
                          extra="certify.boundary_p = 2.0")
    assert cli.main(["validate", cfg]) == 1
    err = capsys.readouterr().err
    assert "p > n" in err and "boundary" in err


def test_validate_affine_needs_matrix(tmp_path, capsys):
    cfg = _write(tmp_path, "a.cfg", """
        name = demo
        pipeline = solve
        loads.dirichlet = affine
    """)
    assert cli.main(["validate", cfg]) == 1
    assert "loads.matrix" in capsys.readouterr().err


def test_validate_missing_mesh_file(tmp_path, capsys):
    cfg = _write(tmp_path, "a.cfg", """
        name = demo
        pipeline = solve
        mesh.kind = file
        mesh.path = nowhere.mesh
    """)
    assert cli.main(["validate", cfg]) == 1


def test_validate_rigidity_p(tmp_path, capsys):
    cfg = _stretch_config(tmp_path, "diagnostics-rigidity",
                          extra="rigidity.p = 1.0")
    assert cli.main(["validate", cfg]) == 1
    assert "1 < p" in capsys.readouterr().err


# ---------------------------------------------------------------- pipelines

def test_run_solve_minimal(tmp_path, capsys):
    cfg = _write(tmp_path, "a.cfg", """
        name = rest
        pipeline = solve
        mesh.kind = rectangle
        mesh.nx = 4
        mesh.ny = 4
    """)
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "rest.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["outcome"] == "pass"
    assert doc["measurements"]["residual_sup"] <= 1e-10
    assert doc["measurements"]["iterations"] == 0
    assert (out / "rest.newton.csv").exists()


def test_run_certify_small_strain(tmp_path):
    cfg = _stretch_config(tmp_path, "certify-small-strain",
                          extra="certify.restarts = 2")
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "stretch.json").read_text())
    assert doc["outcome"] == "pass"
    assert doc["constants"]["k_hat"] > 0.0
    assert doc["constants"]["delta_star"] > 0.0
    assert doc["multistart"]["pass"]
    assert len(doc["candidates"]) == 2
    csv_text = (out / "stretch.candidates.csv").read_text()
    assert csv_text.splitlines()[0] == "candidate,strain_sup,energy_excess,outcome"
    assert len(csv_text.splitlines()) == 3


def test_run_bmo_gate(tmp_path):
    cfg = _stretch_config(tmp_path, "certify-bmo-gate")
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "stretch.json").read_text())
    assert doc["outcome"] == "pass"
    rows = (out / "stretch.energy_gap_vs_amplitude.csv").read_text().splitlines()
    assert len(rows) == 3
    for row in rows[1:]:
        cells = row.split(",")
        assert float(cells[3]) >= float(cells[4])  # gap >= bound
        assert cells[5] == "pass"
    assert all(e["transfer"]["outcome"] == "pass" for e in doc["candidates"])


def test_run_strain_diff(tmp_path):
    cfg = _stretch_config(tmp_path, "certify-strain-diff")
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "stretch.json").read_text())
    assert doc["configuration"] == "deformed"
    assert doc["outcome"] == "pass"
    assert (out / "stretch.strain_candidates.csv").exists()


def test_run_gate_inapplicable_exit_2(tmp_path):
    # perturbations scaled far beyond delta_star fail the smallness
    # conditions, which is inapplicability, not failure
    cfg = _stretch_config(tmp_path, "certify-bmo-gate",
                          extra="certify.frac = 50.0")
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 2
    doc = json.loads((out / "stretch.json").read_text())
    assert doc["outcome"] == "inapplicable"


def test_run_diagnostics_harmonic(tmp_path):
    cfg = _write(tmp_path, "a.cfg", """
        name = harm
        pipeline = diagnostics-harmonic
        mesh.nx = 8
        mesh.ny = 8
        harmonic.count = 3
    """)
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "harm.json").read_text())
    assert doc["measurements"]["J2"] > 0.0
    assert doc["measurements"]["exponents"]["rh"] == ["1/3", "2/3"]
    rows = (out / "harm.fields.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 4  # count families x dim^2 components


def test_run_diagnostics_rigidity(tmp_path):
    cfg = _write(tmp_path, "a.cfg", """
        name = rig
        pipeline = diagnostics-rigidity
        rigidity.resolutions = 6 12
    """)
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    rows = (out / "rig.cemp_vs_refinement.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[0].startswith("resolution,C_emp")


def test_run_korn(tmp_path):
    cfg = _write(tmp_path, "a.cfg", """
        name = korn
        pipeline = korn
        korn.resolutions = 4 8
    """)
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    rows = (out / "korn.korn_vs_refinement.csv").read_text().splitlines()
    assert len(rows) == 3
    for row in rows[1:]:
        assert float(row.split(",")[1]) >= 2.0 - 1e-6


def test_run_config_error_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, "a.cfg", """
        name = demo
        pipeline = solve
        mesh.kind = file
    """)
    assert cli.main(["run", cfg]) == 1
    assert "mesh.path" in capsys.readouterr().err


# -------------------------------------------------------------- determinism

def test_reports_byte_identical_across_runs(tmp_path):
    cfg = _stretch_config(tmp_path, "certify-small-strain")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(["run", cfg, "--out", str(out1)]) == 0
    assert cli.main(["run", cfg, "--out", str(out2)]) == 0
    files1 = sorted(p.name for p in out1.iterdir())
    files2 = sorted(p.name for p in out2.iterdir())
    assert files1 == files2 and files1
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
