import json
import os
import subprocess
import sys

import numpy as np
import pytest

from axisym import ioutil
from axisym.cli import main


def write_config(path, **overrides):
    cfg = {
        "schema": "axisym-run/1",
        "base_surface": {"preset": "cylinder", "params": {"radius": 2.0}},
        "target_surface": {"preset": "sphere"},
        "grid": {"n_phi": 16, "n_t": 12},
        "potential": {"kind": "quadratic", "kappa": 1.0},
        "aniso_field": {"kind": "constant_e3"},
        "weight": {"kind": "constant", "lam": 1.0},
        "solver": {"restarts": 1, "max_iters": 2000, "grad_tol": 1e-8,
                   "seed": 0},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return cfg


def test_minimize_writes_artifacts(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    rc = main(["minimize", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    for name in ("field.csv", "mode.csv", "breakdown.json", "report.json"):
        assert (out / name).exists(), name
    report = ioutil.loads((out / "report.json").read_text())
    assert report["converged"]
    assert "config_sha256" in report
    breakdown = ioutil.loads((out / "breakdown.json").read_text())
    assert abs(breakdown["total"] - (breakdown["dirichlet"]
                                     + breakdown["anisotropy"]
                                     + breakdown["penalty"])) < 1e-10
    head = (out / "field.csv").read_text().splitlines()[0]
    assert head.startswith("# config_sha256=")


def test_minimize_rerun_byte_identical(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["minimize", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["minimize", "--config", str(cfg_path), "--out", str(out2)]) == 0
    for name in ("field.csv", "mode.csv", "breakdown.json", "report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_minimize_thread_count_invariance(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path, solver={"restarts": 3, "max_iters": 800,
                                   "grad_tol": 1e-8, "seed": 1})
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"threads{threads}"
        env = dict(os.environ, AXISYM_THREADS=threads)
        code = subprocess.run(
            [sys.executable, "-m", "axisym.cli", "minimize", "--config",
             str(cfg_path), "--out", str(out)],
            env=env, capture_output=True, text=True).returncode
        assert code in (0, 2)
        outs.append(out)
    for name in ("field.csv", "mode.csv", "breakdown.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_unknown_key_rejected(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg = write_config(cfg_path)
    cfg["mystery"] = 1
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["minimize", "--config", str(cfg_path)]) == 3


def test_bad_grid_rejected(tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path, grid={"n_phi": 7, "n_t": 12})
    assert main(["minimize", "--config", str(cfg_path)]) == 3
    err = capsys.readouterr().err
    assert "n_phi" in err


def test_missing_config():
    assert main(["minimize"]) == 3


def test_reduce_with_and_without_prior(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path, solver={"restarts": 2, "max_iters": 3000,
                                   "grad_tol": 1e-8, "seed": 0})
    out2d = tmp_path / "mini"
    assert main(["minimize", "--config", str(cfg_path), "--out", str(out2d)]) == 0

    out1 = tmp_path / "red1"
    assert main(["reduce", "--config", str(cfg_path), "--out", str(out1)]) == 0
    rep = ioutil.loads((out1 / "reduce_report.json").read_text())
    assert "comparison" not in rep
    assert (out1 / "profile_symmetric.csv").exists()
    assert (out1 / "profile_antisymmetric.csv").exists()

    cfg = write_config(cfg_path, prior_2d=str(out2d),
                       solver={"restarts": 2, "max_iters": 3000,
                               "grad_tol": 1e-8, "seed": 0})
    out2 = tmp_path / "red2"
    assert main(["reduce", "--config", str(cfg_path), "--out", str(out2)]) == 0
    rep = ioutil.loads((out2 / "reduce_report.json").read_text())
    assert rep["comparison"]["relative_gap"] <= 0.02


def test_reduce_variant_mismatch_warning(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path,
                 aniso_field={"kind": "antisymmetric_profile",
                              "vector": [0.6, 0.0, 0.8]},
                 solver={"restarts": 0, "max_iters": 300, "seed": 0})
    out = tmp_path / "red"
    main(["reduce", "--config", str(cfg_path), "--out", str(out)])
    rep = ioutil.loads((out / "reduce_report.json").read_text())
    assert "symmetric_warning" in rep


def test_verify_subset_and_planted_failure(tmp_path):
    cfg_path = tmp_path / "verify.json"
    cfg = {"schema": "axisym-run/1",
           "suite": {"instances": ["cylinder2_quadratic_const1"],
                     "solver": {"restarts": 1, "max_iters": 2500,
                                "grad_tol": 1e-9},
                     "chain_fields": 2, "pw_fields": 2}}
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / "certs"
    assert main(["verify", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "summary.json").exists()

    cfg["suite"]["plant_failure"] = True
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["verify", "--config", str(cfg_path)]) == 1


def test_verify_inapplicable_only_suite(tmp_path):
    cfg_path = tmp_path / "verify.json"
    cfg = {"schema": "axisym-run/1",
           "suite": {"instances": ["cylinder2_inplane_free"],
                     "solver": {"restarts": 1, "max_iters": 1500},
                     "chain_fields": 1, "pw_fields": 1}}
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["verify", "--config", str(cfg_path)]) == 0


def test_annulus_command(tmp_path, capsys):
    out = tmp_path / "ann"
    rc = main(["annulus", "--kappa", "1.0", "--n-t", "32", "--n-phi", "16",
               "--inner", "1,0,0", "--outer", "0,0,1", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "max|<m_perp>|" in printed
    rows = (out / "radial_mean.csv").read_text().splitlines()[1:]
    means = [float(r.split(",")[1]) for r in rows]
    assert max(means) <= 1e-8
    assert (out / "solution.csv").exists()


def test_annulus_constant_e3(tmp_path):
    out = tmp_path / "ann"
    rc = main(["annulus", "--kappa", "0", "--n-t", "16", "--n-phi", "8",
               "--inner", "0,0,1", "--outer", "0,0,1", "--out", str(out)])
    assert rc == 0
    rows = (out / "solution.csv").read_text().splitlines()[1:]
    mz = np.array([float(r.split(",")[6]) for r in rows])
    assert np.max(np.abs(mz - 1.0)) < 1e-10


def test_annulus_singular_kappa_exits_2(tmp_path):
    # the vertical operator -Lap + kappa is singular when -kappa is a
    # Dirichlet eigenvalue of the discrete -Lap; find one exactly
    from axisym.solvers import _annulus_matrix

    n_t, n_phi = 16, 8
    h = 1.0 / n_t
    t = 1.0 + h * np.arange(n_t + 1)
    dphi = 2 * np.pi / n_phi
    A0, _, _ = _annulus_matrix(n_phi, n_t, t, h, dphi, 0.0)
    eigs = np.linalg.eigvals(A0.toarray())
    lam = float(np.min(eigs.real))
    kappa_star = -lam
    rc = main(["annulus", "--kappa", repr(kappa_star), "--n-t", str(n_t),
               "--n-phi", str(n_phi), "--inner", "0,0,1", "--outer", "0,0,1",
               "--out", str(tmp_path / "sing")])
    assert rc == 2


def test_symmetrize_command(tmp_path):
    cfg_path = tmp_path / "run.json"
    write_config(cfg_path)
    # build an input field deterministically
    from axisym.cli import build_run, load_config
    from axisym.fields import field_to_csv, random_field
    mesh, target, params, sc = build_run(load_config(cfg_path))
    f = random_field(mesh, target, seed=5)
    field_csv = tmp_path / "input.csv"
    field_to_csv(f, field_csv)
    cfg = write_config(cfg_path, input_field=str(field_csv),
                       variant="symmetric")
    out = tmp_path / "sym"
    assert main(["symmetrize", "--config", str(cfg_path),
                 "--out", str(out)]) == 0
    rep = ioutil.loads((out / "chain_report.json").read_text())
    assert rep["certified"] and not rep["hypothesis_violation"]
    assert (out / "symmetrized.csv").exists()
