"""axisym command line: config-driven solves and verification.

Subcommands:
    minimize    2D energy minimization; writes field/mode CSVs + JSON reports
    reduce      1D profile minimization (both variants) + optional 2D
                comparison
    verify      certificate suite; exit 1 on any failed applicable
                certificate
    annulus     the linear annulus boundary-value problem (flag-driven)
    symmetrize  field CSV in -> symmetrized field CSV + chain report

Configs are strict JSON ("axisym-run/1"): unknown keys are rejected with
their location.  All artifacts are deterministic (sorted keys, 17
significant digits, LF endings) and carry the config hash and seed.
Exit codes: 0 ok/converged, 1 failed certificate, 2 not converged or
singular system, 3 input error.  AXISYM_THREADS caps restart parallelism.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import ioutil
from .energy import (
    BoundaryCondition,
    aniso_constant_e3,
    aniso_profile,
    aniso_surface_normal,
    dirichlet_rows_from_vector,
    easy_normal_potential,
    make_params,
    quadratic_potential,
    quartic_potential,
    table_potential,
    weight_constant,
    weight_general,
    weight_margin_profile,
    weight_t_profile,
    weight_zero,
)
from .fields import field_from_csv, field_to_csv, mode_decompose, profile_to_csv
from .geometry import GeometryError, build_mesh, spline_curve, surface
from .solvers import (
    SingularSystemError,
    SolveConfig,
    annulus_boundary_from_vector,
    minimize_1d_profile,
    minimize_2d,
    solve_annulus_example,
    symmetrize_and_certify,
)
from .verify import run_suite

RUN_SCHEMA = "axisym-run/1"

EXIT_OK = 0
EXIT_CERT_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# strict config parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"schema", "base_surface", "target_surface", "grid", "potential",
             "aniso_field", "weight", "boundary", "solver", "outputs",
             "variant", "prior_2d", "input_field", "suite"}
_SURface_KEYS = {"preset", "params", "spline_table", "closed"}
_GRID_KEYS = {"n_phi", "n_t"}
_POTENTIAL_KEYS = {"kind", "kappa", "lam", "table"}
_ANISO_KEYS = {"kind", "vector", "table"}
_WEIGHT_KEYS = {"kind", "lam", "margin", "table"}
_BOUNDARY_KEYS = {"kind", "bottom", "top", "variant"}
_BOUNDARY_SIDE_KEYS = {"variant", "vector"}
_SOLVER_KEYS = {"max_iters", "grad_tol", "step_init", "armijo_c",
                "armijo_shrink", "restarts", "seed"}
_SUITE_KEYS = {"grid", "solver", "seeds", "chain_fields", "pw_fields",
               "annulus", "instances", "plant_failure"}


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}: unknown key")


def load_config(path):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = ioutil.loads(raw)
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(cfg, _TOP_KEYS, "config")
    if cfg.get("schema") != RUN_SCHEMA:
        raise ConfigError(f"config.schema: expected {RUN_SCHEMA!r}")
    for name, allowed in (("base_surface", _SURface_KEYS),
                          ("target_surface", _SURface_KEYS),
                          ("grid", _GRID_KEYS), ("potential", _POTENTIAL_KEYS),
                          ("aniso_field", _ANISO_KEYS), ("weight", _WEIGHT_KEYS),
                          ("boundary", _BOUNDARY_KEYS), ("solver", _SOLVER_KEYS),
                          ("suite", _SUITE_KEYS)):
        if name in cfg:
            _check_keys(cfg[name], allowed, f"config.{name}")
    if "boundary" in cfg:
        for side in ("bottom", "top"):
            if cfg["boundary"].get(side) is not None:
                _check_keys(cfg["boundary"][side], _BOUNDARY_SIDE_KEYS,
                            f"config.boundary.{side}")
    return cfg


def _read_table(path, columns):
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(ln for ln in f if not ln.startswith("#"))
            for row in reader:
                rows.append([float(row[c]) for c in columns])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"table {path} is empty")
    return np.array(rows)


def _build_surface(section, role, where):
    if "spline_table" in section:
        tab = _read_table(section["spline_table"], ["t", "x", "z"])
        curve = spline_curve(tab[:, 0], tab[:, 1], tab[:, 2],
                             name=Path(section["spline_table"]).stem,
                             closed=bool(section.get("closed", False)))
        return surface(curve, role)
    preset = section.get("preset")
    if not preset:
        raise ConfigError(f"{where}: needs 'preset' or 'spline_table'")
    try:
        return surface(preset, role, **section.get("params", {}))
    except (GeometryError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build_grid(cfg):
    grid = cfg.get("grid", {})
    n_phi = int(grid.get("n_phi", 64))
    n_t = int(grid.get("n_t", 64))
    for key, n in (("n_phi", n_phi), ("n_t", n_t)):
        if not (8 <= n <= 4096):
            raise ConfigError(f"config.grid.{key}: must lie in [8, 4096]")
    if n_phi % 2 != 0:
        raise ConfigError("config.grid.n_phi: must be even")
    return n_phi, n_t


def _build_potential(section):
    kind = section.get("kind", "quartic")
    try:
        if kind == "quartic":
            return quartic_potential(float(section.get("lam", 1.0)))
        if kind == "quadratic":
            return quadratic_potential(float(section.get("kappa", 1.0)))
        if kind == "easy_normal":
            return easy_normal_potential(float(section.get("kappa", -1.0)))
        if kind == "table":
            tab = _read_table(section["table"], ["s", "g"])
            return table_potential(tab[:, 0], tab[:, 1])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config.potential: {exc}") from exc
    raise ConfigError(f"config.potential.kind: unknown kind {kind!r}")


def _build_aniso(section, mesh):
    kind = section.get("kind", "surface_normal")
    if kind == "surface_normal":
        return aniso_surface_normal(mesh)
    if kind == "constant_e3":
        return aniso_constant_e3(mesh)
    if kind in ("symmetric_profile", "antisymmetric_profile"):
        variant = kind.split("_")[0]
        if "vector" in section:
            prof = np.broadcast_to(np.asarray(section["vector"], dtype=float),
                                   (mesh.n_t, 3)).copy()
        elif "table" in section:
            tab = _read_table(section["table"], ["t", "ax", "ay", "az"])
            prof = np.stack([np.interp(mesh.t, tab[:, 0], tab[:, c])
                             for c in (1, 2, 3)], axis=-1)
        else:
            raise ConfigError("config.aniso_field: profile kinds need "
                              "'vector' or 'table'")
        return aniso_profile(mesh, prof, variant)
    raise ConfigError(f"config.aniso_field.kind: unknown kind {kind!r}")


def _build_weight(section, mesh):
    kind = section.get("kind", "zero")
    try:
        if kind == "zero":
            return weight_zero(mesh)
        if kind == "constant":
            return weight_constant(mesh, float(section.get("lam", 1.0)))
        if kind == "margin":
            return weight_margin_profile(mesh, float(section.get("margin", 1.5)))
        if kind == "t_profile":
            tab = _read_table(section["table"], ["t", "omega"])
            return weight_t_profile(mesh, np.interp(mesh.t, tab[:, 0], tab[:, 1]))
        if kind == "general":
            tab = _read_table(section["table"], ["t", "omega"])
            return weight_general(
                mesh, lambda phi, t: np.broadcast_to(
                    np.interp(t, tab[:, 0], tab[:, 1]), (mesh.n_phi, mesh.n_t)))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config.weight: {exc}") from exc
    raise ConfigError(f"config.weight.kind: unknown kind {kind!r}")


def _build_boundary(section, mesh):
    if not section or section.get("kind", "free") == "free":
        return None
    if section.get("kind") != "dirichlet":
        raise ConfigError("config.boundary.kind: must be 'free' or 'dirichlet'")
    sides = {}
    variant = section.get("variant", "symmetric")
    for side in ("bottom", "top"):
        spec = section.get(side)
        if spec is None:
            sides[side] = None
            continue
        v = spec.get("vector")
        if v is None:
            raise ConfigError(f"config.boundary.{side}.vector: required")
        sides[side] = dirichlet_rows_from_vector(
            mesh, v, spec.get("variant", variant))
    return BoundaryCondition("dirichlet", sides["bottom"], sides["top"], variant)


def build_run(cfg, seed_override=None, grid_override=None):
    """Instantiate (mesh, target, params, solve_config, out_dir) from config."""
    n_phi, n_t = _build_grid(cfg)
    if grid_override:
        n_phi, n_t = grid_override
    base = _build_surface(cfg.get("base_surface", {"preset": "sphere"}),
                          "base", "config.base_surface")
    target = _build_surface(cfg.get("target_surface", {"preset": "sphere"}),
                            "target", "config.target_surface")
    try:
        mesh = build_mesh(base, n_phi, n_t)
    except (GeometryError, ValueError) as exc:
        raise ConfigError(f"config.grid: {exc}") from exc
    pot = _build_potential(cfg.get("potential", {}))
    an = _build_aniso(cfg.get("aniso_field", {}), mesh)
    w = _build_weight(cfg.get("weight", {}), mesh)
    bc = _build_boundary(cfg.get("boundary"), mesh)
    try:
        params = make_params(mesh, target, pot, an, w, bc)
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from exc
    solver_cfg = dict(cfg.get("solver", {}))
    if seed_override is not None:
        solver_cfg["seed"] = int(seed_override)
    try:
        sc = SolveConfig(**{k: (int(v) if k in ("max_iters", "restarts", "seed")
                                else float(v)) for k, v in solver_cfg.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.solver: {exc}") from exc
    return mesh, target, params, sc


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _provenance(cfg, seed):
    digest = ioutil.sha256_of({k: v for k, v in cfg.items()})
    return f"config_sha256={digest} seed={seed}", digest


def _write_mode_csv(path, field, comment):
    dec = mode_decompose(field)
    mesh = field.mesh
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("# " + comment + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "alpha_perp_norm", "beta_perp_norm", "alpha_dot_beta",
                    "eta", "mean_perp_norm"])
        for j in range(mesh.n_t):
            w.writerow(["%.17g" % mesh.t[j],
                        "%.17g" % np.linalg.norm(dec.alpha_perp[j]),
                        "%.17g" % np.linalg.norm(dec.beta_perp[j]),
                        "%.17g" % float(np.dot(dec.alpha_perp[j], dec.beta_perp[j])),
                        "%.17g" % dec.eta[j],
                        "%.17g" % np.linalg.norm(dec.mean_perp[j])])


def _write_json(path, payload):
    Path(path).write_text(ioutil.dumps(payload, indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_minimize(args):
    cfg = load_config(args.config)
    mesh, target, params, sc = build_run(cfg, args.seed, _parse_grid(args.grid))
    out = Path(args.out or cfg.get("outputs", "out"))
    out.mkdir(parents=True, exist_ok=True)
    report = minimize_2d(mesh, target, params, sc)
    comment, digest = _provenance(cfg, sc.seed)
    field_to_csv(report.best_field, out / "field.csv", comment)
    _write_mode_csv(out / "mode.csv", report.best_field, comment)
    _write_json(out / "breakdown.json",
                dict(report.best_energy.to_dict(), config_sha256=digest,
                     seed=sc.seed))
    _write_json(out / "report.json",
                dict(report.to_dict(), config_sha256=digest))
    print(f"minimize: total={report.best_energy.total:.12g} "
          f"converged={report.converged} -> {out}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_reduce(args):
    cfg = load_config(args.config)
    mesh, target, params, sc = build_run(cfg, args.seed, _parse_grid(args.grid))
    out = Path(args.out or cfg.get("outputs", "out"))
    out.mkdir(parents=True, exist_ok=True)
    comment, digest = _provenance(cfg, sc.seed)
    payload = {"config_sha256": digest, "seed": sc.seed}
    converged = True
    fields_by_variant = {}
    for variant in ("symmetric", "antisymmetric"):
        rep = minimize_1d_profile(mesh, target, params, variant, sc)
        profile_to_csv(rep.best_profile, out / f"profile_{variant}.csv", comment)
        payload[variant] = rep.to_dict()
        converged &= rep.converged
        fields_by_variant[variant] = rep
        if rep.diagnostics.get("variant_mismatch_warning"):
            payload[f"{variant}_warning"] = ("anisotropy variant differs from "
                                             "profile variant")
    prior = cfg.get("prior_2d")
    if prior:
        try:
            prior_report = ioutil.loads(
                (Path(prior) / "report.json").read_text(encoding="utf-8"))
            prior_field = field_from_csv(Path(prior) / "field.csv", mesh, target)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config.prior_2d: {exc}") from exc
        best_variant = min(fields_by_variant,
                           key=lambda v: fields_by_variant[v].best_energy.total)
        rep = fields_by_variant[best_variant]
        e2d = float(prior_report["best_energy"]["total"])
        gap = abs(rep.best_energy.total - e2d) / max(abs(e2d), 1e-30)
        diff = rep.best_field.values - prior_field.values
        l2 = float(np.sqrt(np.sum(mesh.quad_weights * np.sum(diff ** 2, -1))))
        payload["comparison"] = {"best_variant": best_variant,
                                 "energy_2d": e2d,
                                 "energy_1d": rep.best_energy.total,
                                 "relative_gap": gap,
                                 "l2_distance": l2}
    _write_json(out / "reduce_report.json", payload)
    print(f"reduce: wrote profiles -> {out}")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_verify(args):
    cfg = load_config(args.config) if args.config else {"schema": RUN_SCHEMA}
    suite_cfg = dict(cfg.get("suite", {}))
    if args.grid:
        n_phi, n_t = _parse_grid(args.grid)
        suite_cfg["grid"] = {"n_phi": n_phi, "n_t": n_t}
    if args.seed is not None:
        suite_cfg["seeds"] = [int(args.seed)]
    out = args.out or cfg.get("outputs")
    certs, summary = run_suite(suite_cfg or None, out_dir=out)
    applicable = [c for c in certs if c.applicable]
    print(f"verify: {summary['n_passed']}/{len(applicable)} applicable "
          f"certificates passed ({summary['n_certificates']} total)")
    for c in applicable:
        if not c.passed:
            print(f"  FAILED {c.theorem} on {c.instance.get('name', '?')}")
    return EXIT_OK if summary["all_pass"] else EXIT_CERT_FAILED


def cmd_annulus(args):
    try:
        inner = [float(v) for v in args.inner.split(",")]
        outer = [float(v) for v in args.outer.split(",")]
        if len(inner) != 3 or len(outer) != 3:
            raise ValueError("boundary vectors need three components")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    b1 = annulus_boundary_from_vector(args.n_phi, inner)
    b2 = annulus_boundary_from_vector(args.n_phi, outer)
    try:
        rep = solve_annulus_example(args.n_t, args.n_phi, args.kappa, b1, b2)
    except SingularSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "radial_mean.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "mean_perp_norm"])
        for k, t in enumerate(rep.t_grid):
            w.writerow(["%.17g" % t,
                        "%.17g" % np.linalg.norm(rep.mean_perp[k])])
    with open(out / "solution.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["phi_index", "t_index", "phi", "t", "mx", "my", "mz"])
        for i in range(args.n_phi):
            for k in range(args.n_t + 1):
                v = rep.solution[i, k]
                w.writerow([str(i), str(k), "%.17g" % rep.phi[i],
                            "%.17g" % rep.t_grid[k], "%.17g" % v[0],
                            "%.17g" % v[1], "%.17g" % v[2]])
    _write_json(out / "annulus_report.json", rep.to_dict())
    print(f"annulus: kappa={args.kappa:g} max|<m_perp>|={rep.max_mean_perp:.3e} "
          f"-> {out}")
    return EXIT_OK


def cmd_symmetrize(args):
    cfg = load_config(args.config)
    mesh, target, params, sc = build_run(cfg, args.seed, _parse_grid(args.grid))
    src = cfg.get("input_field")
    if not src:
        raise ConfigError("config.input_field: required for symmetrize")
    try:
        field = field_from_csv(src, mesh, target)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"config.input_field: {exc}") from exc
    variant = cfg.get("variant", params.aniso.variant)
    if variant not in ("symmetric", "antisymmetric"):
        raise ConfigError("config.variant: must be symmetric or antisymmetric")
    u, chain = symmetrize_and_certify(field, params, variant)
    out = Path(args.out or cfg.get("outputs", "out"))
    out.mkdir(parents=True, exist_ok=True)
    comment, digest = _provenance(cfg, sc.seed)
    field_to_csv(u, out / "symmetrized.csv", comment)
    _write_json(out / "chain_report.json",
                dict(chain.to_dict(), config_sha256=digest))
    print(f"symmetrize: certified={chain.certified} "
          f"hypothesis_violation={chain.hypothesis_violation} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parse_grid(text):
    if not text:
        return None
    try:
        n_phi, n_t = text.lower().split("x")
        return int(n_phi), int(n_t)
    except ValueError as exc:
        raise ConfigError(f"--grid: expected NxM, got {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="axisym", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=False, help="JSON run config")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--grid", help="grid override, e.g. 64x64")

    for name, fn in (("minimize", cmd_minimize), ("reduce", cmd_reduce),
                     ("verify", cmd_verify), ("symmetrize", cmd_symmetrize)):
        sp = sub.add_parser(name)
        common(sp)
        sp.set_defaults(func=fn, needs_config=name != "verify")

    sp = sub.add_parser("annulus")
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--n-t", dest="n_t", type=int, default=64)
    sp.add_argument("--n-phi", dest="n_phi", type=int, default=32)
    sp.add_argument("--inner", default="1,0,0", help="inner ring vector x,y,z")
    sp.add_argument("--outer", default="0,0,1", help="outer ring vector x,y,z")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_annulus, needs_config=False)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "needs_config", False) and not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
