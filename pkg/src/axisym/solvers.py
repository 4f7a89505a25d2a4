"""Minimization of the discrete energy and the linear annulus problem.

2D solver: projected gradient descent on target-valued fields with
Barzilai-Borwein trial steps, Armijo backtracking (monotone), and
closest-point retraction after every step.  Several restarts from seeded
random fields plus two structured initializations (the rotation-swept
normal profile, both symmetry variants) mitigate non-convexity; only the
best found field is reported, with symmetry diagnostics attached.

1D solver: minimizes over t-profiles gamma the energy of the swept field
A(phi)^T gamma(t) (or A(phi) gamma(t)); the value is computed literally as
the 2D energy of the built field, so the reduced and full functionals agree
to machine precision at matched discretization, and the profile gradient
is the exact pullback sum of the 2D gradient over slices.

Annulus solver: the linear equations -Lap m + kappa (m.e3) e3 = 0 on the
flat annulus in polar coordinates with Dirichlet ring data, discretized
with conservative second-order differences and solved directly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import (
    EnergyBreakdown,
    argmin_phi_slice,
    chain_terms,
    euclidean_gradient,
    hypothesis_margin,
    riemannian_gradient,
    total_energy,
)
from .fields import (
    DiscreteField,
    ProfileField,
    build_from_profile,
    circular_average_perp,
    line_symmetry_classify,
    mode_decompose,
    random_field,
    symmetrize,
    symmetry_defect,
)
from .geometry import project_points, rotate, rotate_inverse, tangent_project_points

SQRT_2PI = float(np.sqrt(2 * np.pi))


class SingularSystemError(RuntimeError):
    """The discrete annulus operator is singular (kappa at an eigenvalue)."""


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 20_000
    grad_tol: float = 1e-6          # stop when sup|grad| <= grad_tol (1 + |E|)
    step_init: float = 0.1
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_shrink < 1):
            raise ValueError("Armijo constants must lie in (0, 1)")
        if self.grad_tol <= 0 or self.step_init <= 0:
            raise ValueError("tolerances must be positive")


def _thread_count():
    try:
        return max(1, int(os.environ.get("AXISYM_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# generic monotone descent
# ---------------------------------------------------------------------------

def _descend(x0, value_fn, grad_fn, retract_fn, config):
    """Projected gradient descent with BB trial steps and Armijo backtracking.

    The energy sequence is non-increasing by construction and asserted so;
    returns (x, energy, iterations, converged).
    """
    x = retract_fn(x0)
    e = value_fn(x)
    g = grad_fn(x)
    prev_x = prev_g = None
    iters = 0
    converged = False
    for it in range(1, config.max_iters + 1):
        if float(np.max(np.abs(g))) <= config.grad_tol * (1 + abs(e)):
            converged = True
            break
        iters = it
        if prev_x is not None:
            s = x - prev_x
            y = g - prev_g
            sy = float(np.sum(s * y))
            alpha = float(np.sum(s * s)) / sy if sy > 1e-300 else config.step_init
            alpha = float(np.clip(alpha, 1e-12, 1e4))
        else:
            alpha = config.step_init
        gg = float(np.sum(g * g))
        accepted = False
        for _ in range(60):
            xt = retract_fn(x - alpha * g)
            et = value_fn(xt)
            if et <= e - config.armijo_c * alpha * gg + 1e-15 * (1 + abs(e)):
                accepted = True
                break
            alpha *= config.armijo_shrink
        if not accepted:
            break  # step collapsed to rounding level; treat as stationary
        assert et <= e + 1e-12 * (1 + abs(e)), "descent must be monotone"
        prev_x, prev_g = x, g
        x, e = xt, et
        g = grad_fn(x)
    return x, e, iters, converged


# ---------------------------------------------------------------------------
# solve reports
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    best_field: DiscreteField
    best_energy: EnergyBreakdown
    iterations: list
    converged: bool
    mode: object
    margin: object
    diagnostics: dict
    best_profile: Optional[ProfileField] = None
    restart_energies: list = dc_field(default_factory=list)
    restart_fields: Optional[list] = None
    seed: int = 0

    def to_dict(self):
        return {
            "best_energy": self.best_energy.to_dict(),
            "iterations": list(self.iterations),
            "restart_energies": [float(v) for v in self.restart_energies],
            "converged": bool(self.converged),
            "seed": int(self.seed),
            "hypothesis_margin": {
                "min_h1w": self.margin.min_h1w,
                "strict": self.margin.strict,
                "sup_h1w": self.margin.sup_h1w,
            },
            "diagnostics": _plain(self.diagnostics),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def field_diagnostics(field, params):
    """Symmetry diagnostics attached to every solve report."""
    dec = mode_decompose(field)
    total = total_energy(field, params).total
    scale = max(float(np.max(np.linalg.norm(field.values, axis=-1))), 1e-30)
    l2_sq = float(np.sum(field.mesh.quad_weights
                         * np.sum(field.values ** 2, axis=-1)))
    # absolute floors keep the relative diagnostics meaningful for
    # degenerate (near-zero) minimizers
    energy_floor = abs(total) + 1e-12 * (1 + l2_sq)
    labels = line_symmetry_classify(field, tol=max(1e-3 * scale, 1e-12))
    mean = circular_average_perp(field)
    alpha, beta = dec.alpha_perp, dec.beta_perp
    anorm = np.linalg.norm(alpha, axis=1)
    bnorm = np.linalg.norm(beta, axis=1)
    amax = max(float(np.max(anorm)), 1e-30)
    active = anorm >= 1e-6 * scale
    if np.any(active):
        orth_norm = float(np.max(np.abs(anorm[active] - bnorm[active]))) / amax
        orth_dot = float(np.max(np.abs(
            np.sum(alpha[active] * beta[active], axis=1)))) / amax ** 2
    else:
        orth_norm = orth_dot = 0.0
    n_phi = field.mesh.n_phi
    vert_coeff = np.fft.rfft(field.values[..., 2], axis=0) / n_phi
    w = np.full(n_phi // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    k2 = np.arange(n_phi // 2 + 1, dtype=float) ** 2
    dphi_vert_mass = 2 * np.pi * float(
        np.sum((w * k2)[:, None] * np.abs(vert_coeff) ** 2
               * (field.mesh.sqrtg * field.mesh.dt)[None, :]))
    return {
        "residual_energy": dec.residual_energy,
        "residual_over_total": dec.residual_energy / energy_floor,
        "null_average_norm": float(np.max(np.linalg.norm(mean, axis=1))),
        "defect_symmetric": symmetry_defect(field, "symmetric"),
        "defect_antisymmetric": symmetry_defect(field, "antisymmetric"),
        "line_symmetry_labels": labels,
        "neither_rows": int(sum(1 for v in labels if v == "neither")),
        "orthogonality_norm_residual": orth_norm,
        "orthogonality_dot_residual": orth_dot,
        "dphi_vertical_mass": dphi_vert_mass,
        "dphi_vertical_over_total": dphi_vert_mass / energy_floor,
        "constraint_defect": field.constraint_defect(),
        "field_scale": scale,
    }


# ---------------------------------------------------------------------------
# 2D minimization
# ---------------------------------------------------------------------------

def _apply_boundary(values, boundary):
    if boundary.kind != "dirichlet":
        return values
    out = values.copy()
    if boundary.bottom is not None:
        out[:, 0, :] = boundary.bottom
    if boundary.top is not None:
        out[:, -1, :] = boundary.top
    return out


def _structured_inits(mesh, target):
    prof_on_t, _ = project_points(target, mesh.surface.normal_profile(mesh.t))
    return [build_from_profile(mesh, ProfileField(mesh.t, prof_on_t, variant), target)
            for variant in ("symmetric", "antisymmetric")]


def minimize_2d(mesh, target, params, config=SolveConfig(), keep_fields=False):
    """Best-of-restarts projected descent on the full 2D field.

    Runs `restarts` seeded random initializations plus the two swept
    normal-profile fields, descends each monotonically, and reports the
    lowest-energy result with symmetry diagnostics.  A NotConverged state
    (converged=False) is reported when the gradient tolerance was not met
    within max_iters; it is not an exception.  keep_fields retains every
    restart's final field in the report.
    """
    boundary = params.boundary
    frozen = boundary.frozen_rows(mesh.n_t)

    def value_fn(vals):
        return total_energy(DiscreteField(mesh, target, vals), params).total

    def grad_fn(vals):
        g = riemannian_gradient(DiscreteField(mesh, target, vals), params)
        for r in frozen:
            g[:, r, :] = 0.0
        return g

    def retract_fn(vals):
        out, _ = project_points(target, vals)
        return _apply_boundary(out, boundary)

    inits = [random_field(mesh, target, seed=config.seed + r).values
             for r in range(config.restarts)]
    inits += [f.values for f in _structured_inits(mesh, target)]
    inits = [_apply_boundary(v, boundary) for v in inits]

    def run(task):
        idx, v0 = task
        vals, e, iters, conv = _descend(v0, value_fn, grad_fn, retract_fn, config)
        return idx, vals, e, iters, conv

    tasks = list(enumerate(inits))
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    by_energy = sorted(results, key=lambda r: (r[2], r[0]))
    _, vals, _, _, conv = by_energy[0]

    best = DiscreteField(mesh, target, vals)
    breakdown = total_energy(best, params)
    by_index = sorted(results, key=lambda r: r[0])
    report = SolveReport(
        best_field=best,
        best_energy=breakdown,
        iterations=[r[3] for r in by_index],
        converged=bool(conv),
        mode=mode_decompose(best),
        margin=hypothesis_margin(mesh, params.weight),
        diagnostics=field_diagnostics(best, params),
        restart_energies=[r[2] for r in by_index],
        restart_fields=([DiscreteField(mesh, target, r[1]) for r in by_index]
                        if keep_fields else None),
        seed=config.seed,
    )
    assert abs(report.best_energy.total - total_energy(best, params).total) \
        <= 1e-12 * (1 + abs(report.best_energy.total))
    return report


# ---------------------------------------------------------------------------
# 1D profile minimization
# ---------------------------------------------------------------------------

def profile_energy(mesh, target, params, profile):
    """Reduced functional value: the 2D energy of the swept profile."""
    return total_energy(build_from_profile(mesh, profile, target), params)


def minimize_1d_profile(mesh, target, params, variant, config=SolveConfig()):
    """Minimize the reduced functional over target-valued t-profiles.

    The value is the 2D energy of the swept field, and the profile gradient
    is its exact pullback: with m_i = R(phi_i) gamma,
    dF/dgamma = sum_i R(phi_i)^T grad2d[i].  A warning is recorded when the
    anisotropy variant differs from the requested profile variant (the
    symmetry pairing is then broken).
    """
    if variant not in ("symmetric", "antisymmetric"):
        raise ValueError("variant must be 'symmetric' or 'antisymmetric'")
    variant_mismatch = params.aniso.variant != variant
    rot_fwd = rotate if variant == "symmetric" else rotate_inverse
    rot_back = rotate_inverse if variant == "symmetric" else rotate

    def to_field_values(gamma):
        return rot_fwd(mesh.phi[:, None], gamma[None, :, :])

    def value_fn(gamma):
        return total_energy(DiscreteField(mesh, target, to_field_values(gamma)),
                            params).total

    def grad_fn(gamma):
        f = DiscreteField(mesh, target, to_field_values(gamma))
        pulled = rot_back(mesh.phi[:, None], euclidean_gradient(f, params)).sum(axis=0)
        return tangent_project_points(target, gamma, pulled)

    def retract_fn(gamma):
        out, _ = project_points(target, gamma)
        return out

    prof0, _ = project_points(target, mesh.surface.normal_profile(mesh.t))
    inits = [prof0]
    for r in range(config.restarts):
        inits.append(random_field(mesh, target, seed=config.seed + 500 + r).values[0])

    results = []
    for idx, g0 in enumerate(inits):
        gamma, e, iters, conv = _descend(g0, value_fn, grad_fn, retract_fn, config)
        results.append((idx, gamma, e, iters, conv))
    by_energy = sorted(results, key=lambda r: (r[2], r[0]))
    _, gamma, _, _, conv = by_energy[0]

    profile = ProfileField(mesh.t, gamma, variant)
    best = build_from_profile(mesh, profile, target)
    diags = field_diagnostics(best, params)
    diags["variant_mismatch_warning"] = bool(variant_mismatch)
    by_index = sorted(results, key=lambda r: r[0])
    return SolveReport(
        best_field=best,
        best_energy=total_energy(best, params),
        iterations=[r[3] for r in by_index],
        converged=bool(conv),
        mode=mode_decompose(best),
        margin=hypothesis_margin(mesh, params.weight),
        diagnostics=diags,
        best_profile=profile,
        restart_energies=[r[2] for r in by_index],
        seed=config.seed,
    )


# ---------------------------------------------------------------------------
# symmetrization certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainReport:
    """Audit of E(u) <= eq1 <= eq2 <= E(m) for one field."""

    phi_star: float
    energy_m: EnergyBreakdown
    energy_u: EnergyBreakdown
    eq1: float
    eq2: float
    residuals: dict
    margin: object
    hypothesis_violation: bool
    certified: bool

    def to_dict(self):
        return {
            "phi_star": self.phi_star,
            "energy_m": self.energy_m.to_dict(),
            "energy_u": self.energy_u.to_dict(),
            "eq1": self.eq1,
            "eq2": self.eq2,
            "residuals": dict(self.residuals),
            "min_h1w": self.margin.min_h1w,
            "hypothesis_violation": self.hypothesis_violation,
            "certified": self.certified,
        }


def symmetrize_and_certify(field, params, variant):
    """Symmetrize at the best slice and audit the energy inequality chain.

    Returns (u, ChainReport).  When the hypothesis h1 W >= sqrt(2 pi) fails,
    the chain may legitimately break; the report then flags
    hypothesis_violation rather than raising.
    """
    margin = hypothesis_margin(field.mesh, params.weight)
    phi_star = argmin_phi_slice(field, params)
    u = symmetrize(field, phi_star, variant)
    ct = chain_terms(field, params)
    bd_m = total_energy(field, params)
    bd_u = total_energy(u, params)
    slack = 1e-9 * (1 + abs(bd_m.total))
    residuals = {
        "slice_vs_mean": ct.eq1 - bd_u.total,
        "poincare_wirtinger": ct.eq2 - ct.eq1,
        "vertical_mode": ct.total - ct.eq2,
        "total_gap": bd_m.total - bd_u.total,
    }
    violated = margin.min_h1w < SQRT_2PI * (1 - 1e-9)
    certified = all(v >= -slack for v in residuals.values())
    return u, ChainReport(phi_star, bd_m, bd_u, ct.eq1, ct.eq2, residuals,
                          margin, bool(violated), bool(certified))


# ---------------------------------------------------------------------------
# annulus boundary-value problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusReport:
    t_grid: np.ndarray
    phi: np.ndarray
    solution: np.ndarray        # (n_phi, n_t + 1, 3), boundary rows included
    mean_perp: np.ndarray       # (n_t + 1, 2) ring averages of (mx, my)
    max_mean_perp: float
    residual: float
    kappa: float

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "max_mean_perp": self.max_mean_perp,
            "residual": self.residual,
            "n_phi": int(self.solution.shape[0]),
            "n_t": int(self.solution.shape[1] - 1),
        }


def annulus_boundary_from_vector(n_phi, vector, variant="symmetric"):
    """Ring data b(phi) = A(phi)^T e (or A(phi) e) at uniform phi nodes."""
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    rot = rotate if variant == "symmetric" else rotate_inverse
    return rot(phi, np.asarray(vector, dtype=float)[None, :])


def _ring_defect(rows):
    n_phi = rows.shape[0]
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ref = rotate(phi, rows[0][None, :])
    return float(np.sqrt(np.mean(np.sum((rows - ref) ** 2, axis=-1))))


def _annulus_matrix(n_phi, n_t, t, h, dphi, shift):
    """Sparse -Lap (+ shift) on interior polar nodes, Dirichlet eliminated.

    Returns (A, inner_coef, outer_coef) where the coefficient arrays give
    the right-hand-side weights of the boundary rings per interior row.
    """
    n_int = n_t - 1
    rows, cols, vals = [], [], []
    inner = np.zeros((n_phi, n_int))
    outer = np.zeros((n_phi, n_int))

    def node(i, k):
        return i * n_int + (k - 1)

    for i in range(n_phi):
        for k in range(1, n_t):
            tk = t[k]
            c_up = (tk + h / 2) / (tk * h * h)
            c_dn = (tk - h / 2) / (tk * h * h)
            c_phi = 1.0 / (tk * tk * dphi * dphi)
            r = node(i, k)
            rows.append(r), cols.append(r), vals.append(c_up + c_dn + 2 * c_phi + shift)
            for i2 in ((i - 1) % n_phi, (i + 1) % n_phi):
                rows.append(r), cols.append(node(i2, k)), vals.append(-c_phi)
            if k + 1 <= n_t - 1:
                rows.append(r), cols.append(node(i, k + 1)), vals.append(-c_up)
            else:
                outer[i, k - 1] = c_up
            if k - 1 >= 1:
                rows.append(r), cols.append(node(i, k - 1)), vals.append(-c_dn)
            else:
                inner[i, k - 1] = c_dn
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n_phi * n_int, n_phi * n_int))
    return A, inner, outer


def solve_annulus_example(n_t, n_phi, kappa, b1, b2, r_inner=1.0, r_outer=2.0):
    """Solve -Lap m + kappa (m.e3) e3 = 0 on the annulus with ring data.

    b1, b2 are (n_phi, 3) samples on the inner and outer rings and must be
    axially symmetric.  Componentwise linear solve: the horizontal parts
    are harmonic, the vertical part carries the +kappa zero-order term.
    The ring average of the horizontal part solves the radial two-point
    problem with zero ring data, so it vanishes identically up to solver
    precision, whatever the ring data.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.shape != (n_phi, 3) or b2.shape != (n_phi, 3):
        raise ValueError("boundary data must have shape (n_phi, 3)")
    for ring in (b1, b2):
        if _ring_defect(ring) > 1e-8:
            raise ValueError("annulus boundary data must be axially symmetric")
    if n_t < 3 or n_phi < 4:
        raise ValueError("annulus grid too small")

    h = (r_outer - r_inner) / n_t
    t = r_inner + h * np.arange(n_t + 1)
    dphi = 2 * np.pi / n_phi

    sol = np.zeros((n_phi, n_t + 1, 3))
    sol[:, 0, :] = b1
    sol[:, -1, :] = b2
    worst_res = 0.0
    for comp in range(3):
        shift = kappa if comp == 2 else 0.0
        A, inner, outer = _annulus_matrix(n_phi, n_t, t, h, dphi, shift)
        rhs = (inner * b1[:, comp][:, None] + outer * b2[:, comp][:, None]).reshape(-1)
        try:
            x = spla.splu(A.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(
                f"annulus operator singular for kappa={kappa:g}") from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystemError(
                f"annulus solve non-finite for kappa={kappa:g}")
        if float(np.max(np.abs(x))) > 1e10 * max(1.0, float(np.max(np.abs(rhs)))):
            raise SingularSystemError(
                f"annulus solution blow-up: kappa={kappa:g} is numerically "
                "at a Dirichlet eigenvalue")
        res = float(np.max(np.abs(A @ x - rhs)))
        scale = max(1.0, float(np.max(np.abs(x))))
        if res > 1e-8 * scale:
            raise SingularSystemError(
                f"annulus residual {res:.2e} too large for kappa={kappa:g}")
        worst_res = max(worst_res, res)
        sol[:, 1:-1, comp] = x.reshape(n_phi, n_t - 1)

    mean_perp = sol[..., :2].mean(axis=0)
    return AnnulusReport(t, dphi * np.arange(n_phi), sol, mean_perp,
                         float(np.max(np.linalg.norm(mean_perp, axis=1))),
                         worst_res, float(kappa))
