import numpy as np
import pytest

from axisym.energy import (
    NonDifferentiableError,
    aniso_constant_e3,
    aniso_surface_normal,
    anisotropy_energy,
    argmin_phi_slice,
    chain_terms,
    dirichlet_energy,
    easy_normal_potential,
    euclidean_gradient,
    hypothesis_margin,
    make_params,
    penalty_energy,
    penalty_energy_raw,
    phi_slice_energy,
    quadratic_potential,
    quartic_potential,
    riemannian_gradient,
    table_potential,
    total_energy,
    weight_constant,
    weight_zero,
)
from axisym.fields import DiscreteField, ProfileField, build_from_profile, random_field
from axisym.geometry import build_mesh, rotate, surface, surface_normal
from conftest import make_instance


def normal_field(mesh, target):
    return DiscreteField(mesh, target, surface_normal(mesh))


def constant_field(mesh, target, vec):
    vals = np.broadcast_to(np.asarray(vec, dtype=float), mesh.shape + (3,)).copy()
    return DiscreteField(mesh, target, vals)


# ---------------------------------------------------------------------------
# Dirichlet term
# ---------------------------------------------------------------------------

def test_dirichlet_sphere_normal_8pi():
    # |grad n|^2 = 2 on the unit sphere (sum of squared principal
    # curvatures), so the energy is 2 * 4 pi = 8 pi
    mesh = build_mesh(surface("sphere"), 96, 96)
    tgt = surface("sphere", role="target")
    d = dirichlet_energy(normal_field(mesh, tgt))
    assert abs(d - 8 * np.pi) / (8 * np.pi) < 0.01


def test_dirichlet_sphere_normal_convergence_order():
    errs = []
    tgt = surface("sphere", role="target")
    for n in (32, 64, 128):
        mesh = build_mesh(surface("sphere"), n, n)
        errs.append(abs(dirichlet_energy(normal_field(mesh, tgt)) - 8 * np.pi))
    slope = np.polyfit(np.log([32, 64, 128]), np.log(errs), 1)[0]
    assert 1.8 <= -slope <= 2.5


def test_dirichlet_constant_field_zero():
    mesh = build_mesh(surface("sphere"), 32, 32)
    tgt = surface("sphere", role="target")
    assert dirichlet_energy(constant_field(mesh, tgt, [0, 0, 1.0])) < 1e-14


def test_dirichlet_rotating_field_on_cylinder():
    # m = (cos phi, sin phi, 0): |d_phi m|^2 = 1, h1 = h2 = sqrt(g) = 1,
    # energy = 2 pi * height; a pure first harmonic is exact for the
    # spectral phi-term
    mesh = build_mesh(surface("cylinder"), 32, 16)
    tgt = surface("sphere", role="target")
    vals = np.zeros(mesh.shape + (3,))
    vals[..., 0] = np.cos(mesh.phi)[:, None]
    vals[..., 1] = np.sin(mesh.phi)[:, None]
    d = dirichlet_energy(DiscreteField(mesh, tgt, vals))
    assert abs(d - 2 * np.pi) < 1e-10


# ---------------------------------------------------------------------------
# anisotropy term
# ---------------------------------------------------------------------------

def test_anisotropy_normal_with_quartic_zero():
    mesh, tgt, params = make_instance(potential=("quartic", 3.0),
                                      aniso="surface_normal", weight=("zero", 0))
    for sign in (1.0, -1.0):
        f = DiscreteField(mesh, tgt, sign * surface_normal(mesh))
        assert anisotropy_energy(f, params) < 1e-14


def test_anisotropy_constant_field_area():
    mesh, tgt, params = make_instance(potential=("quadratic", 1.0),
                                      aniso="constant_e3", weight=("zero", 0),
                                      n_phi=64, n_t=64)
    f = constant_field(mesh, tgt, [0, 0, 1.0])
    a = anisotropy_energy(f, params)
    assert abs(a - 4 * np.pi) / (4 * np.pi) < 1e-3


def test_anisotropy_normal_quadratic_kappa_area():
    kappa = 2.5
    mesh, tgt, params = make_instance(potential=("quadratic", kappa),
                                      aniso="surface_normal", weight=("zero", 0),
                                      n_phi=64, n_t=64)
    f = normal_field(mesh, tgt)
    assert abs(anisotropy_energy(f, params) - kappa * 4 * np.pi) / (4 * np.pi * kappa) < 1e-3


# ---------------------------------------------------------------------------
# penalty term
# ---------------------------------------------------------------------------

def test_penalty_line_symmetric_zero():
    mesh, tgt, params = make_instance(weight=("margin", 1.5))
    prof = np.stack([np.sin(mesh.t), np.zeros_like(mesh.t), np.cos(mesh.t)], -1)
    for variant in ("symmetric", "antisymmetric"):
        f = build_from_profile(mesh, ProfileField(mesh.t, prof, variant), tgt)
        assert penalty_energy(f, params) < 1e-18


def test_penalty_constant_e1_on_cylinder():
    lam = 0.7
    mesh = build_mesh(surface("cylinder"), 16, 16)
    tgt = surface("sphere", role="target")
    params = make_params(mesh, tgt, quadratic_potential(0.0),
                         aniso_constant_e3(mesh), weight_constant(mesh, lam))
    f = constant_field(mesh, tgt, [1.0, 0, 0])
    assert abs(penalty_energy(f, params) - 2 * np.pi * lam ** 2) < 1e-12


def test_penalty_zero_weight():
    mesh, tgt, params = make_instance(weight=("zero", 0))
    f = random_field(mesh, tgt, seed=1)
    assert penalty_energy(f, params) == 0.0


def test_penalty_reduced_equals_raw():
    mesh, tgt, params = make_instance(weight=("margin", 1.3))
    f = random_field(mesh, tgt, seed=2)
    assert abs(penalty_energy(f, params) - penalty_energy_raw(f, params)) < 1e-10


# ---------------------------------------------------------------------------
# total energy
# ---------------------------------------------------------------------------

def test_total_normal_field_is_dirichlet():
    mesh, tgt, params = make_instance(n_phi=64, n_t=64,
                                      potential=("quartic", 5.0),
                                      weight=("margin", 1.5))
    bd = total_energy(normal_field(mesh, tgt), params)
    assert abs(bd.total - bd.dirichlet) < 1e-12
    assert abs(bd.total - 8 * np.pi) / (8 * np.pi) < 0.01
    assert abs(bd.total - (bd.dirichlet + bd.anisotropy + bd.penalty)) \
        <= 1e-12 * max(1.0, abs(bd.total))


def test_total_e3_field_anisotropy_only():
    # int (e3 . n)^2 over the unit sphere = 4 pi / 3
    mesh, tgt, params = make_instance(n_phi=64, n_t=64,
                                      potential=("quadratic", 1.0),
                                      aniso="surface_normal", weight=("zero", 0))
    bd = total_energy(constant_field(mesh, tgt, [0, 0, 1.0]), params)
    assert bd.dirichlet < 1e-14 and bd.penalty == 0
    assert abs(bd.anisotropy - 4 * np.pi / 3) / (4 * np.pi / 3) < 1e-2


def test_rotation_invariance():
    mesh, tgt, params = make_instance(weight=("margin", 1.4))
    f = random_field(mesh, tgt, seed=5)
    e0 = total_energy(f, params).total
    for shift in (1, 7):
        rolled = np.roll(f.values, shift, axis=0)
        rotated = rotate(mesh.phi[shift], rolled)
        e1 = total_energy(DiscreteField(mesh, tgt, rotated), params).total
        assert abs(e1 - e0) < 1e-10 * (1 + abs(e0))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def fd_check(mesh, tgt, params, seed, n_coords=50, h=1e-6, rtol=1e-5):
    f = random_field(mesh, tgt, seed=seed)
    grad = euclidean_gradient(f, params)
    rng = np.random.default_rng(seed + 1000)
    idx = rng.integers(0, mesh.n_phi * mesh.n_t * 3, size=n_coords)
    scale = max(1.0, float(np.max(np.abs(grad))))
    for flat in idx:
        i, j, c = np.unravel_index(flat, mesh.shape + (3,))
        vp = f.values.copy()
        vp[i, j, c] += h
        vm = f.values.copy()
        vm[i, j, c] -= h
        ep = total_energy(DiscreteField(mesh, tgt, vp), params).total
        em = total_energy(DiscreteField(mesh, tgt, vm), params).total
        fd = (ep - em) / (2 * h)
        assert abs(fd - grad[i, j, c]) <= rtol * scale, (i, j, c)


def test_gradient_matches_finite_differences_basic():
    mesh, tgt, params = make_instance(n_phi=16, n_t=12, weight=("margin", 1.5))
    fd_check(mesh, tgt, params, seed=3)


def test_gradient_matches_fd_on_cylinder_instance(cylinder_instance):
    mesh, tgt, params = cylinder_instance
    fd_check(mesh, tgt, params, seed=4)


def test_riemannian_gradient_tangency():
    mesh, tgt, params = make_instance(n_phi=16, n_t=12)
    f = random_field(mesh, tgt, seed=6)
    g = riemannian_gradient(f, params)
    # on the unit sphere target the tangent plane is the orthogonal
    # complement of the point itself
    dots = np.sum(g * f.values, axis=-1)
    assert np.max(np.abs(dots)) < 1e-10 * (1 + np.max(np.abs(g)))


def test_riemannian_gradient_directional_fd():
    mesh, tgt, params = make_instance(n_phi=16, n_t=12, weight=("constant", 1.0),
                                      base="cylinder", base_kw={"radius": 2.0},
                                      potential=("quadratic", 1.0),
                                      aniso="constant_e3")
    f = random_field(mesh, tgt, seed=8)
    g = riemannian_gradient(f, params)
    rng = np.random.default_rng(9)
    h = 1e-6
    for _ in range(20):
        i = rng.integers(mesh.n_phi)
        j = rng.integers(mesh.n_t)
        w = rng.normal(size=3)
        from axisym.geometry import tangent_project
        tw = tangent_project(tgt, f.values[i, j], w)
        if np.linalg.norm(tw) < 1e-8:
            continue
        tw = tw / np.linalg.norm(tw)
        vp = f.values.copy()
        vp[i, j] += h * tw
        vm = f.values.copy()
        vm[i, j] -= h * tw
        fd = (total_energy(DiscreteField(mesh, tgt, vp), params).total
              - total_energy(DiscreteField(mesh, tgt, vm), params).total) / (2 * h)
        assert abs(fd - np.dot(g[i, j], tw)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


def test_normal_field_is_critical_point():
    mesh, tgt, params = make_instance(n_phi=128, n_t=128,
                                      potential=("quartic", 5.0),
                                      aniso="surface_normal", weight=("zero", 0))
    for sign in (1.0, -1.0):
        f = DiscreteField(mesh, tgt, sign * surface_normal(mesh))
        g = riemannian_gradient(f, params)
        assert np.max(np.abs(g)) <= 1e-6


def test_constant_e3_on_cylinder_tangent_gradient_zero():
    mesh, tgt, params = make_instance(base="cylinder", target="sphere",
                                      potential=("quadratic", 1.0),
                                      aniso="constant_e3", weight=("zero", 0))
    f = constant_field(mesh, tgt, [0, 0, 1.0])
    g = riemannian_gradient(f, params)
    assert np.max(np.abs(g)) < 1e-12


def test_table_potential_gradient_and_kink_refusal():
    mesh, tgt, _ = make_instance(n_phi=16, n_t=12)
    s = np.linspace(-1.2, 1.2, 41)
    smooth = table_potential(s, 2.0 * (1 - s**2) ** 2 + 0.05)
    params = make_params(mesh, tgt, smooth, aniso_surface_normal(mesh),
                         weight_zero(mesh))
    fd_check(mesh, tgt, params, seed=12, n_coords=20)
    kinked = table_potential(s, np.abs(s))
    assert kinked.non_differentiable
    params_k = make_params(mesh, tgt, kinked, aniso_surface_normal(mesh),
                           weight_zero(mesh))
    f = random_field(mesh, tgt, seed=13)
    with pytest.raises(NonDifferentiableError):
        riemannian_gradient(f, params_k)


# ---------------------------------------------------------------------------
# slice functional
# ---------------------------------------------------------------------------

def test_phi_slice_constant_for_symmetric_field(sphere_instance):
    mesh, tgt, params = sphere_instance
    prof = np.stack([np.sin(mesh.t), np.zeros_like(mesh.t), np.cos(mesh.t)], -1)
    f = build_from_profile(mesh, ProfileField(mesh.t, prof, "symmetric"), tgt)
    phi_e = phi_slice_energy(f, params)
    assert np.max(phi_e) - np.min(phi_e) < 1e-10 * (1 + np.max(phi_e))


def test_phi_slice_zero_for_e3_on_cylinder():
    mesh = build_mesh(surface("cylinder"), 16, 12)
    tgt = surface("sphere", role="target")
    params = make_params(mesh, tgt, quadratic_potential(0.0),
                         aniso_constant_e3(mesh), weight_zero(mesh))
    f = constant_field(mesh, tgt, [0, 0, 1.0])
    assert np.max(np.abs(phi_slice_energy(f, params))) < 1e-18


def test_phi_slice_sum_consistency():
    mesh, tgt, params = make_instance(n_phi=16, n_t=12, weight=("margin", 1.2))
    f = random_field(mesh, tgt, seed=14)
    total = mesh.dphi * np.sum(phi_slice_energy(f, params))
    # independent direct double sum with explicit loops
    surf = mesh.surface
    t0 = surf.curve.interval[0]
    direct = 0.0
    for i in range(mesh.n_phi):
        for j in range(mesh.n_t):
            perp2 = f.values[i, j, 0] ** 2 + f.values[i, j, 1] ** 2
            gval = float(params.potential.g(
                float(np.dot(f.values[i, j], params.aniso.node_values[i, j]))))
            direct += (perp2 / mesh.h1[j] ** 2 + gval) \
                * mesh.sqrtg[j] * mesh.dt * mesh.dphi
        for e in range(mesh.n_t - 1):
            te = t0 + (e + 1) * mesh.dt
            w = float(surf.sqrtg(te) / surf.h2(te) ** 2)
            diff2 = float(np.sum((f.values[i, e + 1] - f.values[i, e]) ** 2))
            direct += w * diff2 / mesh.dt ** 2 * mesh.dt * mesh.dphi
    assert abs(total - direct) < 1e-10 * (1 + abs(direct))


def test_argmin_phi_slice():
    mesh, tgt, params = make_instance(n_phi=16, n_t=12)
    prof = np.stack([np.sin(mesh.t), np.zeros_like(mesh.t), np.cos(mesh.t)], -1)
    f = build_from_profile(mesh, ProfileField(mesh.t, prof, "symmetric"), tgt)
    assert argmin_phi_slice(f, params) == 0.0
    # plant a strictly lowest slice: axis-directed values have no
    # horizontal part and no variation along t
    mesh0, tgt0, params0 = make_instance(n_phi=16, n_t=12,
                                         potential=("quadratic", 0.0),
                                         aniso="constant_e3", weight=("zero", 0))
    g = random_field(mesh0, tgt0, seed=15)
    vals = g.values.copy()
    k = 11
    vals[k] = [0.0, 0.0, 1.0]
    planted = DiscreteField(mesh0, tgt0, vals)
    phi_e = phi_slice_energy(planted, params0)
    # brute-force comparison of all slices
    assert int(np.argmin(phi_e)) == k
    assert argmin_phi_slice(planted, params0) == pytest.approx(mesh0.phi[k])
    assert phi_e.min() <= phi_e.mean() + 1e-15


# ---------------------------------------------------------------------------
# hypothesis margin
# ---------------------------------------------------------------------------

def test_hypothesis_margin_cylinder():
    tgt = surface("sphere", role="target")
    mesh2 = build_mesh(surface("cylinder", radius=2.0), 8, 8)
    rep = hypothesis_margin(mesh2, weight_constant(mesh2, 1.0))
    assert rep.strict and abs(rep.min_h1w - 2 * np.sqrt(2 * np.pi)) < 1e-12
    mesh1 = build_mesh(surface("cylinder", radius=1.0), 8, 8)
    rep1 = hypothesis_margin(mesh1, weight_constant(mesh1, 1.0))
    assert not rep1.strict and rep1.borderline
    assert abs(rep1.min_h1w - np.sqrt(2 * np.pi)) < 1e-12
    rep0 = hypothesis_margin(mesh1, weight_zero(mesh1))
    assert rep0.min_h1w == 0.0 and not rep0.strict and not rep0.borderline
    assert rep.sup_finite


# ---------------------------------------------------------------------------
# inequality chain and discrete Poincare-Wirtinger
# ---------------------------------------------------------------------------

def corpus(mesh, tgt, n=20, seed0=100):
    return [random_field(mesh, tgt, seed=seed0 + k) for k in range(n)]


@pytest.mark.parametrize("inst_kw", [
    dict(),                                                     # sphere, margin 1.5
    dict(base="cylinder", base_kw={"radius": 2.0}, target="sphere",
         potential=("quadratic", 1.0), aniso="constant_e3",
         weight=("constant", 1.0)),
    dict(base="annulus", target="sphere", potential=("quartic", 2.0),
         aniso="constant_e3", weight=("constant", 1.3)),
])
def test_chain_inequalities_on_corpus(inst_kw):
    mesh, tgt, params = make_instance(**inst_kw)
    assert hypothesis_margin(mesh, params.weight).strict
    from axisym.fields import symmetrize
    for f in corpus(mesh, tgt, n=10):
        ct = chain_terms(f, params)
        slack = 1e-9 * (1 + abs(ct.total))
        variant = "symmetric" if params.aniso.variant == "symmetric" else "antisymmetric"
        u = symmetrize(f, argmin_phi_slice(f, params), variant)
        e_u = total_energy(u, params).total
        assert ct.eq1 - e_u >= -slack
        assert ct.eq2 - ct.eq1 >= -slack
        assert ct.total - ct.eq2 >= -slack
        assert e_u <= ct.total + slack


def test_chain_equalities_for_symmetric_input(sphere_instance):
    mesh, tgt, params = sphere_instance
    prof = np.stack([np.sin(mesh.t), np.zeros_like(mesh.t), np.cos(mesh.t)], -1)
    f = build_from_profile(mesh, ProfileField(mesh.t, prof, "symmetric"), tgt)
    from axisym.fields import symmetrize
    u = symmetrize(f, argmin_phi_slice(f, params), "symmetric")
    assert np.max(np.abs(u.values - f.values)) < 1e-12
    ct = chain_terms(f, params)
    e_u = total_energy(u, params).total
    tol = 1e-10 * (1 + abs(ct.total))
    assert abs(ct.eq1 - e_u) < tol
    assert abs(ct.total - ct.eq2) < tol


def row_pw_terms(field):
    """Independent Fourier evaluation of the two sides of the inequality
    sum |m_perp - mean|^2 dphi <= sum |d_phi m_perp|^2 dphi per row."""
    n = field.mesh.n_phi
    coeff = np.fft.rfft(field.values[..., :2], axis=0) / n
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    k2 = np.arange(n // 2 + 1, dtype=float) ** 2
    lhs = 2 * np.pi * np.sum(w[1:, None, None] * np.abs(coeff[1:]) ** 2, axis=(0, 2))
    rhs = 2 * np.pi * np.sum((w * k2)[:, None, None] * np.abs(coeff) ** 2, axis=(0, 2))
    return lhs, rhs


def test_discrete_pw_rows(sphere_instance):
    mesh, tgt, _ = sphere_instance
    for f in corpus(mesh, tgt, n=8, seed0=300):
        lhs, rhs = row_pw_terms(f)
        assert np.all(lhs <= rhs + 1e-9 * (1 + rhs))


def test_pw_equality_iff_first_harmonic(sphere_instance):
    mesh, tgt, _ = sphere_instance
    from axisym.fields import build_from_triple
    rng = np.random.default_rng(31)
    alpha = rng.normal(size=(mesh.n_t, 2))
    beta = rng.normal(size=(mesh.n_t, 2))
    eta = rng.normal(size=mesh.n_t)
    pure = DiscreteField(mesh, tgt, build_from_triple(mesh, alpha, beta, eta))
    lhs, rhs = row_pw_terms(pure)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * (1 + np.max(rhs))
    vals = pure.values.copy()
    vals[..., 0] += 0.1 * np.cos(2 * mesh.phi)[:, None]
    mixed = DiscreteField(mesh, tgt, vals)
    lhs2, rhs2 = row_pw_terms(mixed)
    assert np.all(rhs2 - lhs2 > 1e-4)


def test_weight_general_matches_t_profile():
    from axisym.energy import weight_general, weight_t_profile
    mesh = build_mesh(surface("cylinder", radius=2.0), 16, 12)
    om = 0.5 + 0.3 * np.sin(mesh.t)
    w1 = weight_t_profile(mesh, om)
    w2 = weight_general(mesh, lambda phi, t: np.broadcast_to(om, (16, 12)))
    assert np.max(np.abs(w1.W2 - w2.W2)) < 1e-12
    # cached W2 equals the rectangle quadrature of omega^2 over phi
    direct = mesh.dphi * np.sum(w2.node_values ** 2, axis=0)
    assert np.max(np.abs(w2.W2 - direct)) < 1e-12


def test_weight_rejects_negative():
    mesh = build_mesh(surface("cylinder"), 8, 8)
    from axisym.energy import weight_t_profile
    with pytest.raises(ValueError):
        weight_t_profile(mesh, -np.ones(8))
