"""Discrete target-valued fields on a surface mesh.

A field stores one 3-vector per (phi_i, t_j) node and is constrained to take
values on a target surface of revolution.  Because the target is invariant
under rotations about e3, rotating field values slice-wise stays on target;
this is what makes the symmetrization construction exact at the discrete
level.

Fourier analysis along phi uses the plain DFT of the n_phi samples, for
which the rectangle rule is an exact inner product (Parseval holds to
rounding).  Mode k = +-1 of the horizontal part and mode k = 0 of the
vertical part play a special role: rotation-equivariant (and
contravariant) fields live exactly there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import SurfaceMesh, SurfaceOfRevolution, project_points, rotate, rotate_inverse

CONSTRAINT_TOL = 1e-8

_FMT = "%.17g"  # bit-exact float round-trip in CSV artifacts


@dataclass(frozen=True)
class DiscreteField:
    """Target-valued field sampled on the (phi, t) grid: values[n_phi, n_t, 3]."""

    mesh: SurfaceMesh
    target: SurfaceOfRevolution
    values: np.ndarray

    def __post_init__(self):
        n_phi, n_t = self.mesh.shape
        if self.values.shape != (n_phi, n_t, 3):
            raise ValueError("field values must have shape (n_phi, n_t, 3)")

    def perp(self):
        """Horizontal (e1, e2) components, shape (n_phi, n_t, 2)."""
        return self.values[..., :2]

    def vertical(self):
        return self.values[..., 2]

    def with_values(self, values):
        return DiscreteField(self.mesh, self.target, values)

    def constraint_defect(self):
        """Largest distance of any node value from the target surface."""
        proj, _ = project_points(self.target, self.values)
        return float(np.max(np.linalg.norm(proj - self.values, axis=-1)))


@dataclass(frozen=True)
class ProfileField:
    """One 3-vector per t node; the seed of a rotation-built 2D field."""

    t_nodes: np.ndarray
    values: np.ndarray
    variant: str  # "symmetric" | "antisymmetric"

    def __post_init__(self):
        if self.variant not in ("symmetric", "antisymmetric"):
            raise ValueError("variant must be 'symmetric' or 'antisymmetric'")
        if self.values.shape != (len(self.t_nodes), 3):
            raise ValueError("profile values must have shape (n_t, 3)")


@dataclass(frozen=True)
class ModeDecomposition:
    """First-harmonic structure of a field along phi.

    mean_perp[j]   circular mean of the horizontal part on row j
    alpha_perp[j]  cos(phi) coefficient of the horizontal part
    beta_perp[j]   sin(phi) coefficient of the horizontal part
    eta[j]         circular mean of the vertical component
    residual_energy  quadrature-weighted L2 mass of everything else
    """

    mean_perp: np.ndarray
    alpha_perp: np.ndarray
    beta_perp: np.ndarray
    eta: np.ndarray
    residual_energy: float


def circular_average_perp(field):
    """Row-wise mean over phi of the horizontal components: (n_t, 2)."""
    return field.perp().mean(axis=0)


def mode_decompose(field):
    """DFT along phi; extract k in {0, +-1} of m_perp and k = 0 of m.e3.

    residual_energy collects, with the t-quadrature weight sqrt(g) dt, the
    Parseval mass of all remaining modes (horizontal |k| >= 2 and vertical
    k != 0).
    """
    mesh = field.mesh
    if mesh.n_phi < 8:
        raise ValueError("mode_decompose needs n_phi >= 8")
    n = mesh.n_phi
    coeff = np.fft.rfft(field.values, axis=0) / n        # (n//2+1, n_t, 3)
    mean_perp = coeff[0, :, :2].real
    alpha_perp = 2 * coeff[1, :, :2].real
    beta_perp = -2 * coeff[1, :, :2].imag
    eta = coeff[0, :, 2].real

    # Parseval: sum_i |f_i|^2 dphi = 2 pi sum_k w_k |c_k|^2, w_k doubling
    # interior one-sided modes
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    mass = w[:, None, None] * np.abs(coeff) ** 2          # (n//2+1, n_t, 3)
    resid_perp = mass[2:, :, :2].sum(axis=(0, 2))
    resid_vert = mass[1:, :, 2].sum(axis=0)
    residual = 2 * np.pi * float(
        np.sum((resid_perp + resid_vert) * mesh.sqrtg * mesh.dt))
    return ModeDecomposition(mean_perp, alpha_perp, beta_perp, eta, residual)


def build_from_triple(mesh, alpha_perp, beta_perp, eta):
    """Assemble alpha_perp cos(phi) + beta_perp sin(phi) + eta e3 on the grid.

    The inverse of mode_decompose on its retained modes; the result is not
    projected to any target (used for tests and mode bookkeeping).
    """
    cphi = np.cos(mesh.phi)[:, None]
    sphi = np.sin(mesh.phi)[:, None]
    vals = np.zeros((mesh.n_phi, mesh.n_t, 3))
    vals[..., :2] = cphi[..., None] * alpha_perp[None] + sphi[..., None] * beta_perp[None]
    vals[..., 2] = np.broadcast_to(eta[None, :], (mesh.n_phi, mesh.n_t))
    return vals


def l2_norm(field):
    """Quadrature-weighted L2 norm of the field over the surface."""
    return float(np.sqrt(np.sum(field.mesh.quad_weights
                                * np.sum(field.values ** 2, axis=-1))))


def symmetry_defect(field, variant):
    """Quadrature-weighted L2 distance from the rotation-(contra)variant
    field generated by the phi = 0 meridian; zero iff the sampled field is
    exactly symmetric (variant='symmetric') or antisymmetric."""
    rot = rotate if variant == "symmetric" else rotate_inverse
    ref = rot(field.mesh.phi[:, None], field.values[0][None, :, :])
    diff = field.values - ref
    return float(np.sqrt(np.sum(field.mesh.quad_weights * np.sum(diff ** 2, axis=-1))))


def line_symmetry_classify(field, tol):
    """Label each t row 'symmetric', 'antisymmetric' or 'neither'.

    A row is labeled by whichever rotation law reproduces it from its
    phi = 0 value with RMS defect below tol (symmetric wins ties; rows of
    axis-directed values match both laws).  The field has line symmetry
    iff no row is labeled 'neither'.
    """
    mesh = field.mesh
    ref_s = rotate(mesh.phi[:, None], field.values[0][None, :, :])
    ref_a = rotate_inverse(mesh.phi[:, None], field.values[0][None, :, :])
    d_s = np.sqrt(np.mean(np.sum((field.values - ref_s) ** 2, axis=-1), axis=0))
    d_a = np.sqrt(np.mean(np.sum((field.values - ref_a) ** 2, axis=-1), axis=0))
    labels = np.where(d_s < tol, "symmetric",
                      np.where(d_a < tol, "antisymmetric", "neither"))
    return [str(v) for v in labels]


def symmetrize(field, phi_star, variant):
    """Replicate the phi_star slice around the axis by the rotation law.

    symmetric:      u(phi, t) = A(phi)^T A(phi*)  m(phi*, t)
    antisymmetric:  u(phi, t) = A(phi)  A(phi*)^T m(phi*, t)

    phi_star must be a mesh node.  The output lies exactly on the target
    (rotations preserve it) and reproduces the input when the input already
    obeys the rotation law.
    """
    mesh = field.mesh
    idx = int(np.argmin(np.abs(mesh.phi - float(phi_star) % (2 * np.pi))))
    if abs(mesh.phi[idx] - float(phi_star) % (2 * np.pi)) > 1e-9:
        raise ValueError("phi_star must coincide with a mesh phi node")
    slice_vals = field.values[idx]                        # (n_t, 3)
    if variant == "symmetric":
        seed = rotate_inverse(mesh.phi[idx], slice_vals)
        vals = rotate(mesh.phi[:, None], seed[None, :, :])
    elif variant == "antisymmetric":
        seed = rotate(mesh.phi[idx], slice_vals)
        vals = rotate_inverse(mesh.phi[:, None], seed[None, :, :])
    else:
        raise ValueError("variant must be 'symmetric' or 'antisymmetric'")
    return field.with_values(vals)


def build_from_profile(mesh, profile, target=None):
    """Sweep a t-profile around the axis: rotation-equivariant for the
    symmetric variant, contravariant for the antisymmetric one."""
    if len(profile.t_nodes) != mesh.n_t or np.max(np.abs(profile.t_nodes - mesh.t)) > 1e-12:
        raise ValueError("profile t nodes do not match the mesh")
    rot = rotate if profile.variant == "symmetric" else rotate_inverse
    vals = rot(mesh.phi[:, None], profile.values[None, :, :])
    if target is None:
        target = mesh.surface
    return DiscreteField(mesh, target, vals)


def random_field(mesh, target, seed, smoothness=3):
    """Deterministic band-limited random field projected to the target.

    Draws Fourier modes |k| <= smoothness in phi with low-order polynomial
    t-envelopes, then projects every node to the target.  Projection may
    reintroduce high phi modes; that is acceptable for test corpora.
    """
    rng = np.random.default_rng(seed)
    n_phi, n_t = mesh.shape
    tt = (mesh.t - mesh.t[0]) / (mesh.t[-1] - mesh.t[0] + 1e-300)
    tpows = np.stack([tt ** p for p in range(4)])          # (4, n_t)
    vals = np.zeros((n_phi, n_t, 3))
    for k in range(smoothness + 1):
        ck = np.cos(k * mesh.phi)[:, None]
        sk = np.sin(k * mesh.phi)[:, None]
        for c in range(3):
            a = rng.normal(size=4) @ tpows                 # (n_t,)
            b = rng.normal(size=4) @ tpows if k > 0 else 0.0
            vals[..., c] += ck * a[None, :] + (sk * b[None, :] if k > 0 else 0.0)
    # bias away from the axis so sphere projections are well defined
    vals[..., 0] += 0.1
    proj, _ = project_points(target, vals)
    return DiscreteField(mesh, target, proj)


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits; bit-exact round trip)
# ---------------------------------------------------------------------------

def field_to_csv(field, path_or_buf, header_comment=None):
    rows = _field_rows(field)
    _write_csv(path_or_buf, ["phi_index", "t_index", "phi", "t", "mx", "my", "mz"],
               rows, header_comment)


def _field_rows(field):
    mesh = field.mesh
    for i in range(mesh.n_phi):
        for j in range(mesh.n_t):
            v = field.values[i, j]
            yield (str(i), str(j), _FMT % mesh.phi[i], _FMT % mesh.t[j],
                   _FMT % v[0], _FMT % v[1], _FMT % v[2])


def field_from_csv(path_or_buf, mesh, target):
    vals = np.zeros((mesh.n_phi, mesh.n_t, 3))
    for row in _read_csv(path_or_buf):
        i, j = int(row["phi_index"]), int(row["t_index"])
        vals[i, j] = [float(row["mx"]), float(row["my"]), float(row["mz"])]
    return DiscreteField(mesh, target, vals)


def profile_to_csv(profile, path_or_buf, header_comment=None):
    rows = ((str(j), _FMT % profile.t_nodes[j], _FMT % profile.values[j, 0],
             _FMT % profile.values[j, 1], _FMT % profile.values[j, 2])
            for j in range(len(profile.t_nodes)))
    _write_csv(path_or_buf, ["t_index", "t", "gx", "gy", "gz"], rows,
               header_comment)


def profile_from_csv(path_or_buf, variant):
    t, vals = [], []
    for row in _read_csv(path_or_buf):
        t.append(float(row["t"]))
        vals.append([float(row["gx"]), float(row["gy"]), float(row["gz"])])
    return ProfileField(np.array(t), np.array(vals), variant)


def _write_csv(path_or_buf, header, rows, comment):
    def emit(f):
        if comment:
            f.write("# " + comment + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    if hasattr(path_or_buf, "write"):
        emit(path_or_buf)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as f:
            emit(f)


def _read_csv(path_or_buf):
    def parse(f):
        filtered = (ln for ln in f if not ln.startswith("#"))
        yield from csv.DictReader(filtered)

    if hasattr(path_or_buf, "read"):
        yield from parse(path_or_buf)
    else:
        with open(path_or_buf, "r", encoding="utf-8", newline="") as f:
            yield from parse(f)
