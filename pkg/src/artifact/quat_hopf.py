"""Quaternions, the Hopf fibration S^3 -> S^2 and Hopf tori over closed spherical curves.

Quaternions are stored as arrays ``(..., 4)`` ordered ``(w, x, y, z)`` for
``w + x i + y j + z k``. A point ``(a, b, c)`` of S^2 in R^3 is identified with
``a + b j + c k``, the image of the Hopf map ``pi(q) = tilde(q) q`` where tilde
fixes 1, j, k and sends i to -i. Fibers are the circles ``e^{i phi} q``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import elastic_flow as ef
from .curve import DiscreteCurveS2
from .errors import InvalidInputError, NumericalError

UNIT_TOL = 1e-9


# ---------------------------------------------------------------------------
# quaternion algebra


def qmul(a, b):
    """Hamilton product of quaternion arrays, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qtilde(q):
    """The involution fixing 1, j, k and sending i to -i."""
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, 1.0, 1.0])


def qexp_i(phi):
    """e^{i phi} as quaternion array."""
    phi = np.asarray(phi, dtype=float)
    z = np.zeros_like(phi)
    return np.stack([np.cos(phi), np.sin(phi), z, z], axis=-1)


def qinner(a, b):
    """Euclidean inner product in R^4 = Re(conj(a) b)."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def sphere_to_quat(v):
    """(a, b, c) -> a + b j + c k."""
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    return np.stack([v[..., 0], z, v[..., 1], v[..., 2]], axis=-1)


def quat_to_sphere(q):
    """Drop the i-component: a + x i + b j + c k -> (a, b, c)."""
    q = np.asarray(q, dtype=float)
    return np.stack([q[..., 0], q[..., 2], q[..., 3]], axis=-1)


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.w, self.x, self.y, self.z], dtype=dtype or float)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(np.asarray(self), np.asarray(other)))
        return Quaternion.from_array(np.asarray(self) * float(other))

    def __rmul__(self, other):
        return Quaternion.from_array(np.asarray(self) * float(other))

    def __add__(self, other):
        return Quaternion.from_array(np.asarray(self) + np.asarray(other))

    def __sub__(self, other):
        return Quaternion.from_array(np.asarray(self) - np.asarray(other))

    def __neg__(self):
        return Quaternion.from_array(-np.asarray(self))

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def tilde(self) -> "Quaternion":
        return involution_tilde(self)

    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self)))

    def isclose(self, other, tol=1e-12) -> bool:
        return bool(np.max(np.abs(np.asarray(self) - np.asarray(other))) <= tol)


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


class UnitQuaternion(Quaternion):
    """Quaternion of norm one (checked to UNIT_TOL, then renormalized)."""

    def __init__(self, w, x=0.0, y=0.0, z=0.0):
        a = np.array([w, x, y, z], dtype=float)
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > UNIT_TOL:
            raise InvalidInputError(f"quaternion norm {nrm} is not 1")
        a /= nrm
        super().__init__(*map(float, a))

    @classmethod
    def normalized(cls, q) -> "UnitQuaternion":
        a = np.asarray(q, dtype=float)
        return cls(*(a / np.linalg.norm(a)))


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul(np.asarray(a), np.asarray(b)))


def involution_tilde(q: Quaternion) -> Quaternion:
    return Quaternion.from_array(qtilde(np.asarray(q)))


# ---------------------------------------------------------------------------
# Hopf map


def _check_unit(q):
    nrm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(nrm - 1.0) > UNIT_TOL):
        raise InvalidInputError("Hopf map needs unit quaternions")


def hopf_map(q):
    """pi(q) = tilde(q) q as a unit 3-vector (array in, array out)."""
    q = np.asarray(q, dtype=float)
    _check_unit(q)
    return quat_to_sphere(qmul(qtilde(q), q))


def hopf_differential(q, v):
    """D pi_q(v) = tilde(v) q + tilde(q) v, returned as a quaternion array."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    return qmul(qtilde(v), q) + qmul(qtilde(q), v)


def hopf_section(point):
    """A unit quaternion over ``point`` in S^2 (inside span{1, j, k})."""
    p = sphere_to_quat(np.asarray(point, dtype=float))
    s = p + np.array([1.0, 0.0, 0.0, 0.0])
    nrm = np.linalg.norm(s)
    if nrm < 1e-8:
        return np.array([0.0, 0.0, 1.0, 0.0])
    return s / nrm


# ---------------------------------------------------------------------------
# horizontal lift


def to_speed_two(curve: DiscreteCurveS2) -> DiscreteCurveS2:
    """Uniform samples tagged for the speed-two convention (parameter range L/2)."""
    if curve.speed_tag == "nonuniform":
        curve = ef.reparametrize_arclength(curve)
    return curve.with_tag("two")


def _interp_mid(f):
    """Values at k + 1/2 from periodic samples by 4-point interpolation."""
    return (-np.roll(f, 1, axis=0) + 9.0 * f + 9.0 * np.roll(f, -1, axis=0)
            - np.roll(f, -2, axis=0)) / 16.0


LIFT_GHOSTS = 4


@dataclass(frozen=True, eq=False)
class HorizontalLift:
    """Samples of the unit-speed horizontal lift over a speed-two curve.

    ``samples`` holds ``loops * N`` points at lift arc length ``k * ds``;
    ``end`` is the point after the last loop. ``u`` is the span{j, k} field
    with eta' = u eta over the first loop and ``u_defect`` the largest
    component removed when projecting it onto span{j, k}. ``ghosts`` and
    ``u_ghosts`` hold LIFT_GHOSTS values on each side of the first loop,
    obtained by integrating on past s = 0 and s = L.
    """

    samples: np.ndarray
    end: np.ndarray
    base: DiscreteCurveS2
    holonomy_phase: float
    ds: float
    loops: int
    u: np.ndarray
    u_defect: float
    ghosts: np.ndarray
    u_ghosts: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def loop_samples(self) -> np.ndarray:
        return self.samples[: self.n]

    @property
    def length(self) -> float:
        """Lift length per loop (half the base length)."""
        return self.n * self.ds

    def closure_defect(self) -> float:
        return float(np.linalg.norm(self.end - self.samples[0]))

    def extended(self, pad: int = 2) -> np.ndarray:
        """First-loop samples with ``pad`` integrated ghosts on each side.

        Ghosts continue the integration instead of twisting the first loop
        by the holonomy, so differences across the seam do not pick up the
        accumulated integration error divided by ds.
        """
        return _pad_with(self.loop_samples, self.ghosts, pad)

    def extended_u(self, pad: int = 2) -> np.ndarray:
        return _pad_with(self.u, self.u_ghosts, pad)


def _pad_with(values, ghosts, pad):
    if not 0 <= pad <= LIFT_GHOSTS:
        raise InvalidInputError(f"pad must lie in [0, {LIFT_GHOSTS}]")
    g = LIFT_GHOSTS
    return np.concatenate([ghosts[g - pad: g], values, ghosts[g: g + pad]])


def _fd_padded(f, pad, dx):
    """Fourth-order first derivative of padded samples, returns unpadded length."""
    n = f.shape[0] - 2 * pad
    sl = lambda k: f[pad + k: pad + k + n]
    return (sl(-2) - 8.0 * sl(-1) + 8.0 * sl(1) - sl(2)) / (12.0 * dx)


def horizontal_lift(curve: DiscreteCurveS2, start=None, loops: int = 1) -> HorizontalLift:
    """Integrate eta' = conj(tilde(eta)) gamma'/2 along a speed-two curve.

    The equation is equivalent to eta' = u eta with
    u = conj(tilde(eta)) (gamma'/2) conj(eta) in span{j, k}. Classical RK4 with
    gamma' from fourth-order periodic differences and 4-point midpoint
    interpolation; |eta| is renormalized after every step.
    """
    if curve.speed_tag != "two":
        raise InvalidInputError("horizontal_lift needs a speed-two curve; use to_speed_two")
    if loops < 1:
        raise InvalidInputError("loops must be positive")
    pts = curve.points
    n = pts.shape[0]
    steps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if np.min(steps) <= 1e-14:
        raise InvalidInputError("curve has a zero-speed segment")
    length = ef.curve_length(curve)
    ds = 0.5 * length / n
    dg = sphere_to_quat(ef.periodic_diff(pts, ds))
    dg_mid = _interp_mid(dg)
    if start is None:
        eta = hopf_section(pts[0])
    else:
        eta = np.asarray(start, dtype=float)
        if abs(np.linalg.norm(eta) - 1.0) > UNIT_TOL:
            raise InvalidInputError("start must be a unit quaternion")
        if np.linalg.norm(hopf_map(eta) - pts[0]) > 1e-8:
            raise InvalidInputError("start does not lie over the first curve point")
    flip = np.array([1.0, 1.0, -1.0, -1.0])  # conj(tilde(q)) componentwise

    def rhs(e, g):
        return 0.5 * qmul(e * flip, g)

    def advance(e, j, h):
        # one RK4 step from node j to node j +- 1 (indices periodic)
        if h > 0:
            g0, gm, g1 = dg[j % n], dg_mid[j % n], dg[(j + 1) % n]
        else:
            g0, gm, g1 = dg[j % n], dg_mid[(j - 1) % n], dg[(j - 1) % n]
        k1 = rhs(e, g0)
        k2 = rhs(e + 0.5 * h * k1, gm)
        k3 = rhs(e + 0.5 * h * k2, gm)
        k4 = rhs(e + h * k3, g1)
        e = e + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        e = e / np.linalg.norm(e)
        if not np.all(np.isfinite(e)):
            raise NumericalError("lift integration produced non-finite values")
        return e

    out = np.empty((loops * n, 4))
    for k in range(loops * n):
        out[k] = eta
        eta = advance(eta, k, ds)
    after_one = out[n] if loops > 1 else eta
    hol = qmul(after_one, qconj(out[0]))
    theta = math.atan2(hol[1], hol[0]) % (2.0 * math.pi)

    g = LIFT_GHOSTS
    ghosts = np.empty((2 * g, 4))
    e = out[0]
    for k in range(g):
        e = advance(e, -k, -ds)
        ghosts[g - 1 - k] = e
    e = after_one
    for k in range(g):
        ghosts[g + k] = e
        e = advance(e, n + k, ds)
    ghost_idx = np.concatenate([np.arange(-g, 0), np.arange(n, n + g)]) % n

    def speed_field(eta_s, dg_s):
        return qmul(qmul(eta_s * flip, 0.5 * dg_s), qconj(eta_s))

    u = speed_field(out[:n], dg)
    defect = float(np.max(np.abs(u[:, :2]) / np.linalg.norm(u, axis=1)[:, None]))
    u_ghosts = speed_field(ghosts, dg[ghost_idx])
    for f in (u, u_ghosts):
        f[:, :2] = 0.0
        f /= np.linalg.norm(f, axis=1)[:, None]
    return HorizontalLift(out, eta, curve, theta, ds, loops, u, defect, ghosts, u_ghosts)


def lift_curvature(lift: HorizontalLift) -> np.ndarray:
    """Geodesic curvature of the base curve (unit-speed, left normal) from u.

    k = <i u, u'>/2 with ' the lift arc-length derivative; u' uses the
    integrated ghost values past the seam.
    """
    du = _fd_padded(lift.extended_u(2), 2, lift.ds)
    iu = qmul(np.array([0.0, 1.0, 0.0, 0.0]), lift.u)
    return 0.5 * qinner(iu, du)


def projection_residual(lift: HorizontalLift) -> float:
    """max_k |pi(eta_k) - gamma_k| over all stored samples."""
    n = lift.n
    pts = lift.base.points
    idx = np.arange(lift.samples.shape[0]) % n
    return float(np.max(np.linalg.norm(hopf_map(lift.samples) - pts[idx], axis=1)))


def lift_derivative(lift: HorizontalLift) -> np.ndarray:
    """eta' on the first loop by fourth-order differences with twisted ghosts."""
    return _fd_padded(lift.extended(2), 2, lift.ds)


def horizontality_defect(lift: HorizontalLift) -> float:
    """max |Re(conj(eta') i eta)| over the first loop."""
    eta = lift.loop_samples
    d = lift_derivative(lift)
    ieta = qmul(np.array([0.0, 1.0, 0.0, 0.0]), eta)
    return float(np.max(np.abs(qinner(d, ieta))))


# ---------------------------------------------------------------------------
# Hopf tori


@dataclass(frozen=True, eq=False)
class HopfTorusGrid:
    """X(s, phi) = e^{i phi} eta(s) and its unit normal i u(s) e^{-i phi} eta(s)."""

    grid: np.ndarray  # (Ns, Nphi, 4)
    normal: np.ndarray  # (Ns, Nphi, 4)
    s_values: np.ndarray
    phi_values: np.ndarray
    kappa: np.ndarray
    lift: HorizontalLift

    @property
    def shape(self):
        return self.grid.shape[:2]


def build_hopf_torus(lift: HorizontalLift, n_phi: int = 64) -> HopfTorusGrid:
    if n_phi < 8:
        raise InvalidInputError("n_phi must be at least 8")
    eta = lift.loop_samples
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    e_phi = qexp_i(phi)
    grid = qmul(e_phi[None, :, :], eta[:, None, :])
    i_u = qmul(np.array([0.0, 1.0, 0.0, 0.0]), lift.u)
    normal = qmul(qmul(i_u[:, None, :], qexp_i(-phi)[None, :, :]), eta[:, None, :])
    s = lift.ds * np.arange(lift.n)
    return HopfTorusGrid(grid, normal, s, phi, lift_curvature(lift), lift)


def _torus_padded(tg: HopfTorusGrid, pad: int = 2) -> np.ndarray:
    """Grid rows extended in s using X(s + L, phi) = e^{i(phi + theta)} eta(s)."""
    eta_ext = tg.lift.extended(pad)
    return qmul(qexp_i(tg.phi_values)[None, :, :], eta_ext[:, None, :])


def torus_frame(tg: HopfTorusGrid):
    """Partials X_s, X_phi, X_ss, X_sphi, X_phiphi on the grid.

    s-derivatives are finite differences; the fiber is left multiplication
    by exp(i phi), so phi-derivatives are exact: X_phi = iX, X_phiphi = -X.
    """
    pad = 2
    xe = _torus_padded(tg, pad)
    ds = tg.lift.ds
    xs = _fd_padded(xe, pad, ds)
    xss = _fd2_padded(xe, pad, ds)
    i_unit = np.array([0.0, 1.0, 0.0, 0.0])
    xphi = qmul(i_unit, tg.grid)
    xsphi = qmul(i_unit, xs)
    return xs, xphi, xss, xsphi, -tg.grid


def _fd2_padded(f, pad, dx):
    n = f.shape[0] - 2 * pad
    sl = lambda k: f[pad + k: pad + k + n]
    return (-sl(-2) + 16.0 * sl(-1) - 30.0 * sl(0) + 16.0 * sl(1) - sl(2)) / (12.0 * dx * dx)


def _normal4(x, a, b):
    """Unit vector orthogonal to x, a, b in R^4 (generalized cross product)."""
    m = np.stack([x, a, b], axis=-2)
    n = np.empty(x.shape)
    for c in range(4):
        cols = [k for k in range(4) if k != c]
        n[..., c] = (-1) ** c * np.linalg.det(m[..., cols])
    return n / np.linalg.norm(n, axis=-1)[..., None]


def mesh_fundamental_forms(tg: HopfTorusGrid):
    """First and second fundamental forms of the grid from finite differences.

    The unit normal is recomputed from the partials (independent of u), then
    oriented along the stored normal. Returns (E, F, G, e, f, g, normal).
    """
    xs, xphi, xss, xsphi, xpp = torus_frame(tg)
    nrm = _normal4(tg.grid, xs, xphi)
    nrm *= np.sign(qinner(nrm, tg.normal))[..., None]
    E, F, G = qinner(xs, xs), qinner(xs, xphi), qinner(xphi, xphi)
    e, f, g = qinner(xss, nrm), qinner(xsphi, nrm), qinner(xpp, nrm)
    return E, F, G, e, f, g, nrm


def mesh_mean_curvature(tg: HopfTorusGrid) -> np.ndarray:
    E, F, G, e, f, g, _ = mesh_fundamental_forms(tg)
    return (e * G - 2.0 * f * F + g * E) / (E * G - F * F)


def mesh_area(tg: HopfTorusGrid) -> float:
    xs, xphi, *_ = torus_frame(tg)
    E, F, G = qinner(xs, xs), qinner(xs, xphi), qinner(xphi, xphi)
    dmu = np.sqrt(E * G - F * F)
    return float(np.sum(dmu) * tg.lift.ds * (2.0 * np.pi / tg.phi_values.size))


def mesh_willmore_energy(tg: HopfTorusGrid) -> float:
    """int (1 + H^2/4) dmu by quadrature over the grid, H from the mesh itself."""
    E, F, G, e, f, g, _ = mesh_fundamental_forms(tg)
    H = (e * G - 2.0 * f * F + g * E) / (E * G - F * F)
    dmu = np.sqrt(E * G - F * F)
    return float(np.sum((1.0 + 0.25 * H * H) * dmu) * tg.lift.ds
                 * (2.0 * np.pi / tg.phi_values.size))


# ---------------------------------------------------------------------------
# curvature formulas


@dataclass(frozen=True, eq=False)
class TorusCurvature:
    """Second fundamental form data of a Hopf torus in closed form in k.

    ``A`` holds the coefficient matrices [[2k, 1], [1, 0]] (times the unit
    normal) in the orthonormal frame (d_s X, d_phi X).
    ``deriv_A_sq[k-1]`` is |(D_perp)^k A|^2 = 2^(2+2k) |(d_sigma)^k k|^2.
    """

    kappa: np.ndarray
    A: np.ndarray
    H: np.ndarray
    A0_sq: np.ndarray
    Q_H: np.ndarray
    laplace_perp_H: np.ndarray
    deriv_A_sq: tuple


def torus_curvature(kappa_s, ds: float = 1.0) -> TorusCurvature:
    """Closed-form curvature quantities of the Hopf torus over a curve with curvature k.

    ``kappa_s`` is the base curvature sampled on a periodic grid of lift arc
    length with spacing ``ds``; base arc length is twice lift arc length, so
    each base derivative is half a lift derivative.
    """
    k = np.asarray(kappa_s, dtype=float)
    if k.ndim != 1 or k.size < 8:
        raise InvalidInputError("torus_curvature needs at least 8 samples")
    A = np.zeros((k.size, 2, 2))
    A[:, 0, 0] = 2.0 * k
    A[:, 0, 1] = A[:, 1, 0] = 1.0
    H = 2.0 * k
    k_s = ef.periodic_diff(k, ds)
    k_ss = ef.periodic_diff(k_s, ds)
    k_sigma, k_sigmasigma = 0.5 * k_s, 0.25 * k_ss
    return TorusCurvature(
        kappa=k,
        A=A,
        H=H,
        A0_sq=2.0 * (k * k + 1.0),
        Q_H=4.0 * (k ** 3 + k),
        laplace_perp_H=8.0 * k_sigmasigma,
        deriv_A_sq=(16.0 * k_sigma ** 2, 64.0 * k_sigmasigma ** 2),
    )


# ---------------------------------------------------------------------------
# energies and the Hopf-Willmore identity


def willmore_energy(curve: DiscreteCurveS2) -> float:
    """Willmore energy of the Hopf torus over ``curve``: pi times its elastic energy."""
    return math.pi * ef.elastic_energy(curve)


def hopf_torus(curve: DiscreteCurveS2, n_phi: int = 64) -> HopfTorusGrid:
    return build_hopf_torus(horizontal_lift(to_speed_two(curve)), n_phi)


@dataclass(frozen=True)
class HopfWillmoreCheck:
    pointwise: float
    integrated: float
    lhs_integral: float
    rhs_integral: float

    @property
    def residual(self) -> float:
        return self.pointwise + self.integrated


def willmore_gradient_scalar(kappa, ds):
    """Coefficient c with grad W = c N: 2 (2 k_sigmasigma + k^3 + k)."""
    tc = torus_curvature(kappa, ds)
    return 0.5 * (tc.laplace_perp_H + tc.Q_H)


def hopf_willmore_check(curve: DiscreteCurveS2, n_phi: int = 8) -> HopfWillmoreCheck:
    """Compare D pi(grad W(F)) with 4 grad E(gamma) sample by sample and in L2.

    grad W comes from the closed-form torus curvature along the lift; grad E
    from the curve-side finite-difference operator. The two discretizations
    share only the input samples.
    """
    unit = curve if curve.speed_tag == "unit" else ef.reparametrize_arclength(curve)
    lift = horizontal_lift(to_speed_two(unit))
    tg = build_hopf_torus(lift, n_phi)
    c = willmore_gradient_scalar(tg.kappa, lift.ds)
    gradW = c[:, None, None] * tg.normal
    image = hopf_differential(tg.grid, gradW)  # (Ns, Nphi, 4)
    gradE = sphere_to_quat(ef.l2_gradient(unit))
    pointwise = float(np.max(np.linalg.norm(image - 4.0 * gradE[:, None, :], axis=-1)))
    lhs = 2.0 * math.pi * float(np.sum(c * c)) * lift.ds
    rhs = 4.0 * math.pi * ef.l2_norm(unit, ef.l2_gradient(unit)) ** 2
    integrated = abs(lhs - rhs) / max(rhs, 1.0)
    return HopfWillmoreCheck(pointwise, integrated, lhs, rhs)


def hopf_willmore_residual(curve: DiscreteCurveS2) -> float:
    return hopf_willmore_check(curve).residual


# ---------------------------------------------------------------------------
# lattice and area


@dataclass(frozen=True)
class HopfLattice:
    gen1: tuple
    gen2: tuple
    modulus: complex


def hopf_lattice(length_L: float, area_A: float) -> HopfLattice:
    """Lattice generated by (2 pi, 0) and (A/2, L/2); modulus gen2/gen1 as a complex number."""
    if not length_L > 0:
        raise InvalidInputError("length must be positive")
    if not 0.0 < area_A < 4.0 * math.pi:
        raise InvalidInputError(f"area must lie in (0, 4 pi), got {area_A}")
    return HopfLattice((2.0 * math.pi, 0.0), (0.5 * area_A, 0.5 * length_L),
                       complex(area_A, length_L) / (4.0 * math.pi))


def _arcs_cross(a, b, c, d):
    """Do the short great-circle arcs ab and cd intersect? Vectorized over rows."""
    n1 = np.cross(a, b)
    n2 = np.cross(c, d)
    x = np.cross(n1, n2)
    nx = np.linalg.norm(x, axis=-1)
    ok = nx > 1e-15
    x = x / np.where(ok, nx, 1.0)[..., None]
    hit = np.zeros(nx.shape, dtype=bool)
    for sign in (1.0, -1.0):
        y = sign * x
        on1 = (np.einsum("...i,...i", np.cross(a, y), n1) >= 0) & \
              (np.einsum("...i,...i", np.cross(y, b), n1) >= 0)
        on2 = (np.einsum("...i,...i", np.cross(c, y), n2) >= 0) & \
              (np.einsum("...i,...i", np.cross(y, d), n2) >= 0)
        hit |= on1 & on2
    return hit & ok


def self_intersects(curve: DiscreteCurveS2, chunk: int = 256) -> bool:
    """Segment-crossing test between all non-adjacent geodesic edges."""
    p = curve.points
    q = np.roll(p, -1, axis=0)
    n = p.shape[0]
    idx = np.arange(n)
    for start in range(0, n, chunk):
        i = idx[start:start + chunk]
        a, b = p[i][:, None, :], q[i][:, None, :]
        c, d = p[None, :, :], q[None, :, :]
        hit = _arcs_cross(a, b, c, d)
        gap = np.abs(i[:, None] - idx[None, :])
        gap = np.minimum(gap, n - gap)
        if np.any(hit & (gap > 1)):
            return True
    return False


def enclosed_area(curve: DiscreteCurveS2, check_simple: bool = True) -> float:
    """Area of the domain to the left of a simple closed curve, 2 pi - int k_g ds."""
    if check_simple and self_intersects(curve):
        raise InvalidInputError("curve is self-intersecting; enclosed area is undefined")
    geo = ef.curve_geometry(curve)
    return 2.0 * math.pi - geo.integrate(geo.signed_curvature)


# ---------------------------------------------------------------------------
# export


def stereographic(points4, center=(-1.0, 0.0, 0.0, 0.0)):
    """Stereographic projection of S^3 from ``center`` onto the orthogonal R^3."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    # orthonormal basis of the complement of c
    basis = np.linalg.svd(np.eye(4) - np.outer(c, c))[0][:, :3]
    if np.allclose(c, [-1.0, 0.0, 0.0, 0.0]):
        basis = np.eye(4)[:, 1:]
    x = np.asarray(points4, dtype=float)
    t = 1.0 - x @ c
    if np.any(t < 1e-12):
        raise NumericalError("a mesh vertex coincides with the projection center")
    return (x @ basis) / t[..., None]


def projection_center(curve_points, candidates: int = 512) -> np.ndarray:
    """Point of S^3 on the fiber over the S^2 point farthest from the curve.

    That fiber misses the Hopf torus, so stereographic projection from it
    keeps every mesh vertex at a finite distance.
    """
    k = np.arange(candidates) + 0.5
    z = 1.0 - 2.0 * k / candidates
    r = np.sqrt(1.0 - z * z)
    ang = math.pi * (3.0 - math.sqrt(5.0)) * k
    cand = np.column_stack([z, r * np.cos(ang), r * np.sin(ang)])
    # farthest candidate: smallest maximal cosine to the curve samples
    closest = np.max(cand @ np.asarray(curve_points, dtype=float).T, axis=1)
    return hopf_section(cand[int(np.argmin(closest))])


def write_obj(tg: HopfTorusGrid, path, center=None) -> np.ndarray:
    """OBJ mesh: stereographic vertices, quad faces, s outer and phi inner.

    An extra closing row X(L, phi) = e^{i phi} eta(L) is appended so the seam
    in s is geometrically closed even when the holonomy is not a multiple of
    the phi spacing. ``center`` defaults to ``projection_center`` of the base
    curve; the center used is returned.
    """
    ns, nphi = tg.shape
    if center is None:
        center = projection_center(tg.lift.base.points)
    last = qmul(qexp_i(tg.phi_values), tg.lift.extended(1)[-1][None, :])
    verts = stereographic(np.concatenate([tg.grid.reshape(-1, 4), last]), center)
    with open(path, "w", encoding="utf-8") as fh:
        for v in verts:
            fh.write(f"v {v[0]:.10g} {v[1]:.10g} {v[2]:.10g}\n")
        for a in range(ns):
            for b in range(nphi):
                b1 = (b + 1) % nphi
                i00 = a * nphi + b + 1
                i01 = a * nphi + b1 + 1
                i10 = (a + 1) * nphi + b + 1
                i11 = (a + 1) * nphi + b1 + 1
                fh.write(f"f {i00} {i10} {i11} {i01}\n")
    return np.asarray(center, dtype=float)


def write_lift_json(lift: HorizontalLift, path) -> None:
    doc = {
        "ds": lift.ds,
        "loops": lift.loops,
        "holonomy_phase": lift.holonomy_phase,
        "u_defect": lift.u_defect,
        "samples": lift.samples.tolist(),
        "end": lift.end.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
