"""Closed elastic curves gamma_(m,n) on S^2: classification, lengths, energies, synthesis.

A closed elastica is labelled by coprime (m, n) with m/n < 2 - sqrt(2): its
curvature k(s) = sqrt(a3) cn(r s; p) runs through n periods while the curve
winds m times around its symmetry axis. The modulus p is found from the
closed-form wavelength, and length and energy follow from the real period
omega_1 and the quasi-period G_2 of the curvature's Weierstrass lattice.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .curve import DiscreteCurveS2
from .errors import ClosureError, ConvergenceError, InvalidInputError
from .special_fn import (DEFAULT_SERIES, ModularPoint, SeriesConfig, eisenstein_G2,
                         elliptic_E, elliptic_K, heuman_lambda, jacobi_elliptic, klein_J)

RATIO_BOUND = 2.0 - math.sqrt(2.0)
P_MAX = math.sqrt(0.5)
GAP_THRESHOLD = 8.0 * math.sqrt(math.pi / 3.0)
OMEGA_STAR = math.sqrt(12.0 * math.pi)
BISECTION_CAP = 200


@dataclass(frozen=True, order=True)
class AdmissiblePair:
    """Coprime (m, n) with 0 < m/n < 2 - sqrt(2)."""

    m: int
    n: int

    def __post_init__(self):
        m, n = self.m, self.n
        if not (isinstance(m, (int, np.integer)) and isinstance(n, (int, np.integer))):
            raise InvalidInputError("m and n must be integers")
        if m < 1 or n < 1:
            raise InvalidInputError(f"(m, n) = ({m}, {n}) must be positive")
        if math.gcd(m, n) != 1:
            raise InvalidInputError(f"(m, n) = ({m}, {n}) is not coprime")
        if not m / n < RATIO_BOUND:
            raise InvalidInputError(
                f"(m, n) = ({m}, {n}): ratio m/n = {m / n:.6g} violates m/n < 2 - sqrt(2) = {RATIO_BOUND:.6g}"
            )

    @property
    def target_wavelength(self) -> float:
        return 2.0 * math.pi * self.m / self.n


def admissible_pairs(n_max: int) -> list[AdmissiblePair]:
    """All admissible pairs with n <= n_max, sorted by (n, m)."""
    if n_max < 2:
        raise InvalidInputError("n_max must be at least 2")
    out = []
    for n in range(2, n_max + 1):
        for m in range(1, n):
            if math.gcd(m, n) == 1 and m / n < RATIO_BOUND:
                out.append(AdmissiblePair(m, n))
    return out


# ---------------------------------------------------------------------------
# wavelength and modulus


def _psi(p):
    return math.asin(min(1.0, math.sqrt(8.0) * math.sqrt(1.0 - 2.0 * p * p) / (3.0 - 4.0 * p * p)))


def wavelength(p: float) -> float:
    """Angular progress of the elastica per curvature period as a function of p.

    Decreasing on each of (0, 1/2) and (1/2, sqrt(2)/2). The jump at p = 1/2
    is exactly 4 pi, so Lambda + 4 pi on the first branch continues the second
    one, covering (0, 4 pi - 2 sqrt(2) pi) overall.
    """
    p = float(p)
    if not 0.0 < p < P_MAX:
        raise InvalidInputError(f"p must lie in (0, sqrt(2)/2), got {p}")
    if p == 0.5:
        raise InvalidInputError("the wavelength is discontinuous at p = 1/2")
    psi = _psi(p)
    eps = 1.0 if 4.0 * p * p > 1.0 else -1.0
    s = math.sin(psi)
    return (2.0 * math.pi * eps * heuman_lambda(psi, p)
            - 2.0 * (3.0 - 4.0 * p * p) * math.sqrt(1.0 - (1.0 - p * p) * s * s) * s * elliptic_K(p))


def branch_threshold() -> float:
    """Lambda(1/2+) = 2 pi - 2 K(1/2)."""
    return 2.0 * math.pi - 2.0 * elliptic_K(0.5)


def _bisect_decreasing(f, target, lo, hi, tol):
    flo, fhi = f(lo) - target, f(hi) - target
    if flo < 0 or fhi > 0:
        raise ConvergenceError(f"target {target} not bracketed on [{lo}, {hi}]")
    for _ in range(BISECTION_CAP):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid) - target
        if abs(fm) <= tol * 1e-3:
            return mid
        if fm > 0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(f(mid) - target) > tol:
        raise ConvergenceError(f"bisection stalled with residual {abs(f(mid) - target):.3g}")
    return mid


def solve_p(pair: AdmissiblePair, tol: float = 1e-12) -> float:
    """Modulus p of the elastica gamma_(m,n).

    If 2 pi m/n lies below Lambda(1/2+) the root is sought on (1/2, sqrt(2)/2),
    otherwise Lambda(p) = 2 pi m/n - 4 pi is solved on (0, 1/2).
    """
    target = pair.target_wavelength
    tiny = 1e-15
    if target <= branch_threshold():
        lo, hi = 0.5 + tiny, P_MAX - tiny
    else:
        target -= 4.0 * math.pi
        lo, hi = tiny, 0.5 - tiny
    return _bisect_decreasing(wavelength, target, lo, hi, tol)


def wavelength_residual(pair: AdmissiblePair, p: float) -> float:
    lam = wavelength(p)
    if p < 0.5:
        lam += 4.0 * math.pi
    return lam - pair.target_wavelength


# ---------------------------------------------------------------------------
# invariants of the curvature profile


@dataclass(frozen=True)
class ElasticaInvariants:
    p: float
    A: float
    alpha1: float
    alpha3: float
    r: float
    a2: float
    a3: float
    discriminant: float
    j_target: float


def invariants_from_p(p: float) -> ElasticaInvariants:
    """Constants of the cn-profile with modulus p.

    alpha3 = 2p^2/(1-2p^2), alpha1 = alpha3 + 2, A = alpha1 alpha3 / 4,
    a2 = 1/48 - A/4, a3 = 1/1728 + A/48 (the real lattice invariants of the
    associated Weierstrass function), discriminant a2^3 - 27 a3^2 and the
    J-target a2^3 / discriminant.
    """
    p = float(p)
    if not 0.0 < p < P_MAX:
        raise InvalidInputError(f"p must lie in (0, sqrt(2)/2), got {p}")
    q = 1.0 - 2.0 * p * p
    alpha3 = 2.0 * p * p / q
    alpha1 = alpha3 + 2.0
    A = (p * p - p ** 4) / q ** 2
    r = 0.5 * math.sqrt(alpha1 + alpha3)
    a2 = 1.0 / 48.0 - A / 4.0
    a3 = 1.0 / 1728.0 + A / 48.0
    disc = a2 ** 3 - 27.0 * a3 ** 2
    return ElasticaInvariants(p, A, alpha1, alpha3, r, a2, a3, disc, a2 ** 3 / disc)


# ---------------------------------------------------------------------------
# J inversion


def _bisect_monotone(f, target, lo, hi, increasing, tol, iters=BISECTION_CAP):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        above = f(mid) > target
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def invert_J_on_boundary(j_target: float, cfg: SeriesConfig = DEFAULT_SERIES) -> ModularPoint:
    """Boundary point tau of the fundamental domain with J(tau) = j_target.

    For j_target in [0, 1) tau lies on the unit arc between e^{i pi/3} and i,
    where J is real and increasing in the angle; for j_target < 0 tau lies on
    Re tau = 1/2 above e^{i pi/3}, where J decreases to -infinity.
    """
    j_target = float(j_target)
    if not j_target < 1.0:
        raise InvalidInputError(f"J-target must be < 1, got {j_target}")

    if j_target >= 0.0:
        phi = _bisect_monotone(lambda t: klein_J(complex(math.cos(t), math.sin(t)), cfg).real,
                               j_target, math.pi / 3, math.pi / 2, True, 0.0)
        tau = ModularPoint(max(math.cos(phi), 0.0), math.sin(phi))
    else:
        lo = math.sqrt(3.0) / 2.0
        hi = 1.0
        while klein_J(complex(0.5, hi), cfg).real > j_target:
            hi *= 2.0
            if hi > 64.0:
                raise ConvergenceError(f"J-target {j_target} too negative")
        h = _bisect_monotone(lambda t: klein_J(complex(0.5, t), cfg).real,
                             j_target, lo, hi, False, 0.0)
        tau = ModularPoint(0.5, h)
    resid = abs(klein_J(tau, cfg) - j_target)
    scale = max(1.0, abs(j_target))
    if resid > 1e-10 * scale:
        raise ConvergenceError(f"J inversion residual {resid:.3g} for target {j_target}")
    return tau


def real_lattice_tau(tau: ModularPoint) -> ModularPoint:
    """Equivalent lattice ratio on Re tau = 1/2 with a real primitive period.

    A lattice omega_1 (Z + tau Z) with real invariants and omega_1 real must
    be rectangular or rhombic. For an arc point tau = e^{i phi} the map
    tau -> (tau - 1)/(2 tau - 1) composed with tau -> tau/(tau + 1) (both in
    SL2(Z), so J is unchanged) gives 1/2 + i / (2 tan(phi/2)). Points already
    on the line Re tau = 1/2 are returned unchanged.
    """
    if abs(tau.re - 0.5) < 1e-14:
        return tau
    if abs(abs(tau.tau) - 1.0) > 1e-10:
        raise InvalidInputError(f"tau = {tau.tau} is neither on the unit arc nor on Re tau = 1/2")
    phi = math.atan2(tau.im, tau.re)
    return ModularPoint(0.5, 0.5 / math.tan(0.5 * phi))


# ---------------------------------------------------------------------------
# spectrum


def real_period(p: float) -> float:
    """omega_1 = 8 sqrt(1/2 - p^2) K(p) = 4 K(p) / r."""
    return 8.0 * math.sqrt(0.5 - p * p) * elliptic_K(p)


def modular_energy(n: int, omega1: float, eta_re: float) -> float:
    return 8.0 * n * eta_re / omega1 + (2.0 / 3.0) * n * omega1


def quadrature_energy(pair: AdmissiblePair, p: float | None = None) -> float:
    """E = n (omega_1 + int_0^omega_1 k^2 ds) in closed form.

    int cn^2 over a period is 4 (E(p) - (1 - p^2) K(p)) / p^2 in the variable
    r s, independent of the lattice machinery.
    """
    if p is None:
        p = solve_p(pair)
    inv = invariants_from_p(p)
    w1 = real_period(p)
    kk, ee = elliptic_K(p), elliptic_E(p)
    return pair.n * (w1 + inv.alpha3 * 4.0 * (ee - (1.0 - p * p) * kk) / (p * p * inv.r))


LATTICE_MODES = ("real", "boundary")


@dataclass(frozen=True)
class SpectrumEntry:
    pair: AdmissiblePair
    inv: ElasticaInvariants
    tau: ModularPoint
    omega1: float
    eta_re: float
    length: float
    energy: float

    def to_dict(self) -> dict:
        return {
            "pair": {"m": self.pair.m, "n": self.pair.n},
            "inv": asdict(self.inv),
            "tau": {"re": self.tau.re, "im": self.tau.im},
            "omega1": self.omega1,
            "eta_re": self.eta_re,
            "length": self.length,
            "energy": self.energy,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectrumEntry":
        return cls(AdmissiblePair(**doc["pair"]), ElasticaInvariants(**doc["inv"]),
                   ModularPoint(**doc["tau"]), doc["omega1"], doc["eta_re"], doc["length"],
                   doc["energy"])

    def csv_row(self) -> list:
        i = self.inv
        return [self.pair.m, self.pair.n, i.p, i.A, i.a2, i.a3, i.j_target, self.tau.re,
                self.tau.im, self.omega1, self.eta_re, self.length, self.energy]


CSV_COLUMNS = ("m", "n", "p", "A", "a2", "a3", "J", "tau_re", "tau_im", "omega1", "eta_re",
               "length", "energy")


def spectrum_entry(pair: AdmissiblePair, cfg: SeriesConfig = DEFAULT_SERIES,
                   lattice: str = "real") -> SpectrumEntry:
    """Length and energy of gamma_(m,n) from the modular pipeline.

    ``lattice="real"`` evaluates G_2 at the representative on Re tau = 1/2
    whose lattice has omega_1 as a real primitive period (agrees with
    direct quadrature). ``lattice="boundary"`` evaluates it at the raw
    output of :func:`invert_J_on_boundary`, which for J-targets in [0, 1)
    is a point on the unit arc; it is kept for comparison only.
    """
    if lattice not in LATTICE_MODES:
        raise InvalidInputError(f"lattice must be one of {LATTICE_MODES}")
    p = solve_p(pair)
    inv = invariants_from_p(p)
    tau = invert_J_on_boundary(inv.j_target, cfg)
    if lattice == "real":
        tau = real_lattice_tau(tau)
    w1 = real_period(p)
    eta_re = float(eisenstein_G2(tau, cfg).real)
    return SpectrumEntry(pair, inv, tau, w1, eta_re, pair.n * w1, modular_energy(pair.n, w1, eta_re))


def spectrum_table(n_max: int, cfg: SeriesConfig = DEFAULT_SERIES,
                   lattice: str = "real") -> list[SpectrumEntry]:
    return [spectrum_entry(pair, cfg, lattice) for pair in admissible_pairs(n_max)]


def write_entries_json(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([e.to_dict() for e in entries], fh, indent=2)


def read_entries_json(path) -> list[SpectrumEntry]:
    with open(path, encoding="utf-8") as fh:
        return [SpectrumEntry.from_dict(d) for d in json.load(fh)]


def write_entries_csv(entries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for e in entries:
            w.writerow([repr(v) if isinstance(v, float) else v for v in e.csv_row()])


# ---------------------------------------------------------------------------
# energy gap


def gap_function(omega):
    """g(omega) = 8 pi / omega + 2 omega / 3, the energy with Re G_2 replaced by pi."""
    return 8.0 * math.pi / omega + 2.0 * omega / 3.0


def boundary_samples(count: int) -> list[complex]:
    """Points of the fundamental-domain boundary: the arc and both vertical lines.

    The arc gets an odd number of samples so that tau = i is included.
    """
    n_arc = count // 2 | 1
    n_line = max((count - n_arc) // 2, 2)
    phi = np.linspace(math.pi / 3, 2 * math.pi / 3, n_arc)
    pts = list(np.exp(1j * phi))
    h = np.linspace(math.sqrt(3.0) / 2.0, 6.0, n_line)
    pts += list(0.5 + 1j * h) + list(-0.5 + 1j * h)
    return pts


@dataclass
class GapReport:
    n_max: int
    threshold: float
    min_energy: float
    min_energy_pair: tuple
    min_re_g2: float
    min_re_g2_tau: complex
    omega_star: float
    g_min: float
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "threshold": self.threshold,
            "min_energy": self.min_energy,
            "min_energy_pair": list(self.min_energy_pair),
            "min_re_g2": self.min_re_g2,
            "min_re_g2_tau": [self.min_re_g2_tau.real, self.min_re_g2_tau.imag],
            "omega_star": self.omega_star,
            "g_min": self.g_min,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def energy_gap_check(n_max: int = 8, boundary_samples_count: int = 1000,
                     cfg: SeriesConfig = DEFAULT_SERIES, lattice: str = "real") -> GapReport:
    """Check that no closed elastica has energy in (2 pi, 8 sqrt(pi/3)].

    Three ingredients: the minimum energy over the computed table, the
    minimum of Re G_2 along the sampled fundamental-domain boundary (which
    must be pi, at tau = i) and the minimum of g(omega) = 8 pi/omega + 2 omega/3.
    """
    if n_max < 2:
        raise InvalidInputError("n_max must be at least 2")
    if boundary_samples_count < 100:
        raise InvalidInputError("at least 100 boundary samples are required")
    table = spectrum_table(n_max, cfg, lattice)
    best = min(table, key=lambda e: e.energy)
    taus = boundary_samples(boundary_samples_count)
    re_g2 = np.array([eisenstein_G2(t, cfg).real for t in taus])
    k = int(np.argmin(re_g2))
    omega_star = brentq(lambda w: -8.0 * math.pi / w ** 2 + 2.0 / 3.0, 1.0, 20.0, xtol=1e-15,
                        rtol=4 * np.finfo(float).eps)
    g_min = gap_function(omega_star)
    failures = []
    if not best.energy > GAP_THRESHOLD:
        failures.append(f"min energy {best.energy} at {best.pair} does not exceed {GAP_THRESHOLD}")
    if not re_g2[k] >= math.pi - 1e-8:
        failures.append(f"Re G2 = {re_g2[k]} < pi at tau = {taus[k]}")
    if abs(g_min - GAP_THRESHOLD) > 1e-12 or abs(omega_star - OMEGA_STAR) > 1e-12:
        failures.append(f"g minimum {g_min} at {omega_star} differs from {GAP_THRESHOLD} at {OMEGA_STAR}")
    return GapReport(n_max, GAP_THRESHOLD, best.energy, (best.pair.m, best.pair.n),
                     float(re_g2[k]), complex(taus[k]), omega_star, g_min, failures)


# ---------------------------------------------------------------------------
# synthesis


def synthesize_curvature(pair: AdmissiblePair, s, p: float | None = None):
    """Curvature k(s) = sqrt(alpha3) cn(r s; p) of gamma_(m,n)."""
    if p is None:
        p = solve_p(pair)
    inv = invariants_from_p(p)
    cn = jacobi_elliptic(np.asarray(s, dtype=float) * inv.r, p)[1]
    out = math.sqrt(inv.alpha3) * cn
    return float(out) if np.ndim(out) == 0 else out


def _rotation(axis_angle):
    """Rotation matrix exp([w]_x) via Rodrigues' formula."""
    th = np.linalg.norm(axis_angle)
    if th < 1e-300:
        return np.eye(3)
    k = axis_angle / th
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(th) * kx + (1.0 - math.cos(th)) * (kx @ kx)


def _frame_generator(kappa):
    # rows (gamma, T, nu): gamma' = T, T' = -gamma + k nu, nu' = -k T
    return np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, kappa], [0.0, -kappa, 0.0]])


def _skew_to_vec(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


@dataclass(frozen=True, eq=False)
class Synthesis:
    pair: AdmissiblePair
    p: float
    curve: DiscreteCurveS2
    curvature: np.ndarray
    closure_defect: float
    winding: int
    length: float


def winding_number(curve: DiscreteCurveS2, axis=None) -> int:
    """Signed number of turns of the azimuth of gamma about ``axis``.

    The default axis is the normalized mean of gamma x gamma'.
    """
    pts = curve.points
    nxt = np.roll(pts, -1, axis=0)
    if axis is None:
        axis = np.sum(np.cross(pts, nxt), axis=0)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    az = np.arctan2(pts @ e2, pts @ e1)
    d = np.diff(np.concatenate([az, az[:1]]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(float(np.sum(d)) / (2.0 * np.pi)))


def synthesize_elastica(pair: AdmissiblePair, n_points: int, substeps: int | None = None,
                        closure_tol: float = 1e-4) -> Synthesis:
    """Integrate the Frenet frame of gamma_(m,n) with its exact curvature.

    The frame F = (gamma, T, gamma x T) solves F' = M(s) F with M skew, so each
    step applies a rotation from the fourth-order Magnus expansion; the
    samples stay exactly orthonormal. The fixed step keeps the discretization
    error smooth along the curve.
    """
    if n_points < 64 * pair.n:
        raise InvalidInputError(f"need at least 64 n = {64 * pair.n} points, got {n_points}")
    p = solve_p(pair)
    inv = invariants_from_p(p)
    w1 = real_period(p)
    total = pair.n * w1
    h = total / n_points
    if substeps is None:
        kmax = math.sqrt(inv.alpha3) + 1.0
        substeps = max(1, math.ceil(h * kmax / 0.01))
    hs = h / substeps
    c = math.sqrt(3.0) / 6.0
    steps = n_points * substeps
    s0 = hs * np.arange(steps)
    k1 = synthesize_curvature(pair, s0 + (0.5 - c) * hs, p)
    k2 = synthesize_curvature(pair, s0 + (0.5 + c) * hs, p)
    frame = np.eye(3)
    pts = np.empty((n_points, 3))
    for j in range(steps):
        if j % substeps == 0:
            pts[j // substeps] = frame[0]
        m1, m2 = _frame_generator(k1[j]), _frame_generator(k2[j])
        omega = 0.5 * hs * (m1 + m2) + (math.sqrt(3.0) / 12.0) * hs * hs * (m2 @ m1 - m1 @ m2)
        frame = _rotation(_skew_to_vec(omega)) @ frame
    defect = float(np.linalg.norm(frame[0] - pts[0]))
    curve = DiscreteCurveS2(pts, "unit")
    if defect > closure_tol:
        raise ClosureError(f"closure defect {defect:.3g} exceeds {closure_tol:g} for {pair}")
    kappa = synthesize_curvature(pair, h * np.arange(n_points), p)
    return Synthesis(pair, p, curve, kappa, defect, winding_number(curve), total)


def synthesize_curve(pair: AdmissiblePair, n_points: int) -> DiscreteCurveS2:
    """Unit-speed samples of gamma_(m,n), starting at e1 with tangent e2."""
    return synthesize_elastica(pair, n_points).curve
