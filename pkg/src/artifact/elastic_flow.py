"""L2-gradient flow of the elastic energy E = int (1 + |k|^2) ds on closed spherical curves.

Discretization
--------------
Curves are sampled at N points over a periodic index parameter x in [0, 1).
Derivatives use the fourth-order periodic central stencil. The line element
|d gamma/dx| is taken from the trigonometric interpolant (FFT derivative) so
that great circles carry exactly the length 2 pi at any resolution; it only
enters as the quadrature weight and the arc-length rescaling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .curve import DiscreteCurveS2
from .errors import InvalidInputError, StiffnessError

DT_FLOOR = 1e-18
BACKTRACK_SLACK = 1e-12


# ---------------------------------------------------------------------------
# discrete calculus


def periodic_diff(f: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central difference along axis 0 of periodic samples."""
    return (np.roll(f, 2, axis=0) - 8.0 * np.roll(f, 1, axis=0)
            + 8.0 * np.roll(f, -1, axis=0) - np.roll(f, -2, axis=0)) / (12.0 * dx)


def spectral_speed(points: np.ndarray) -> np.ndarray:
    """|d gamma/dx| of the trigonometric interpolant, x in [0, 1)."""
    n = points.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    deriv = np.fft.ifft(2j * np.pi * k[:, None] * np.fft.fft(points, axis=0), axis=0).real
    return np.linalg.norm(deriv, axis=1)


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _normalize(v):
    return v / np.linalg.norm(v, axis=1)[:, None]


@dataclass(frozen=True, eq=False)
class CurveGeometry:
    """Per-sample geometric data of a discrete curve."""

    points: np.ndarray
    dx: float
    sigma: np.ndarray  # line element |d gamma / dx|
    tangent: np.ndarray
    kappa: np.ndarray  # curvature vector

    def normal_project(self, v):
        g, t = self.points, self.tangent
        return v - _rowdot(v, g)[:, None] * g - _rowdot(v, t)[:, None] * t

    def covariant(self, v):
        """Normal part of the arc-length derivative of a normal field."""
        return self.normal_project(periodic_diff(v, self.dx) / self.sigma[:, None])

    def integrate(self, f) -> float:
        return float(np.sum(f * self.sigma) * self.dx)

    @property
    def length(self) -> float:
        return self.integrate(1.0)

    @property
    def conormal(self) -> np.ndarray:
        """gamma x T, the left normal within the tangent plane of S^2."""
        return np.cross(self.points, self.tangent)

    @property
    def signed_curvature(self) -> np.ndarray:
        return _rowdot(self.kappa, self.conormal)


def _check_regular(points):
    steps = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    if np.min(steps) <= 1e-14 * max(1.0, np.max(steps)):
        raise InvalidInputError("curve has a zero-length segment (consecutive duplicate points)")


def curve_geometry(curve: DiscreteCurveS2) -> CurveGeometry:
    pts = curve.points
    _check_regular(pts)
    n = pts.shape[0]
    dx = 1.0 / n
    sigma = spectral_speed(pts)
    d1 = periodic_diff(pts, dx)
    tangent = d1 - _rowdot(d1, pts)[:, None] * pts
    tangent = _normalize(tangent)
    geo = CurveGeometry(pts, dx, sigma, tangent, np.zeros_like(pts))
    kappa = geo.covariant(tangent)
    return replace(geo, kappa=kappa)


def curvature_vector(curve: DiscreteCurveS2) -> np.ndarray:
    """Geodesic curvature vector per sample, shape (N, 3).

    The arc-length second derivative with its tangential and radial parts
    removed.
    """
    if curve.n < 16:
        raise InvalidInputError("curvature needs at least 16 samples")
    return curve_geometry(curve).kappa


def signed_curvature(curve: DiscreteCurveS2) -> np.ndarray:
    """Geodesic curvature measured against the left normal gamma x T."""
    return curve_geometry(curve).signed_curvature


def curve_length(curve: DiscreteCurveS2) -> float:
    pts = curve.points
    return float(np.mean(spectral_speed(pts)))


def elastic_energy(curve: DiscreteCurveS2) -> float:
    """E = int (1 + |k|^2) ds by the periodic trapezoidal rule."""
    geo = curve_geometry(curve)
    return geo.integrate(1.0 + _rowdot(geo.kappa, geo.kappa))


def total_curvature(curve: DiscreteCurveS2) -> float:
    """int |k| ds."""
    geo = curve_geometry(curve)
    return geo.integrate(np.linalg.norm(geo.kappa, axis=1))


def _gradient(geo: CurveGeometry) -> np.ndarray:
    k = geo.kappa
    kk = _rowdot(k, k)
    return 2.0 * geo.covariant(geo.covariant(k)) + (kk + 1.0)[:, None] * k


def l2_gradient(curve: DiscreteCurveS2) -> np.ndarray:
    """L2-gradient 2 (D_perp)^2 k + |k|^2 k + k of the elastic energy, shape (N, 3)."""
    if curve.n < 32:
        raise InvalidInputError("the gradient needs at least 32 samples")
    return _gradient(curve_geometry(curve))


def l2_norm(curve: DiscreteCurveS2, field_values: np.ndarray) -> float:
    geo = curve_geometry(curve)
    return float(np.sqrt(geo.integrate(_rowdot(field_values, field_values))))


def l2_inner(curve: DiscreteCurveS2, a: np.ndarray, b: np.ndarray) -> float:
    return curve_geometry(curve).integrate(_rowdot(a, b))


def project_to_sphere(points: np.ndarray) -> np.ndarray:
    return _normalize(np.asarray(points, dtype=float))


# ---------------------------------------------------------------------------
# reparametrization


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _spline_arclength(spline, a, b):
    """Arc length of the spline between parameters a and b (arrays)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    speed = np.linalg.norm(spline(u, 1), axis=-1)
    return half * (speed @ _GL_WEIGHTS)


def reparametrize_arclength(curve: DiscreteCurveS2, n_points: int | None = None) -> DiscreteCurveS2:
    """Resample uniformly in arc length along a periodic cubic spline.

    The spline is parametrized by cumulative chord length; resampled points
    are projected back onto the sphere.
    """
    pts = curve.points
    _check_regular(pts)
    n = pts.shape[0]
    m = n if n_points is None else int(n_points)
    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic")
    seg = _spline_arclength(spline, knots[:-1], knots[1:])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    targets = total * np.arange(m) / m
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, n - 1)
    u0 = knots[idx]
    rem = targets - cum[idx]
    # Newton on arc length within each segment
    u = u0 + rem / np.maximum(seg[idx], 1e-300) * chords[idx]
    for _ in range(4):
        done = _spline_arclength(spline, u0, u)
        speed = np.linalg.norm(spline(u, 1), axis=-1)
        u = u - (done - rem) / speed
    out = project_to_sphere(spline(u))
    return DiscreteCurveS2(out, "unit", curve.closed)


# ---------------------------------------------------------------------------
# flow


@dataclass(frozen=True)
class FlowConfig:
    """Time stepping controls.

    For the explicit scheme the step actually used is capped at
    ``stability_constant * (L/N)^4``; ``dt=None`` means "use the cap".
    ``scheme="semi_implicit"`` preconditions the gradient by
    ``(1 + 2 dt D^4)^-1`` which removes the h^4 restriction.
    """

    dt: float | None = None
    max_steps: int = 10000
    reparam_interval: int = 10
    grad_tol: float = 1e-6
    energy_backtrack: bool = True
    stability_constant: float = 0.2
    scheme: str = "explicit"
    sample_interval: int = 100
    plateau_window: int = 100
    plateau_tol: float = 1e-12

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if self.max_steps < 0:
            raise InvalidInputError("max_steps must be non-negative")
        if self.reparam_interval < 0 or self.sample_interval < 1:
            raise InvalidInputError("intervals must be positive")
        if self.scheme not in ("explicit", "semi_implicit"):
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")

    def step_size(self, curve: DiscreteCurveS2) -> float:
        if self.scheme == "semi_implicit":
            if self.dt is None:
                raise InvalidInputError("the semi-implicit scheme needs an explicit dt")
            return self.dt
        h = curve_length(curve) / curve.n
        cap = self.stability_constant * h ** 4
        return cap if self.dt is None else min(self.dt, cap)


@dataclass(frozen=True, eq=False)
class FlowState:
    curve: DiscreteCurveS2
    time: float
    energy: float
    grad_norm: float
    length: float = float("nan")
    step: int = 0

    @classmethod
    def from_curve(cls, curve: DiscreteCurveS2, time: float = 0.0, step: int = 0) -> "FlowState":
        geo = curve_geometry(curve)
        grad = _gradient(geo)
        return cls(curve, time, geo.integrate(1.0 + _rowdot(geo.kappa, geo.kappa)),
                   float(np.sqrt(geo.integrate(_rowdot(grad, grad)))), geo.length, step)


TRAJECTORY_COLUMNS = ("step", "time", "energy", "length", "grad_norm", "min_spacing")


@dataclass(eq=False)
class Trajectory:
    """Sampled flow states plus one diagnostic record per accepted step."""

    samples: list = field(default_factory=list)
    records: list = field(default_factory=list)
    status: str = "running"

    @property
    def final(self) -> FlowState:
        return self.samples[-1]

    def column(self, name: str) -> np.ndarray:
        i = TRAJECTORY_COLUMNS.index(name)
        return np.array([r[i] for r in self.records], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            for r in self.records:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])


def _record(state: FlowState):
    return (state.step, state.time, state.energy, state.length, state.grad_norm,
            float(np.min(state.curve.chords())))


def _fd_symbol4(n: int, dx: float) -> np.ndarray:
    theta = 2.0 * np.pi * np.fft.fftfreq(n)
    lam = (8.0 * np.sin(theta) - np.sin(2.0 * theta)) / (6.0 * dx)
    return lam ** 4


def _descent_direction(geo: CurveGeometry, grad: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    if scheme == "explicit":
        return grad
    n = grad.shape[0]
    sigma = float(np.mean(geo.sigma))
    symbol = 2.0 * dt * _fd_symbol4(n, geo.dx) / sigma ** 4
    return np.fft.ifft(np.fft.fft(grad, axis=0) / (1.0 + symbol)[:, None], axis=0).real


def flow_step(state: FlowState, cfg: FlowConfig) -> FlowState:
    """One step gamma <- proj(gamma - dt * grad E), halving dt while the energy rises."""
    curve = state.curve
    geo = curve_geometry(curve)
    grad = _gradient(geo)
    dt = cfg.step_size(curve)
    while True:
        direction = _descent_direction(geo, grad, dt, cfg.scheme)
        cand = DiscreteCurveS2(project_to_sphere(curve.points - dt * direction), curve.speed_tag)
        new = FlowState.from_curve(cand, state.time + dt, state.step + 1)
        if not cfg.energy_backtrack or new.energy <= state.energy + BACKTRACK_SLACK:
            return new
        dt *= 0.5
        if dt < DT_FLOOR:
            raise StiffnessError(f"time step underflow at t = {state.time:.6g}")


def run_flow(initial: DiscreteCurveS2, cfg: FlowConfig = FlowConfig()) -> Trajectory:
    """Integrate the flow until the gradient norm drops below ``grad_tol``,
    the energy plateaus, or ``max_steps`` is reached.

    On stiffness failure the partial trajectory is attached to the raised
    ``StiffnessError``.
    """
    curve = initial
    if curve.speed_tag == "nonuniform" and cfg.reparam_interval:
        curve = reparametrize_arclength(curve)
    state = FlowState.from_curve(curve)
    traj = Trajectory(samples=[state], records=[_record(state)])
    energies = [state.energy]
    for k in range(1, cfg.max_steps + 1):
        if state.grad_norm <= cfg.grad_tol:
            traj.status = "converged"
            break
        if (len(energies) > cfg.plateau_window
                and energies[-cfg.plateau_window - 1] - energies[-1] < cfg.plateau_tol):
            traj.status = "plateau"
            break
        try:
            state = flow_step(state, cfg)
        except StiffnessError as exc:
            traj.status = "stiff"
            if traj.samples[-1] is not state:
                traj.samples.append(state)
            exc.trajectory = traj
            raise
        if cfg.reparam_interval and k % cfg.reparam_interval == 0:
            state = replace(FlowState.from_curve(reparametrize_arclength(state.curve), state.time, k))
        traj.records.append(_record(state))
        energies.append(state.energy)
        if k % cfg.sample_interval == 0:
            traj.samples.append(state)
    else:
        traj.status = "converged" if state.grad_norm <= cfg.grad_tol else "max_steps"
    if traj.samples[-1] is not state:
        traj.samples.append(state)
    return traj


def curve_diagnostics(curve: DiscreteCurveS2) -> dict:
    geo = curve_geometry(curve)
    grad = _gradient(geo)
    kn = np.linalg.norm(geo.kappa, axis=1)
    return {
        "n_points": curve.n,
        "energy": geo.integrate(1.0 + kn ** 2),
        "length": geo.length,
        "grad_norm": float(np.sqrt(geo.integrate(_rowdot(grad, grad)))),
        "total_curvature": geo.integrate(kn),
        "max_curvature": float(kn.max()),
        "chord_ratio": curve.chord_ratio(),
    }
