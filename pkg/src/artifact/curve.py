"""Closed discrete curves on the unit 2-sphere and their JSON file format."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

CURVE_SCHEMA = "curve-s2/v1"
SPEED_TAGS = ("unit", "two", "nonuniform")
LOAD_NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteCurveS2:
    """Cyclic ordered samples of a closed curve on S^2.

    ``speed_tag`` records the parametrization convention: ``unit`` means the
    samples are equally spaced in arc length and the curve parameter runs
    over [0, L); ``two`` means the same uniform spacing, but the parameter
    runs over [0, L/2) so the curve has speed two; ``nonuniform`` makes no
    claim about spacing.

    Points within ``LOAD_NORM_TOL`` of the sphere are renormalized on
    construction, anything further away is rejected.
    """

    points: np.ndarray
    speed_tag: str = "unit"
    closed: bool = True

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError(f"points must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 8:
            raise InvalidInputError(f"a discrete curve needs at least 8 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points contain non-finite values")
        if self.speed_tag not in SPEED_TAGS:
            raise InvalidInputError(f"unknown speed tag {self.speed_tag!r}")
        if not self.closed:
            raise InvalidInputError("only closed curves are supported")
        norms = np.linalg.norm(pts, axis=1)
        dev = np.max(np.abs(norms - 1.0))
        if dev > LOAD_NORM_TOL:
            raise InvalidInputError(f"points are not on the unit sphere (max deviation {dev:.3g})")
        pts = pts / norms[:, None]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def chords(self) -> np.ndarray:
        """Euclidean chord lengths |x_{k+1} - x_k| (cyclic)."""
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    def chord_ratio(self) -> float:
        c = self.chords()
        return float(c.max() / c.min())

    def polygon_length(self) -> float:
        """Length of the geodesic polygon through the samples."""
        dots = np.clip(np.sum(self.points * np.roll(self.points, -1, axis=0), axis=1), -1.0, 1.0)
        return float(np.sum(np.arccos(dots)))

    def with_tag(self, speed_tag: str) -> "DiscreteCurveS2":
        return DiscreteCurveS2(self.points, speed_tag, self.closed)

    def reversed(self) -> "DiscreteCurveS2":
        return DiscreteCurveS2(self.points[::-1].copy(), self.speed_tag, self.closed)

    def to_dict(self) -> dict:
        return {
            "schema": CURVE_SCHEMA,
            "closed": bool(self.closed),
            "speed": self.speed_tag,
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteCurveS2":
        if doc.get("schema") != CURVE_SCHEMA:
            raise InvalidInputError(f"expected schema {CURVE_SCHEMA!r}, got {doc.get('schema')!r}")
        try:
            return cls(np.asarray(doc["points"], dtype=float), doc.get("speed", "nonuniform"),
                       bool(doc.get("closed", True)))
        except KeyError as exc:
            raise InvalidInputError(f"curve document is missing {exc}") from None


def save_curve(curve: DiscreteCurveS2, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(curve.to_dict(), fh)


def load_curve(path) -> DiscreteCurveS2:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
    return DiscreteCurveS2.from_dict(doc)


# ---------------------------------------------------------------------------
# sample curves


def _frame(axis):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2, axis


def latitude_circle(theta: float, n: int, axis=(0.0, 0.0, 1.0)) -> DiscreteCurveS2:
    """Circle at polar angle ``theta`` about ``axis``, counterclockwise about the axis."""
    e1, e2, a = _frame(axis)
    t = 2.0 * np.pi * np.arange(n) / n
    pts = (np.sin(theta) * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2)
           + np.cos(theta) * a)
    return DiscreteCurveS2(pts, "unit")


def great_circle(n: int, axis=(0.0, 0.0, 1.0)) -> DiscreteCurveS2:
    return latitude_circle(0.5 * np.pi, n, axis)


def _perturbed(n, amplitudes, phases):
    t = 2.0 * np.pi * np.arange(n) / n
    z = np.zeros(n)
    for k, (a, ph) in enumerate(zip(amplitudes, phases), start=2):
        z += a * np.sin(k * t + ph)
    pts = np.column_stack([np.cos(t), np.sin(t), z])
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def perturbed_great_circle(n: int, seed: int = 0, target_energy: float | None = None,
                           amplitude: float = 0.3, modes: int = 3) -> DiscreteCurveS2:
    """Great circle with a seeded smooth out-of-plane perturbation.

    Modes 2..modes+1 are used (mode 1 would only tilt the circle). If
    ``target_energy`` is given the overall amplitude is tuned so the elastic
    energy of the resampled curve hits it.
    """
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=modes) / np.arange(2, modes + 2) ** 1.5
    weights /= np.linalg.norm(weights)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)

    def build(scale):
        from .elastic_flow import reparametrize_arclength
        return reparametrize_arclength(
            DiscreteCurveS2(_perturbed(n, scale * weights, phases), "nonuniform"))

    if target_energy is None:
        return build(amplitude)

    from scipy.optimize import brentq

    from .elastic_flow import elastic_energy

    if target_energy <= 2.0 * np.pi:
        raise InvalidInputError("target energy must exceed 2 pi")
    hi = 0.05
    while elastic_energy(build(hi)) < target_energy:
        hi *= 1.5
        if hi > 10.0:
            raise InvalidInputError(f"cannot reach target energy {target_energy}")
    scale = brentq(lambda a: elastic_energy(build(a)) - target_energy, 0.0, hi, xtol=1e-12)
    return build(scale)
