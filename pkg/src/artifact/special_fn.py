"""Elliptic integrals, Jacobi cn, Heuman's Lambda and modular forms.

All elliptic functions use the modulus convention: the second argument is
the modulus ``p`` (often written ``k``), not the parameter ``m = p**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# complete and incomplete elliptic integrals


def _agm_sequences(p):
    """Return the AGM sequences a_n, c_n started at (1, sqrt(1 - p^2))."""
    a = [1.0]
    b = math.sqrt((1.0 - p) * (1.0 + p))
    c = [p]
    while abs(c[-1]) > 4.0 * _EPS * a[-1] and len(a) < 64:
        an, bn = a[-1], b
        a.append(0.5 * (an + bn))
        c.append(0.5 * (an - bn))
        b = math.sqrt(an * bn)
    return a, c


def elliptic_K(p):
    """Complete elliptic integral of the first kind K(p), modulus convention.

    Computed as pi / (2 AGM(1, sqrt(1 - p^2))).
    """
    p = float(p)
    if not 0.0 <= abs(p) < 1.0:
        raise InvalidInputError(f"elliptic_K needs 0 <= p < 1, got {p}")
    a, _ = _agm_sequences(abs(p))
    return math.pi / (2.0 * a[-1])


def elliptic_E(p):
    """Complete elliptic integral of the second kind E(p), modulus convention."""
    p = abs(float(p))
    if p > 1.0:
        raise InvalidInputError(f"elliptic_E needs 0 <= p <= 1, got {p}")
    if p == 1.0:
        return 1.0
    a, c = _agm_sequences(p)
    # E = K (1 - sum_n 2^(n-1) c_n^2)
    s = 0.5 * c[0] ** 2
    for n in range(1, len(c)):
        s += 2.0 ** (n - 1) * c[n] ** 2
    return math.pi / (2.0 * a[-1]) * (1.0 - s)


def carlson_rf(x, y, z):
    """Carlson's symmetric integral R_F(x, y, z) by duplication."""
    for _ in range(100):
        lam = math.sqrt(x * y) + math.sqrt(y * z) + math.sqrt(z * x)
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        mu = (x + y + z) / 3.0
        dx, dy, dz = 1.0 - x / mu, 1.0 - y / mu, 1.0 - z / mu
        if max(abs(dx), abs(dy), abs(dz)) < 1e-4:
            break
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / math.sqrt(mu)


def carlson_rd(x, y, z):
    """Carlson's integral R_D(x, y, z) by duplication."""
    total = 0.0
    fac = 1.0
    for _ in range(100):
        lam = math.sqrt(x * y) + math.sqrt(y * z) + math.sqrt(z * x)
        total += fac / (math.sqrt(z) * (z + lam))
        fac *= 0.25
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        mu = (x + y + 3.0 * z) / 5.0
        dx, dy, dz = 1.0 - x / mu, 1.0 - y / mu, 1.0 - z / mu
        if max(abs(dx), abs(dy), abs(dz)) < 1e-4:
            break
    ea = dx * dy
    eb = dz * dz
    ec = ea - eb
    ed = ea - 6.0 * eb
    ee = ed + 2.0 * ec
    series = (
        1.0
        + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee)
        + dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + dz * 3.0 / 26.0 * ea))
    )
    return 3.0 * total + fac * series / (mu * math.sqrt(mu))


def incomplete_FE(psi, p):
    """Legendre incomplete integrals F(psi, p) and E(psi, p).

    Parameters
    ----------
    psi : float
        Amplitude in [0, pi/2].
    p : float
        Modulus in [0, 1).

    Returns
    -------
    (F, E) : tuple of float
    """
    psi = float(psi)
    p = float(p)
    if not -1e-15 <= psi <= math.pi / 2 + 1e-15:
        raise InvalidInputError(f"amplitude must lie in [0, pi/2], got {psi}")
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"modulus must lie in [0, 1), got {p}")
    psi = min(max(psi, 0.0), math.pi / 2)
    s = math.sin(psi)
    if s == 0.0:
        return 0.0, 0.0
    c2 = math.cos(psi) ** 2
    d2 = 1.0 - (p * s) ** 2
    f = s * carlson_rf(c2, d2, 1.0)
    e = f - (p * p) * s ** 3 * carlson_rd(c2, d2, 1.0) / 3.0
    return f, e


def heuman_lambda(psi, p):
    """Heuman's Lambda function Lambda_0(psi, p).

    Realized through the Byrd-Friedman identity
    ``(2/pi) [E(p) F(psi, p') + K(p) E(psi, p') - K(p) F(psi, p')]``
    with complementary modulus ``p' = sqrt(1 - p^2)``.
    """
    p = float(p)
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"modulus must lie in [0, 1), got {p}")
    pc = math.sqrt((1.0 - p) * (1.0 + p))
    if pc >= 1.0:
        # p = 0: the complementary integrals degenerate but the limit is sin(psi)
        return math.sin(float(psi))
    f, e = incomplete_FE(psi, pc)
    kk = elliptic_K(p)
    return 2.0 / math.pi * (elliptic_E(p) * f + kk * e - kk * f)


def jacobi_elliptic(x, p):
    """Jacobi sn, cn, dn at ``x`` for modulus ``p`` by descending Landen/AGM.

    ``x`` may be a scalar or an array; the AGM sequence only depends on ``p``.
    """
    p = float(p)
    if not 0.0 <= abs(p) < 1.0:
        raise InvalidInputError(f"modulus must lie in [0, 1), got {p}")
    x = np.asarray(x, dtype=float)
    if p == 0.0:
        return np.sin(x), np.cos(x), np.ones_like(x)
    a, c = _agm_sequences(abs(p))
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * x
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c[k] / a[k] * np.sin(phi), -1.0, 1.0)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - (p * sn) ** 2)
    return sn, cn, dn


def jacobi_cn(x, p):
    """Jacobi cn(x; p) in the modulus convention, period 4 K(p)."""
    cn = jacobi_elliptic(x, p)[1]
    return float(cn) if cn.ndim == 0 else cn


# ---------------------------------------------------------------------------
# divisor sums and modular forms


def sigma_k(n, k):
    """Sum of k-th powers of the positive divisors of n."""
    n = int(n)
    if n < 1:
        raise InvalidInputError(f"divisor sums need n >= 1, got {n}")
    total = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            total += d ** k
            e = n // d
            if e != d:
                total += e ** k
        d += 1
    return total


def sigma1(n):
    """Divisor sum sigma_1(n)."""
    return sigma_k(n, 1)


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation controls for the q-series."""

    max_terms: int = 64
    tail_tolerance: float = 1e-16

    def __post_init__(self):
        if self.max_terms < 8:
            raise InvalidInputError("max_terms must be at least 8")
        if not self.tail_tolerance > 0:
            raise InvalidInputError("tail_tolerance must be positive")


DEFAULT_SERIES = SeriesConfig()


@dataclass(frozen=True)
class ModularPoint:
    """A point tau of the upper half-plane with its nome q = exp(2 pi i tau)."""

    re: float
    im: float
    q: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.im > 0:
            raise InvalidInputError(f"tau must lie in the upper half-plane, got Im = {self.im}")
        object.__setattr__(self, "re", float(self.re))
        object.__setattr__(self, "im", float(self.im))
        object.__setattr__(self, "q", complex(np.exp(2j * np.pi * complex(self.re, self.im))))

    @classmethod
    def from_complex(cls, tau):
        tau = complex(tau)
        return cls(tau.real, tau.imag)

    @property
    def tau(self) -> complex:
        return complex(self.re, self.im)

    def __complex__(self):
        return self.tau


def _as_point(tau) -> ModularPoint:
    if isinstance(tau, ModularPoint):
        return tau
    return ModularPoint.from_complex(tau)


def _lambert_sum(q, power, weight, cfg):
    """Sum of n^power q^n / (1 - q^n), truncated once weight*|term| < tol."""
    n = np.arange(1, cfg.max_terms + 1, dtype=float)
    qn = q ** n
    terms = n ** power * qn / (1.0 - qn)
    small = np.nonzero(weight * np.abs(terms) < cfg.tail_tolerance)[0]
    if small.size == 0:
        raise ConvergenceError(
            f"q-series did not converge within {cfg.max_terms} terms (|q| = {abs(q):.3g})"
        )
    # sum smallest-first for a slightly better rounding behaviour
    return complex(np.sum(terms[: small[0] + 1][::-1]))


def eisenstein_E4(tau, cfg: SeriesConfig = DEFAULT_SERIES) -> complex:
    """Normalized Eisenstein series E_4 = 1 + 240 sum sigma_3(n) q^n."""
    q = _as_point(tau).q
    return 1.0 + 240.0 * _lambert_sum(q, 3, 240.0, cfg)


def eisenstein_E6(tau, cfg: SeriesConfig = DEFAULT_SERIES) -> complex:
    """Normalized Eisenstein series E_6 = 1 - 504 sum sigma_5(n) q^n."""
    q = _as_point(tau).q
    return 1.0 - 504.0 * _lambert_sum(q, 5, 504.0, cfg)


def klein_J(tau, cfg: SeriesConfig = DEFAULT_SERIES) -> complex:
    """Klein's absolute invariant J = E4^3 / (E4^3 - E6^2), with J(i) = 1."""
    e4 = eisenstein_E4(tau, cfg)
    e6 = eisenstein_E6(tau, cfg)
    e43 = e4 ** 3
    return e43 / (e43 - e6 ** 2)


def eisenstein_G2(tau, cfg: SeriesConfig = DEFAULT_SERIES) -> complex:
    """Second Eisenstein series G_2(tau) = pi^2/3 - 8 pi^2 sum sigma_1(n) q^n.

    This equals the quasi-period eta_1 of the lattice Z + tau Z.
    """
    q = _as_point(tau).q
    c = 8.0 * math.pi ** 2
    return math.pi ** 2 / 3.0 - c * _lambert_sum(q, 1, c, cfg)


def lattice_invariants(omega1, tau, cfg: SeriesConfig = DEFAULT_SERIES):
    """Weierstrass g2, g3 of the lattice omega1 (Z + tau Z)."""
    w = complex(omega1)
    g2 = (4.0 * math.pi ** 4 / 3.0) * eisenstein_E4(tau, cfg) / w ** 4
    g3 = (8.0 * math.pi ** 6 / 27.0) * eisenstein_E6(tau, cfg) / w ** 6
    return g2, g3


def j_invariant_coefficients(n_terms: int) -> list[int]:
    """Exact coefficients [c(-1), c(0), c(1), ...] of 1728 J = sum c(n) q^n.

    Obtained by integer power-series arithmetic on E4 and E6.
    """
    size = n_terms + 3
    e4 = [1] + [240 * sigma_k(n, 3) for n in range(1, size)]
    e6 = [1] + [-504 * sigma_k(n, 5) for n in range(1, size)]

    def mul(a, b):
        out = [0] * size
        for i, ai in enumerate(a):
            if ai:
                for j in range(size - i):
                    out[i + j] += ai * b[j]
        return out

    e43 = mul(mul(e4, e4), e4)
    e62 = mul(e6, e6)
    delta = [(u - v) // 1728 for u, v in zip(e43, e62)]
    # delta = q (1 - 24 q + ...); divide E4^3 by delta/q
    d = delta[1:]
    size -= 1
    out = []
    rem = list(e43)
    for k in range(size):
        ck = rem[k] // d[0]
        out.append(ck)
        for j in range(size - k):
            rem[k + j] -= ck * d[j]
    return out
