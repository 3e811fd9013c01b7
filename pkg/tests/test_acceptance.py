"""Acceptance criteria, one test each, with a one-line PASS/FAIL report.

Run ``python3 tests/test_acceptance.py`` for the report alone; under pytest
the lines are printed in the terminal summary. Criteria that cannot hold with
verified mathematics are strict xfails: the check is computed in full and
reported as FAIL, and pytest errors out if one of them ever starts passing.
"""

import cmath
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from artifact import elastic_flow as ef
from artifact import elastica_spectrum as es
from artifact import quat_hopf as qh
from artifact.curve import DiscreteCurveS2, great_circle, latitude_circle, perturbed_great_circle
from artifact.special_fn import eisenstein_G2, jacobi_elliptic

DATA = Path(__file__).parent / "data"
REL_TOL = 0.02
TAU_TOL = 0.01
TWO_PI = 2 * math.pi
# equality holds on the great circle, so the check needs a quadrature tolerance
TEUFEL_TOL = 1e-6

# printed intermediates of the four worked examples: p, A, a2, |a3|, J, tau, omega1
PRINTED_EXAMPLES = {
    (1, 2): (0.44, 0.4157, -0.0831, 0.009239, 0.199, 0.3 + 0.9539j, 7.3288),
    (1, 3): (0.63, 5.629, -1.386, 0.1178, 0.8766, 0.08 + 0.9968j, 4.54666),
    (1, 7): (0.695, 216.65, -54.142, 4.513, 0.9965471, 1j, 1.917841),
    (2, 7): (0.65, 10.156, -2.518116, 0.212158, 0.94, 0.05 + 0.998749j, 3.99),
}
FLAGGED_CELL = (4, 7)

REPORT = {}


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return {(int(r["m"]), int(r["n"])): (float(r["energy"]), float(r["length"]))
                for r in csv.DictReader(fh)}


def rel(a, b):
    return abs(a - b) / abs(b)


def run_criterion(k, title, check, limit):
    t0 = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - t0
    if elapsed >= limit:
        ok = False
        detail += f"; runtime {elapsed:.2f} s exceeds {limit} s"
    line = f"criterion {k} {title}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s) {detail}"
    REPORT[k] = line
    return ok, line


# 1. table reproduction


def check_table():
    ref = read_table(DATA / "published_table.csv")
    parts, ok = [], True
    for mode in es.LATTICE_MODES:
        bad = []
        for e in es.spectrum_table(8, lattice=mode):
            key = (e.pair.m, e.pair.n)
            de, dl = rel(e.energy, ref[key][0]), rel(e.length, ref[key][1])
            if de > REL_TOL or dl > REL_TOL:
                tag = "flagged " if key == FLAGGED_CELL else ""
                bad.append(f"{tag}{key} E {100 * de:.1f}% L {100 * dl:.1f}%")
                if mode == "real" and key != FLAGGED_CELL:
                    ok = False
        parts.append(f"[{mode} lattice: {len(bad)} cells off: " + ", ".join(bad) + "]")
    return ok, " ".join(parts)


# 2. worked-example intermediates


def example_intermediates(m, n):
    p = es.solve_p(es.AdmissiblePair(m, n))
    inv = es.invariants_from_p(p)
    tau = es.invert_J_on_boundary(inv.j_target).tau
    return p, inv.A, inv.a2, abs(inv.a3), inv.j_target, tau, es.real_period(p)


def check_examples():
    names = ("p", "A", "a2", "|a3|", "J", "tau", "omega1")
    bad = []
    for key, printed in PRINTED_EXAMPLES.items():
        got = example_intermediates(*key)
        for name, g, w in zip(names, got, printed):
            if name == "tau":
                off = max(abs(abs(g.real) - w.real), abs(g.imag - w.imag))
                if off > TAU_TOL:
                    bad.append(f"{key} tau {g.real:.4f}+{g.imag:.4f}i vs {w}")
            elif rel(g, w) > REL_TOL:
                bad.append(f"{key} {name} {g:.6g} vs {w} ({100 * rel(g, w):.1f}%)")
    return not bad, f"{len(bad)} mismatches: " + "; ".join(bad)


# 3. modular identities


def check_modular():
    rng = np.random.default_rng(2024)
    at_i = abs(eisenstein_G2(1j) - math.pi)
    taus = rng.uniform(-0.5, 0.5, 100) + 1j * rng.uniform(0.87, 2.0, 100)
    trafo = max(abs(eisenstein_G2(-1 / t) - (t * t * eisenstein_G2(t) - 2j * math.pi * t)) for t in taus)
    legendre = 0.0
    for t in rng.uniform(-0.5, 0.5, 100) + 1j * rng.uniform(0.87, 2.0, 100):
        w1 = complex(rng.uniform(0.5, 5.0), rng.uniform(-2.0, 2.0))
        g = eisenstein_G2(t)
        eta1, eta2 = g / w1, (t * g - 2j * math.pi) / w1
        legendre = max(legendre, abs(t * w1 * eta1 - w1 * eta2 - 2j * math.pi))
    arc = 0.0
    for phi in np.linspace(math.pi / 3, 2 * math.pi / 3, 200):
        t = cmath.exp(1j * phi)
        g = eisenstein_G2(t)
        arc = max(arc, abs(g.imag * t.real + g.real * t.imag - math.pi))
    ok = at_i <= 1e-12 and legendre <= 1e-10 and trafo <= 1e-10 and arc <= 1e-10
    return ok, (f"|G2(i) - pi| = {at_i:.1e}, Legendre {legendre:.1e}, "
                f"transformation {trafo:.1e}, arc identity {arc:.1e}")


# 4. energy gap


def check_gap():
    rep = es.energy_gap_check(8, 1000)
    at_i = abs(rep.min_re_g2_tau - 1j)
    spacing = (2 * math.pi / 3) / 1000
    ok = rep.passed and at_i <= spacing
    return ok, (f"min energy {rep.min_energy:.4f} at {rep.min_energy_pair} > {rep.threshold:.6f}, "
                f"min Re G2 {rep.min_re_g2:.12f} at distance {at_i:.1e} from i, "
                f"g min {rep.g_min:.12f} at {rep.omega_star:.12f}")


# 5. elastica synthesis


def profile_residual(pair):
    """Residual of (k')^2 + k^4/4 + k^2/2 - A, with k' by 8th-order differences."""
    p = es.solve_p(pair)
    inv = es.invariants_from_p(p)
    s = np.linspace(0.0, es.real_period(p), 400)
    h = 1e-3
    c = (1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280)
    dk = sum(ck * es.synthesize_curvature(pair, s + (j - 4) * h, p) for j, ck in enumerate(c)) / h
    k = math.sqrt(inv.alpha3) * jacobi_elliptic(inv.r * s, p)[1]
    return float(np.max(np.abs(dk ** 2 + k ** 4 / 4 + k ** 2 / 2 - inv.A)))


def check_synthesis():
    closure, residual, energy_dev, boundary_dev = 0.0, 0.0, 0.0, 0.0
    winding_bad = []
    for pair in es.admissible_pairs(8):
        syn = es.synthesize_elastica(pair, 128 * pair.n)
        closure = max(closure, syn.closure_defect)
        if abs(syn.winding) != pair.m:
            winding_bad.append(f"{(pair.m, pair.n)} winds {abs(syn.winding)}")
        residual = max(residual, profile_residual(pair))
        quad = es.quadrature_energy(pair, syn.p)
        energy_dev = max(energy_dev, rel(es.spectrum_entry(pair).energy, quad))
        boundary_dev = max(boundary_dev, rel(es.spectrum_entry(pair, lattice="boundary").energy, quad))
    ok = closure <= 1e-6 and not winding_bad and residual <= 1e-7 and energy_dev <= 1e-4
    return ok, (f"closure {closure:.1e}, winding mismatches [{', '.join(winding_bad)}], "
                f"ODE residual {residual:.1e}, modular vs quadrature energy {energy_dev:.1e} "
                f"(boundary lattice {boundary_dev:.1e})")


# 6. flow properties


def random_normal_field(curve, rng, modes=4):
    geo = ef.curve_geometry(curve)
    t = np.arange(curve.n) / curve.n
    v = np.zeros((curve.n, 3))
    for k in range(1, modes + 1):
        v += np.outer(np.sin(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi)), rng.normal(size=3)) / k
    v = geo.normal_project(v)
    return v / ef.l2_norm(curve, v)


def directional_derivative_error(directions=20, eps=1e-5):
    """Worst relative gap between <grad, v> and difference quotients of E.

    The central quotient is the oracle; the forward one is reported too, its
    O(eps) error is large relative to <grad, v> when v is nearly orthogonal
    to the gradient.
    """
    rng = np.random.default_rng(99)
    c = perturbed_great_circle(512, seed=5, amplitude=0.2)
    grad = ef.l2_gradient(c)

    def energy_at(v, t):
        return ef.elastic_energy(DiscreteCurveS2(ef.project_to_sphere(c.points + t * v), "nonuniform"))

    e0 = ef.elastic_energy(c)
    central, forward = 0.0, 0.0
    for _ in range(directions):
        v = random_normal_field(c, rng)
        exact = ef.l2_inner(c, grad, v)
        plus, minus = energy_at(v, eps), energy_at(v, -eps)
        central = max(central, rel((plus - minus) / (2 * eps), exact))
        forward = max(forward, rel((plus - e0) / eps, exact))
    return central, forward


def check_flow():
    terminal, monotone, length_gap, teufel_gap = [], 0.0, math.inf, math.inf
    for k, target in enumerate(np.linspace(6.6, 8.1, 10)):
        c0 = perturbed_great_circle(32, seed=100 + k, target_energy=float(target))
        e0 = ef.elastic_energy(c0)
        assert e0 < es.GAP_THRESHOLD
        traj = ef.run_flow(c0, ef.FlowConfig(max_steps=20000, sample_interval=25))
        e = traj.column("energy")
        monotone = max(monotone, float(np.max(np.diff(e))))
        terminal.append(traj.samples[-1].energy - TWO_PI)
        bound = min(math.pi, 3 * math.pi ** 2 / e0)
        for st in traj.samples:
            length_gap = min(length_gap, st.length - bound)
            teufel_gap = min(teufel_gap, ef.total_curvature(st.curve) ** 2 - (4 * math.pi ** 2 - st.length ** 2))
    fd, fd_forward = directional_derivative_error()
    ok = (all(0.0 <= d <= 1e-3 for d in terminal) and monotone <= 1e-9
          and length_gap >= 0.0 and teufel_gap >= -TEUFEL_TOL and fd <= 1e-3)
    return ok, (f"terminal E - 2pi in [{min(terminal):.1e}, {max(terminal):.1e}], "
                f"max energy increase {monotone:.1e}, length margin {length_gap:.3f}, "
                f"Teufel margin {teufel_gap:.1e}, gradient vs central difference {fd:.1e} "
                f"(forward {fd_forward:.1e}, N = 512)")


# 7. Hopf geometry


def check_hopf():
    rng = np.random.default_rng(7)
    q = rng.normal(size=(1000, 4))
    q /= np.linalg.norm(q, axis=1)[:, None]
    r = rng.normal(size=(1000, 4))
    r /= np.linalg.norm(r, axis=1)[:, None]
    lhs = qh.sphere_to_quat(qh.hopf_map(qh.qmul(q, r)))
    rhs = qh.qmul(qh.qmul(qh.qtilde(r), qh.sphere_to_quat(qh.hopf_map(q))), r)
    equiv = float(np.max(np.abs(lhs - rhs)))
    phase = qh.qexp_i(rng.uniform(-math.pi, math.pi, 1000))
    fiber = float(np.max(np.abs(qh.hopf_map(qh.qmul(phase, q)) - qh.hopf_map(q))))

    gc = qh.to_speed_two(great_circle(256))
    open_gap = qh.horizontal_lift(gc).closure_defect()
    closed_gap = qh.horizontal_lift(gc, loops=2).closure_defect()

    holonomy = 0.0
    for theta in (0.3, 0.8, 1.4, 2.0, 2.7):
        c = latitude_circle(theta, 512)
        lift = qh.horizontal_lift(qh.to_speed_two(c))
        # area of the region to the right of the direction of travel
        half_area = ((4 * math.pi - qh.enclosed_area(c)) / 2) % TWO_PI
        holonomy = max(holonomy, abs((lift.holonomy_phase - half_area + math.pi) % TWO_PI - math.pi))

    clifford = rel(qh.mesh_willmore_energy(qh.hopf_torus(great_circle(256, axis=(1, 0, 0)), 32)),
                   2 * math.pi ** 2)
    pc = perturbed_great_circle(1024, seed=2)
    w_vs_e = rel(qh.mesh_willmore_energy(qh.hopf_torus(pc, 16)), math.pi * ef.elastic_energy(pc))

    res = [qh.hopf_willmore_check(perturbed_great_circle(n, seed=1, amplitude=0.4)).pointwise
           for n in (256, 512, 1024)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))

    ok = (equiv <= 1e-12 and fiber <= 1e-12 and open_gap > 1.0 and closed_gap <= 1e-6
          and holonomy <= 1e-4 and clifford <= 0.01 and w_vs_e <= 0.005 and np.all(orders >= 1.9))
    return ok, (f"equivariance {equiv:.1e}, fiber {fiber:.1e}, great-circle lift gap "
                f"{open_gap:.3f} after 1 loop and {closed_gap:.1e} after 2, holonomy {holonomy:.1e}, "
                f"Clifford W rel. error {clifford:.1e}, W vs pi E {w_vs_e:.1e}, "
                f"identity residual orders {np.round(orders, 2).tolist()}")


# 8. stationarity transfer

STATIONARITY_PAIRS = ((1, 2), (1, 3), (1, 4), (2, 5), (1, 6), (2, 7), (3, 8))


def check_stationarity():
    worst = math.inf
    for m, n in STATIONARITY_PAIRS:
        pair = es.AdmissiblePair(m, n)
        norms = []
        for pts in (64 * n, 128 * n, 256 * n):
            c = es.synthesize_curve(pair, pts)
            norms.append(ef.l2_norm(c, ef.l2_gradient(c)))
        worst = min(worst, float(np.min(np.log2(np.array(norms[:-1]) / np.array(norms[1:])))))
    return worst >= 1.9, f"lowest observed order {worst:.2f} over {len(STATIONARITY_PAIRS)} pairs"


CRITERIA = {
    1: ("table reproduction", check_table, 5.0),
    2: ("worked-example intermediates", check_examples, 1.0),
    3: ("modular identities", check_modular, 1.0),
    4: ("energy gap", check_gap, 2.0),
    5: ("elastica synthesis", check_synthesis, 10.0),
    6: ("flow properties", check_flow, 60.0),
    7: ("Hopf geometry", check_hopf, 20.0),
    8: ("stationarity transfer", check_stationarity, 10.0),
}

UNATTAINABLE = {
    1: "printed lengths and energies disagree with closure-verified p and with direct quadrature",
    2: "printed A, omega1 and tau are rounded or inconsistent with the printed J-targets",
    5: "first-branch pairs (1,2) and (4,7) wind 2n - m times, not m times",
}


def _case(k):
    marks = []
    if k in UNATTAINABLE:
        marks.append(pytest.mark.xfail(strict=True, reason=UNATTAINABLE[k]))
    return pytest.param(k, marks=marks, id=f"criterion_{k}")


@pytest.mark.parametrize("k", [_case(k) for k in CRITERIA])
def test_criterion(k):
    ok, line = run_criterion(k, *CRITERIA[k])
    print(line)
    assert ok, line


if __name__ == "__main__":
    for k, (title, check, limit) in CRITERIA.items():
        print(run_criterion(k, title, check, limit)[1])
    sys.exit(0)
