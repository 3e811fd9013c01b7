import csv
import math

import numpy as np
import pytest

from artifact import elastic_flow as ef
from artifact import elastica_spectrum as es
from artifact.curve import DiscreteCurveS2, great_circle, latitude_circle, perturbed_great_circle
from artifact.errors import InvalidInputError, StiffnessError

TWO_PI = 2 * math.pi


def random_normal_field(curve, rng, modes=4):
    """Smooth random unit-L2 field along the curve normal inside T S^2."""
    geo = ef.curve_geometry(curve)
    t = np.arange(curve.n) / curve.n
    v = np.zeros((curve.n, 3))
    for k in range(1, modes + 1):
        v += np.outer(np.sin(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi)), rng.normal(size=3)) / k
    v = geo.normal_project(v)
    return v / ef.l2_norm(curve, v)


@pytest.fixture(scope="module")
def subthreshold_run():
    curve = perturbed_great_circle(32, seed=7, target_energy=7.5)
    return curve, ef.run_flow(curve, ef.FlowConfig(max_steps=20000, sample_interval=50))


# curvature and energy


def test_great_circle_is_flat():
    c = great_circle(512)
    assert np.max(np.linalg.norm(ef.curvature_vector(c), axis=1)) <= 1e-8
    assert ef.elastic_energy(c) == pytest.approx(TWO_PI, abs=1e-6)
    assert np.max(np.linalg.norm(ef.l2_gradient(c), axis=1)) <= 1e-8


def test_latitude_circle_curvature():
    theta = math.pi / 3
    c = latitude_circle(theta, 256)
    k = np.linalg.norm(ef.curvature_vector(c), axis=1)
    np.testing.assert_allclose(k, 1 / math.tan(theta), atol=1e-4)
    # counterclockwise about the axis: positive against the left normal
    np.testing.assert_allclose(ef.signed_curvature(c), 1 / math.tan(theta), atol=1e-4)
    np.testing.assert_allclose(ef.signed_curvature(c.reversed()), -1 / math.tan(theta), atol=1e-4)


@pytest.mark.parametrize("theta", [0.4, 1.0, 2.0])
def test_latitude_circle_energy(theta):
    c = latitude_circle(theta, 256)
    assert ef.elastic_energy(c) == pytest.approx(TWO_PI / math.sin(theta), abs=1e-4)
    assert ef.curve_length(c) == pytest.approx(TWO_PI * math.sin(theta), abs=1e-10)
    assert ef.total_curvature(c) == pytest.approx(TWO_PI * abs(math.cos(theta)), abs=1e-4)


def test_synthesized_curvature_converges():
    pair = es.AdmissiblePair(1, 2)
    errs = []
    for n in (256, 512, 1024):
        syn = es.synthesize_elastica(pair, n)
        errs.append(np.max(np.abs(np.abs(ef.signed_curvature(syn.curve)) - np.abs(syn.curvature))))
    assert errs[1] < errs[0] / 3.5 and errs[2] < errs[1] / 3.5
    assert errs[2] <= 1e-6


def test_synthesized_energy_near_quadrature():
    pair = es.AdmissiblePair(1, 2)
    syn = es.synthesize_elastica(pair, 512)
    assert ef.elastic_energy(syn.curve) == pytest.approx(es.quadrature_energy(pair), rel=1e-6)


def test_minimum_sizes():
    with pytest.raises(InvalidInputError):
        ef.curvature_vector(great_circle(8))
    with pytest.raises(InvalidInputError):
        ef.l2_gradient(great_circle(16))


def test_duplicate_points_rejected():
    pts = great_circle(32).points.copy()
    pts[5] = pts[4]
    with pytest.raises(InvalidInputError):
        ef.elastic_energy(DiscreteCurveS2(pts, "nonuniform"))


@pytest.mark.parametrize("seed", range(3))
def test_energy_bounded_below(seed):
    c = perturbed_great_circle(128, seed=seed, amplitude=0.5)
    assert ef.elastic_energy(c) >= TWO_PI


# gradient


def _directional_quotients(c, v, eps=1e-5):
    def energy_at(t):
        return ef.elastic_energy(DiscreteCurveS2(ef.project_to_sphere(c.points + t * v), "nonuniform"))

    e0 = energy_at(0.0)
    return (energy_at(eps) - e0) / eps, (energy_at(eps) - energy_at(-eps)) / (2 * eps)


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_directional_derivative(seed):
    rng = np.random.default_rng(seed)
    c = perturbed_great_circle(512, seed=seed, amplitude=0.2)
    grad = ef.l2_gradient(c)
    for _ in range(5):
        v = random_normal_field(c, rng)
        exact = ef.l2_inner(c, grad, v)
        forward, central = _directional_quotients(c, v)
        assert abs(forward - exact) <= 1e-3 * abs(exact)
        assert abs(central - exact) <= 1e-5 * abs(exact)


def test_forward_quotient_error_is_first_order():
    c = perturbed_great_circle(512, seed=0, amplitude=0.2)
    v = random_normal_field(c, np.random.default_rng(3))
    exact = ef.l2_inner(c, ef.l2_gradient(c), v)
    err = [abs(_directional_quotients(c, v, eps)[0] - exact) for eps in (4e-5, 2e-5, 1e-5)]
    assert err[0] / err[1] == pytest.approx(2.0, rel=0.1)
    assert err[1] / err[2] == pytest.approx(2.0, rel=0.1)


def test_gradient_consistency_refines():
    # the discrete gradient differs from the derivative of the discrete energy by O(h^4)
    defects = []
    for n in (256, 512, 1024):
        c = perturbed_great_circle(n, seed=0, amplitude=0.4)
        v = random_normal_field(c, np.random.default_rng(0))
        exact = ef.l2_inner(c, ef.l2_gradient(c), v)
        defects.append(abs(_directional_quotients(c, v)[1] / exact - 1))
    assert defects[1] < defects[0] / 8 and defects[2] < defects[1] / 8


def test_gradient_is_normal():
    c = perturbed_great_circle(256, seed=3)
    geo = ef.curve_geometry(c)
    g = ef.l2_gradient(c)
    assert np.max(np.abs(np.einsum("ij,ij->i", g, geo.points))) <= 1e-12
    assert np.max(np.abs(np.einsum("ij,ij->i", g, geo.tangent))) <= 1e-12


def test_stationarity_of_elastica():
    pair = es.AdmissiblePair(1, 3)
    norms = []
    for n in (256, 512, 1024):
        c = es.synthesize_curve(pair, n)
        norms.append(ef.l2_norm(c, ef.l2_gradient(c)))
    orders = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
    assert np.all(orders >= 1.9)
    assert norms[-1] <= 1e-3


# reparametrization


def test_reparametrize_idempotent():
    c = great_circle(64)
    r = ef.reparametrize_arclength(c)
    assert np.max(np.abs(r.points - c.points)) <= 1e-10


def test_reparametrize_uniformizes():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    t = t + 0.4 * np.sin(t)
    pts = np.column_stack([np.cos(t), np.sin(t), 0.3 * np.sin(3 * t)])
    c = DiscreteCurveS2(ef.project_to_sphere(pts), "nonuniform")
    assert c.chord_ratio() > 2
    r = ef.reparametrize_arclength(c)
    assert r.chord_ratio() <= 1.01
    assert r.speed_tag == "unit"
    assert np.max(np.abs(np.linalg.norm(r.points, axis=1) - 1)) <= 1e-12


def test_reparametrize_energy_change_shrinks():
    diffs = []
    for n in (64, 128, 256):
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        s = t + 0.3 * np.sin(t)
        pts = np.column_stack([np.cos(s), np.sin(s), 0.25 * np.sin(2 * s)])
        c = DiscreteCurveS2(ef.project_to_sphere(pts), "nonuniform")
        diffs.append(abs(ef.elastic_energy(ef.reparametrize_arclength(c)) - ef.elastic_energy(c)))
    assert diffs[1] < diffs[0] / 8 and diffs[2] < diffs[1] / 8


def test_reparametrize_resample_count():
    fine = perturbed_great_circle(1024, seed=2)
    r = ef.reparametrize_arclength(fine, 100)
    assert r.n == 100
    direct = perturbed_great_circle(100, seed=2)
    assert ef.elastic_energy(r) == pytest.approx(ef.elastic_energy(direct), rel=1e-4)


# stepping


def test_flow_config_validation():
    with pytest.raises(InvalidInputError):
        ef.FlowConfig(dt=-1.0)
    with pytest.raises(InvalidInputError):
        ef.FlowConfig(scheme="implicit")
    with pytest.raises(InvalidInputError):
        ef.FlowConfig(scheme="semi_implicit").step_size(great_circle(32))


def test_step_size_cap():
    c = great_circle(32)
    cfg = ef.FlowConfig(dt=1.0)
    assert cfg.step_size(c) == pytest.approx(0.2 * (TWO_PI / 32) ** 4)
    assert ef.FlowConfig(dt=1e-9).step_size(c) == 1e-9


def test_great_circle_fixed_point():
    c = great_circle(64)
    state = ef.FlowState.from_curve(c)
    new = ef.flow_step(state, ef.FlowConfig())
    assert np.max(np.abs(new.curve.points - c.points)) <= 1e-10
    assert new.time > 0


def test_energy_decrease_rate():
    c = perturbed_great_circle(64, seed=4, amplitude=0.3)
    state = ef.FlowState.from_curve(c)
    cfg = ef.FlowConfig(dt=1e-9)
    new = ef.flow_step(state, cfg)
    predicted = 1e-9 * state.grad_norm ** 2
    assert state.energy - new.energy == pytest.approx(predicted, rel=0.1)


def test_energy_monotone_over_ten_thousand_steps():
    c = perturbed_great_circle(32, seed=11, target_energy=7.9)
    cfg = ef.FlowConfig(max_steps=10000, grad_tol=0.0, plateau_tol=-math.inf, sample_interval=1000)
    traj = ef.run_flow(c, cfg)
    e = traj.column("energy")
    assert len(e) == 10001
    assert np.max(np.diff(e)) <= 1e-9
    assert traj.status == "max_steps"


def test_stiffness_keeps_partial_trajectory(monkeypatch):
    calls = {"n": 0}
    real_step = ef.flow_step

    def failing_step(state, cfg):
        calls["n"] += 1
        if calls["n"] > 3:
            raise StiffnessError("forced")
        return real_step(state, cfg)

    monkeypatch.setattr(ef, "flow_step", failing_step)
    with pytest.raises(StiffnessError) as info:
        ef.run_flow(perturbed_great_circle(32, seed=1), ef.FlowConfig(max_steps=100))
    traj = info.value.trajectory
    assert traj.status == "stiff"
    assert len(traj.records) == 4


def test_backtracking_underflow_raises(monkeypatch):
    c = perturbed_great_circle(32, seed=1)
    state = ef.FlowState.from_curve(c)
    real = ef.FlowState.from_curve.__func__

    def worse(cls, curve, time=0.0, step=0):
        s = real(cls, curve, time, step)
        return ef.FlowState(s.curve, s.time, state.energy + 1.0, s.grad_norm, s.length, s.step)

    monkeypatch.setattr(ef.FlowState, "from_curve", classmethod(worse))
    with pytest.raises(StiffnessError):
        ef.flow_step(state, ef.FlowConfig())


# full runs


def test_subthreshold_converges_to_great_circle(subthreshold_run):
    curve, traj = subthreshold_run
    assert ef.elastic_energy(curve) == pytest.approx(7.5, abs=1e-8)
    final = traj.final
    assert TWO_PI <= final.energy <= TWO_PI + 1e-3
    assert np.max(np.linalg.norm(ef.curvature_vector(final.curve), axis=1)) <= 1e-2
    assert traj.status in ("converged", "plateau")


def test_trajectory_invariants(subthreshold_run):
    curve, traj = subthreshold_run
    e = traj.column("energy")
    assert np.max(np.diff(e)) <= 1e-9
    e0 = e[0]
    bound = min(math.pi, 3 * math.pi ** 2 / e0)
    for st in traj.samples:
        assert st.energy >= TWO_PI - 1e-9
        assert st.length >= bound
        tc = ef.total_curvature(st.curve)
        assert tc ** 2 >= 4 * math.pi ** 2 - st.length ** 2 - 1e-6
        assert np.max(np.abs(np.linalg.norm(st.curve.points, axis=1) - 1)) <= 1e-12


def test_trajectory_csv(subthreshold_run, tmp_path):
    _, traj = subthreshold_run
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ef.TRAJECTORY_COLUMNS
    assert len(rows) == len(traj.records) + 1
    assert float(rows[-1][2]) == traj.records[-1][2]


def test_semi_implicit_matches_explicit_terminal_state(subthreshold_run):
    curve, explicit = subthreshold_run
    traj = ef.run_flow(curve, ef.FlowConfig(dt=1e-3, scheme="semi_implicit", max_steps=5000))
    assert traj.final.energy == pytest.approx(explicit.final.energy, abs=1e-6)
    assert np.max(np.diff(traj.column("energy"))) <= 1e-9


def test_nonuniform_input_is_reparametrized():
    pts = perturbed_great_circle(48, seed=5).points
    traj = ef.run_flow(DiscreteCurveS2(pts, "nonuniform"), ef.FlowConfig(max_steps=0))
    assert traj.final.curve.speed_tag == "unit"
    assert traj.status == "max_steps"


def test_diagnostics_keys():
    d = ef.curve_diagnostics(great_circle(64))
    assert d["energy"] == pytest.approx(TWO_PI, abs=1e-10)
    assert set(d) >= {"energy", "length", "grad_norm", "total_curvature", "max_curvature"}
