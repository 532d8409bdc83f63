import math

import numpy as np
import pytest

from crossdiff import grid as G
from crossdiff import model as M
from crossdiff import solver as S
from crossdiff.experiments import barenblatt

from .conftest import skt_bumps


def heat_sine(n=64):
    return G.from_function(G.Grid((n,)), lambda x: np.sin(np.pi * x))


def test_controls_validate():
    with pytest.raises(ValueError):
        S.SolverControls(dt=0.0, T=1.0)
    with pytest.raises(ValueError):
        S.SolverControls(dt=0.3, T=1.0)
    with pytest.raises(ValueError):
        S.SolverControls(dt=0.1, T=1.0, linear_solver="gmres")
    assert S.SolverControls(dt=0.1, T=1.0).steps == 10


def test_one_heat_step_hits_discrete_eigenvalue():
    u = heat_sine()
    dt = 0.01
    h = u.grid.h[0]
    mu = (2 / h**2) * (1 - math.cos(math.pi * h))
    v, d = S.step_implicit(u, dt, M.make_heat(), M.zero_reaction(1), S.SolverControls(dt, dt))
    np.testing.assert_allclose(v.values, u.values / (1 + dt * mu), rtol=0, atol=1e-12)
    x = u.grid.centers()[0]
    # and O(h^2) from the continuous eigenvalue
    assert np.abs(v.values[0] - np.sin(np.pi * x) / (1 + dt * np.pi**2)).max() < 1e-4


@pytest.mark.parametrize("model", [M.make_heat(2), M.make_porous_media(2, 1.0),
                                   M.regularize(M.make_porous_media(2, 1.0), 0.1)])
def test_constant_neumann_is_fixed_point(model):
    g = G.Grid((12, 10))
    u = G.GridField(g, np.stack([np.full((12, 10), 0.7), np.full((12, 10), 0.3)]), G.NEUMANN)
    v, _ = S.step_implicit(u, 5.0, model, M.zero_reaction(2), S.SolverControls(5.0, 5.0))
    np.testing.assert_allclose(v.values, u.values, atol=1e-12)


def test_barenblatt_step_against_explicit_reference():
    g = G.Grid((64,), (4.0,), (-2.0,))
    x = g.centers()[0]
    u0 = G.GridField(g, barenblatt(x, 1.0), G.NEUMANN)
    pm = M.make_porous_media(1, 1.0)
    dt = 0.01
    v, _ = S.step_implicit(u0, dt, pm, M.zero_reaction(1), S.SolverControls(dt, dt))
    assert v.values.min() >= -1e-12
    assert G.integrate(v)[0] == pytest.approx(G.integrate(u0)[0], rel=1e-12)
    # fine explicit Euler on the same grid
    w = u0.values.copy()
    sub = 2000
    for _ in range(sub):
        w = w + (dt / sub) * G.laplacian_values(pm.P(w), g, G.NEUMANN)
    assert np.abs(v.values - w).max() < 0.02 * np.abs(w).max()


def test_heat_oracle_run():
    u0 = heat_sine()
    tr = S.run_forward(M.make_heat(), M.zero_reaction(1), u0, S.SolverControls(1e-4, 0.1, stride=100))
    exact = u0.values * math.exp(-math.pi**2 * 0.1)
    assert G.lp_norm(tr.final.with_values(tr.final.values - exact), 2) <= 5e-3
    assert tr.times[0] == 0.0 and tr.times[-1] == 0.1 and len(tr.fields) == 11
    assert all(b > a for a, b in zip(tr.times, tr.times[1:]))
    tol = tr.controls.tolerance(1.0)
    assert all(d.residual <= tol for d in tr.diagnostics)


@pytest.mark.parametrize("dt", [1e-3, 0.05, 1.0])
def test_heat_dissipative_for_any_dt(dt):
    tr = S.run_forward(M.make_heat(), M.zero_reaction(1), heat_sine(32), S.SolverControls(dt, 10 * dt))
    norms = [G.lp_norm(f, 2) for f in tr.fields]
    assert all(b <= a for a, b in zip(norms, norms[1:]))


@pytest.mark.parametrize("model", [M.regularize(M.make_porous_media(2, 1.0), 0.1),
                                   M.make_heat(2)])
def test_neumann_mass_conserved(model, sine_pair):
    u0 = sine_pair.with_values(sine_pair.values + 0.2)
    u0 = G.GridField(u0.grid, u0.values, G.NEUMANN)
    c = S.SolverControls(0.01, 0.2)
    tr = S.run_forward(model, M.zero_reaction(2), u0, c)
    bound = 10 * c.steps * c.tolerance(1.0)
    np.testing.assert_allclose(G.integrate(tr.final), G.integrate(u0), atol=bound)


def test_newton_quadratic_on_nonlinear_step(sine_pair):
    model = M.regularize(M.make_porous_media(2, 1.0), 0.05)
    _, d = S.step_implicit(sine_pair, 0.05, model, M.logistic_reaction(2),
                           S.SolverControls(0.05, 0.05, newton_atol=1e-12, newton_rtol=1e-14))
    r = d.history
    assert len(r) >= 3
    ratios = [b / a**2 for a, b in zip(r, r[1:]) if a < 1e-2 and b > 1e-13]
    assert all(q < 100 for q in ratios)


def test_heat_newton_single_iteration():
    _, d = S.step_implicit(heat_sine(), 0.01, M.make_heat(), M.zero_reaction(1),
                           S.SolverControls(0.01, 0.01))
    assert d.iterations == 1


def test_halving_recovers_and_keeps_mesh(sine_pair):
    model = M.regularize(M.make_porous_media(2, 1.0), 0.05)
    u0 = sine_pair * 4.0
    strict = S.SolverControls(0.1, 0.2, max_iter=5, max_halvings=0)
    with pytest.raises(S.NewtonDiverged):
        S.run_forward(model, M.zero_reaction(2), u0, strict)
    lenient = S.SolverControls(0.1, 0.2, max_iter=5, max_halvings=4)
    tr = S.run_forward(model, M.zero_reaction(2), u0, lenient)
    assert tr.times == [0.0, 0.1, 0.2]
    assert max(d.substeps for d in tr.diagnostics) > 1


def test_cg_matches_direct_in_2d():
    dm, rm = M.preset_model("skt_compete")
    model = M.regularize(dm, 0.25)
    u0 = skt_bumps(16)
    a, _ = S.step_implicit(u0, 0.02, model, rm, S.SolverControls(0.02, 0.02))
    b, _ = S.step_implicit(u0, 0.02, model, rm, S.SolverControls(0.02, 0.02, linear_solver="cg"))
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_trajectory_roundtrip(tmp_path, sine_pair):
    tr = S.run_forward(M.make_heat(2), M.zero_reaction(2), sine_pair, S.SolverControls(0.01, 0.05))
    S.save_trajectory(tr, tmp_path / "t")
    back = S.load_trajectory(tmp_path / "t")
    assert back.times == tr.times
    assert all(np.array_equal(a.values, b.values) for a, b in zip(tr.fields, back.fields))


# ---------------------------------------------------------------------------
# dual system


def _zero_heat(n=32, T=0.05, dt=0.005):
    g = G.Grid((n,))
    c = S.SolverControls(dt, T)
    z = G.GridField(g, np.zeros(n))
    tr = S.run_forward(M.make_heat(), M.zero_reaction(1), z, c)
    return tr, c


def test_dual_zero_state_is_backward_heat():
    tr, c = _zero_heat()
    psi = G.from_function(tr.grid, lambda x: np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x))
    dual = S.solve_dual(tr, tr, M.zero_reaction(1), psi, c)
    fwd = S.run_forward(M.make_heat(), M.zero_reaction(1), psi, c)
    np.testing.assert_allclose(dual.fields[0].values, fwd.final.values, atol=1e-12)
    assert dual.fields[-1].values.tobytes() == psi.values.tobytes()


def test_dual_zero_terminal_gives_zero():
    tr, c = _zero_heat()
    dual = S.solve_dual(tr, tr, M.zero_reaction(1), G.GridField(tr.grid, np.zeros(32)), c)
    assert all(np.all(f.values == 0) for f in dual.fields)


def test_dual_mesh_mismatch():
    a, c = _zero_heat(T=0.05)
    b, _ = _zero_heat(T=0.1)
    with pytest.raises(S.MeshMismatch):
        S.solve_dual(a, b, M.zero_reaction(1), a.final, c)


def test_segment_average_exact_for_quartic():
    # five Gauss-Legendre nodes integrate degree <= 9 exactly
    ua, ub = np.array([0.3]), np.array([1.7])
    got = S.segment_average(lambda u: u**4, ua, ub)
    exact = (ub**5 - ua**5) / (5 * (ub - ua))
    np.testing.assert_allclose(got, exact, rtol=1e-14)
