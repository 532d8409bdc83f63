import csv
import json

import numpy as np
import pytest

from crossdiff import cascade as Ca
from crossdiff import grid as G
from crossdiff import model as M
from crossdiff import solver as S
from crossdiff.experiments import barenblatt


def heat_spec(lambdas, n=32, T=0.02, dt=1e-3, **kw):
    u0 = G.from_function(G.Grid((n,)), lambda x: np.sin(np.pi * x))
    return Ca.CascadeSpec(M.make_heat(), M.zero_reaction(1), tuple(lambdas), u0,
                          S.SolverControls(dt, T, stride=5), **kw)


def pm_spec(lambdas=Ca.geometric_sequence(2, 4), r0=0.25):
    g = G.Grid((32,))
    u0 = G.from_function(g, lambda x: np.stack([np.sin(np.pi * x), 0.5 * np.sin(np.pi * x) ** 2]))
    return Ca.CascadeSpec(M.make_porous_media(2, 1.0), M.logistic_reaction(2), lambdas, u0,
                          S.SolverControls(0.005, 0.05, stride=2), r0=r0)


def test_geometric_sequence():
    assert Ca.geometric_sequence(2, 3) == (1.0, 0.5, 0.25)
    assert Ca.geometric_sequence(3, 2, start=1) == (1 / 3, 1 / 9)


def test_spec_validation():
    with pytest.raises(ValueError):
        heat_spec([0.5, 0.5])
    with pytest.raises(ValueError):
        heat_spec([1.0, -0.5])
    with pytest.raises(ValueError):
        heat_spec([1.0, 0.5], radii=(0.001, 0.001))
    s = heat_spec([1.0, 0.5, 0.25], r0=1.0)
    assert s.radii == (1.0, 0.5, 0.25)
    s = heat_spec([1.0, 0.5, 0.25, 0.125, 0.0625, 1 / 32], r0=0.5)
    assert s.radii[-1] == 2 / 32  # clamped at two cells


def test_single_member_cascade():
    rep = Ca.run_cascade(heat_spec([0.5]))
    assert len(rep.members) == 1 and rep.members[0].ok
    assert rep.cauchy["rows"] == [] and rep.cauchy["verdict"] == "skipped"


def test_identical_members_have_zero_distance():
    spec = heat_spec([1.0, 0.5])
    mem = Ca._run_member(spec, 1)
    rep = Ca.assemble(spec, [mem, mem])
    assert rep.distances[0, 1] == 0.0


def test_heat_cascade_linear_in_lambda():
    lam = (1.0, 0.5, 0.25)
    rep = Ca.run_cascade(heat_spec(lam))
    D = rep.distances
    r = [D[0, 2] / (lam[0] - lam[2]), D[1, 2] / (lam[1] - lam[2])]
    assert r[1] == pytest.approx(r[0], rel=0.1)
    # limit close to the lambda = 0 problem with the same discretisation
    ref = S.run_forward(M.make_heat(), M.zero_reaction(1), rep.spec.u0, rep.spec.controls)
    errs = [Ca.space_time_distance(m.traj, ref) / m.lam for m in rep.members]
    assert max(errs) / min(errs) < 1.15


def test_distance_matrix_is_pseudometric():
    rep = Ca.run_cascade(pm_spec())
    D = rep.distances
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0) and np.all(D >= 0)
    k = len(D)
    for i in range(k):
        for j in range(k):
            for l in range(k):
                assert D[i, l] <= D[i, j] + D[j, l] + 1e-12


def test_ic_schedule_decreasing():
    rep = Ca.run_cascade(pm_spec())
    ic = [m.ic_l1 for m in rep.members]
    assert all(b <= a for a, b in zip(ic, ic[1:]))


def test_cascade_deterministic_across_threads(monkeypatch):
    spec = pm_spec()
    monkeypatch.setenv("CROSSDIFF_THREADS", "1")
    a = Ca.run_cascade(spec)
    monkeypatch.setenv("CROSSDIFF_THREADS", "3")
    b = Ca.run_cascade(spec)
    assert a.distances.tobytes() == b.distances.tobytes()
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_failed_member_is_flagged():
    g = G.Grid((32,), (4.0,))
    u0 = G.from_function(g, lambda x: 3.0 * np.stack([np.sin(np.pi * x / 4), 0.5 * np.sin(np.pi * x / 4) ** 2]))
    spec = Ca.CascadeSpec(M.make_porous_media(2, 1.0), M.cubic_reaction(2), (0.5, 0.01), u0,
                          S.SolverControls(0.05, 1.0, stride=10, max_halvings=2))
    rep = Ca.run_cascade(spec)
    assert not all(m.ok for m in rep.members)
    assert rep.verdicts()["members_completed"] == "fail"
    assert any(m.error for m in rep.members)


def test_barenblatt_scalar_cascade_limit():
    g = G.Grid((128,), (4.0,), (-2.0,))
    x = g.centers()[0]
    u0 = G.GridField(g, barenblatt(x, 1.0), G.NEUMANN)
    spec = Ca.CascadeSpec(M.make_porous_media(1, 1.0), M.zero_reaction(1),
                          Ca.geometric_sequence(4, 4, start=2), u0,
                          S.SolverControls(0.02, 0.5, stride=25))
    rep = Ca.run_cascade(spec)
    exact = barenblatt(x, 1.5)
    errs = [G.lp_norm(m.traj.final.with_values(m.traj.final.values - exact), 1) for m in rep.members]
    assert errs[-1] < 2e-3
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_cross_identical_sequences_zero():
    spec = pm_spec()
    cr = Ca.cross_uniqueness(spec, spec)
    assert all(c == 0.0 for c in cr.cross)
    assert cr.checks()["cross_within_tail"] == "pass"


def test_cross_heat_proportional_to_gap():
    a = heat_spec(Ca.geometric_sequence(2, 4))
    b = heat_spec(Ca.geometric_sequence(3, 4))
    cr = Ca.cross_uniqueness(a, b)
    gaps = [la - lb for la, lb in zip(a.lambdas, b.lambdas)]
    r = [c / g for c, g in zip(cr.cross[1:], gaps[1:])]
    assert max(r) / min(r) < 1.15
    assert cr.cross[0] == 0.0


def test_cross_spec_mismatch():
    a = heat_spec([1.0, 0.5])
    g = G.Grid((32,))
    other = Ca.CascadeSpec(M.make_heat(), M.zero_reaction(1), (1.0, 0.5),
                           G.from_function(g, lambda x: np.sin(2 * np.pi * x)), a.controls)
    with pytest.raises(Ca.SpecMismatch):
        Ca.cross_uniqueness(a, other)
    with pytest.raises(Ca.SpecMismatch):
        Ca.cross_uniqueness(a, heat_spec([1.0, 0.5], T=0.04))


def test_cross_checks_logic():
    rep = Ca.CrossReport(None, None, [0.0, 2.0, 1.0, 0.5], (0.4, 0.3), 2.0, start=1)
    c = rep.checks()
    assert c == {"cross_within_tail": "pass", "cross_decreasing": "pass",
                 "extension_growth": "pass"}
    rep = Ca.CrossReport(None, None, [1.0, 3.0, 1.0], (0.4, 0.3), 2.0)
    c = rep.checks()
    assert c["cross_within_tail"] == "fail" and c["extension_growth"] == "fail"


def _duality_pair(lam_a, lam_b, model, reaction, n=32):
    g = G.Grid((n,))
    u0 = G.from_function(g, lambda x: np.stack([np.sin(np.pi * x), 0.5 * np.sin(np.pi * x) ** 2]))
    c = S.SolverControls(0.005, 0.05)
    ta = S.run_forward(M.regularize(model, lam_a), reaction, u0, c)
    tb = S.run_forward(M.regularize(model, lam_b), reaction, u0, c)
    psi = G.from_function(g, lambda x: np.stack([np.sin(np.pi * x), 0.5 * np.sin(2 * np.pi * x)]))
    return ta, tb, psi, c


def test_duality_identity_frozen_linear():
    rea = M.linear_reaction(2, 0.7)
    ta, tb, psi, c = _duality_pair(0.5, 0.25, M.make_heat(2), rea)
    d = Ca.duality_residual(ta, tb, rea, psi, c)
    assert d.residual.max() <= 1e-9
    assert np.abs(d.lhs).max() > 1e-3  # the identity is not trivially 0 = 0


def test_duality_identical_lambda_vanishes():
    rea = M.logistic_reaction(2)
    ta, tb, psi, c = _duality_pair(0.25, 0.25, M.make_porous_media(2, 1.0), rea)
    d = Ca.duality_residual(ta, tb, rea, psi, c)
    assert np.all(d.rhs == 0) and np.abs(d.lhs).max() <= 1e-12


def test_duality_nonlinear_pair_bound_dominates():
    rea = M.logistic_reaction(2)
    ta, tb, psi, c = _duality_pair(0.5, 0.25, M.make_porous_media(2, 1.0), rea)
    d = Ca.duality_residual(ta, tb, rea, psi, c)
    assert d.residual.max() <= 1e-6 * d.scale
    assert np.all(np.abs(d.rhs) <= d.bound + 1e-15)


def test_duality_needs_every_step():
    rea = M.zero_reaction(1)
    g = G.Grid((16,))
    u0 = G.from_function(g, lambda x: np.sin(np.pi * x))
    c = S.SolverControls(0.01, 0.04, stride=2)
    tr = S.run_forward(M.make_heat(), rea, u0, c)
    with pytest.raises(S.MeshMismatch):
        Ca.duality_residual(tr, tr, rea, u0, c)


def test_save_cascade_layout(tmp_path):
    rep = Ca.run_cascade(pm_spec(Ca.geometric_sequence(2, 3)))
    d = Ca.save_cascade(rep, tmp_path / "c")
    rows = list(csv.reader(open(d / "distances.csv")))
    assert rows[0] == ["n", "n_prime", "d"] and len(rows) == 1 + 9
    assert (d / "member_00" / "manifest.json").exists() and (d / "ledger_02.csv").exists()
    doc = json.loads((d / "report.json").read_text())
    assert {"verdicts", "spec", "distances"} <= set(doc)
