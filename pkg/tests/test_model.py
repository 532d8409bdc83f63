import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff import model as M

PT = st.floats(-3, 3, allow_nan=False)


def test_porous_media_values_at_3_4():
    pm = M.make_porous_media(2, 1.0)
    u = np.array([3.0, 4.0])
    np.testing.assert_allclose(pm.P(u), [15.0, 20.0])
    A = pm.A(u)
    np.testing.assert_allclose(A, [[6.8, 2.4], [2.4, 8.2]], atol=1e-14)
    np.testing.assert_allclose(np.linalg.eigvalsh(A), [5.0, 10.0], atol=1e-12)
    np.testing.assert_allclose(A, M.fd_jacobian(pm.P, u), rtol=1e-7)


def test_porous_media_degenerate_point():
    pm = M.make_porous_media(2, 1.0)
    z = np.zeros(2)
    assert np.all(pm.A(z) == 0) and pm.lam(z) == 0
    assert pm.c_star == 2.0 and pm.holder_exp == 0.5 and pm.floor == 0.0


def test_porous_media_small_exponent_origin_is_zero():
    pm = M.make_porous_media(2, 0.5)
    assert np.all(pm.A(np.zeros(2)) == 0)


@pytest.mark.parametrize("k", [0.0, -1.0])
def test_porous_media_rejects_bad_k(k):
    with pytest.raises(ValueError):
        M.make_porous_media(2, k)


def test_skt_jacobian_and_degeneracy():
    dm, _ = M.make_skt(M.SktParams())
    np.testing.assert_allclose(dm.A(np.array([1.0, 1.0])), [[3.0, 1.0], [1.0, 3.0]])
    assert np.all(dm.P(np.zeros(2)) == 0) and np.all(dm.A(np.zeros(2)) == 0)
    u = np.array([0.7, 1.3])
    np.testing.assert_allclose(dm.A(u), M.fd_jacobian(dm.P, u), rtol=1e-7)


def test_skt_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        M.make_skt(M.SktParams(a21=0.0))


def test_skt_c_alpha_below_sqrt2_bound():
    # the symmetric part at the unit diagonal direction has smallest eigenvalue sqrt(2)
    c = M.SktParams().c_alpha
    assert 0 < c <= np.sqrt(2) + 1e-12
    assert c == pytest.approx(0.7929, abs=1e-3)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5))
def test_admissibility_is_truth_of_inequalities(a11, a12, a21, a22):
    p = M.SktParams(a11=a11, a12=a12, a21=a21, a22=a22)
    truth = a21**2 < 8 * a11 * a12 and a12**2 < 8 * a22 * a21
    assert p.admissible == truth
    assert (M.check_skt_admissible(p).verdict == "pass") == truth


def test_regularize_examples():
    pm = M.make_porous_media(2, 1.0)
    r = M.regularize(pm, 0.5)
    assert r.lam(np.zeros(2)) == 0.5
    np.testing.assert_allclose(r.A(np.zeros(2)), 0.5 * np.eye(2))
    np.testing.assert_allclose(M.regularize(pm, 0.25).A(np.array([3.0, 4.0])),
                               [[7.05, 2.4], [2.4, 8.45]], atol=1e-14)
    assert pm.floor == 0.0  # original untouched
    with pytest.raises(ValueError):
        M.regularize(pm, 0.0)


@settings(max_examples=50)
@given(PT, PT, st.floats(0.01, 2), st.floats(0.01, 2))
def test_regularize_twice_is_additive(x, y, la, lb):
    pm = M.make_porous_media(2, 1.0)
    u = np.array([x, y])
    twice = M.regularize(M.regularize(pm, la), lb)
    once = M.regularize(pm, la + lb)
    np.testing.assert_allclose(twice.P(u), once.P(u), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(twice.A(u), once.A(u), rtol=1e-13, atol=1e-13)
    assert twice.lam(u) == pytest.approx(once.lam(u))
    assert once.lam(u) - pm.lam(u) == pytest.approx(la + lb)


def test_ellipticity_porous_media_tight():
    rep = M.check_ellipticity(M.make_porous_media(2, 1.0), M.Sampler("box", -2, 2, 1000))
    assert rep.verdict == "pass"
    lower = rep["ellipticity_lower"]
    assert abs(lower.margin) < 1e-12  # attained along zeta perpendicular to u
    assert abs(rep["operator_norm"].margin) < 1e-12


def test_ellipticity_skt_quadrant():
    dm, _ = M.make_skt(M.SktParams())
    assert M.check_ellipticity(dm, M.Sampler("quadrant", 0, 2, 500)).verdict == "pass"


def test_zero_map_fails_with_witness():
    zero = M.DiffusionModel(
        name="zero", m=2, P=lambda u: np.zeros_like(np.asarray(u, float)),
        A=lambda u: np.zeros((2, 2) + np.shape(u)[1:]),
        lam=lambda u: np.ones(np.shape(u)[1:]), k=None, floor=1.0, c_star=1.0)
    rep = M.check_ellipticity(zero, M.Sampler(n_u=50))
    res = rep["ellipticity_lower"]
    assert res.verdict == "fail"
    z = np.array(res.witness_zeta)
    u = np.array(res.witness_u)
    # re-evaluate at the stored witness: lam |z|^2 > <A z, z>
    assert zero.lam(u) * z @ z > z @ zero.A(u) @ z + 1e-9


def test_inadmissible_skt_fails_with_witness():
    dm, _ = M.make_skt(M.SktParams(a21=4.0))
    rep = M.check_ellipticity(dm, M.Sampler("quadrant", 0, 2, 500))
    assert rep.verdict == "fail"
    bad = [r for r in rep.results if r.verdict == "fail"]
    assert all(r.witness_u is not None for r in bad)


def test_reaction_growth_lotka_volterra_sign_constant():
    dm, rm = M.make_skt(M.SKT_COMPETE)
    rep = M.check_reaction_growth(rm, dm, M.Sampler("quadrant", 0, 2, 500))
    sign = rep["sign_competitive"]
    assert sign.verdict == "pass"
    assert sign.constant <= max(M.SKT_COMPETE.a) + 1e-12


def test_reaction_growth_zero():
    rep = M.check_reaction_growth(M.zero_reaction(2), M.make_porous_media(2, 1.0), M.Sampler())
    assert rep.verdict == "pass"
    assert all((r.constant or 0.0) == 0.0 for r in rep.results)


def test_reaction_growth_exponential_fails_near_edge():
    def f(u):
        u = np.asarray(u, float)
        out = np.zeros_like(u)
        out[0] = np.exp(u[0])
        return out

    def f_u(u):
        u = np.asarray(u, float)
        out = np.zeros((2, 2) + u.shape[1:])
        out[0, 0] = np.exp(u[0])
        return out

    # declared constant is the one fitted on a small box; a box out to 10 breaks it
    small = M.check_reaction_growth(M.ReactionModel("exp", 2, f, f_u),
                                    M.make_porous_media(2, 1.0), M.Sampler("box", -1, 1, 300))
    C = small["growth_f"].constant
    rep = M.check_reaction_growth(M.ReactionModel("exp", 2, f, f_u, growth=C),
                                  M.make_porous_media(2, 1.0), M.Sampler("box", -1, 10, 300))
    res = rep["growth_f"]
    assert res.verdict == "fail"
    assert res.witness_u[0] > 8


def test_holder_inverse_porous_media():
    pm = M.make_porous_media(2, 1.0)
    a = M.check_holder_inverse(pm, M.Sampler("box", -2, 2, 300, seed=1))
    b = M.check_holder_inverse(pm, M.Sampler("box", -2, 2, 600, seed=1))
    assert a.verdict == "pass"
    ca, cb = a.results[0].constant, b.results[0].constant
    assert np.isfinite(ca) and cb == pytest.approx(ca, rel=0.1)
    assert cb <= pm.holder_const + 1e-9


@pytest.mark.parametrize("name", ["heat", "porous_media", "skt_compete", "skt_coop"])
def test_jacobian_oracle_all_presets(name):
    dm, rm = M.preset_model(name)
    s = M.Sampler("quadrant" if dm.domain == "quadrant" else "box", -2, 2, 100, seed=3)
    assert M.check_jacobian(dm, s).verdict == "pass"
    assert M.check_reaction_jacobian(rm, s).verdict == "pass"


def test_report_serialises():
    rep = M.check_ellipticity(M.make_porous_media(2, 1.0), M.Sampler(n_u=20))
    doc = json.loads(rep.dumps())
    keys = {"condition", "verdict", "witness_u", "witness_zeta", "margin", "samples"}
    assert all(keys <= set(c) for c in doc["conditions"])


def test_unknown_preset():
    with pytest.raises(KeyError):
        M.preset_model("nope")
