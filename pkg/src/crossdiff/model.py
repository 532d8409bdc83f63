"""Diffusion and reaction models plus sampled checks of their structural hypotheses.

All evaluators are vectorised over trailing axes: a state ``u`` has shape
``(m, *S)`` and

* ``P(u)``, ``f(u)`` return ``(m, *S)``,
* ``A(u)``, ``f_u(u)`` return ``(m, m, *S)``,
* ``lam(u)`` returns ``S``.

A single point is the special case ``S == ()``.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

Array = np.ndarray


def _norm(u: Array) -> Array:
    return np.sqrt(np.sum(u * u, axis=0))


def _eye(m: int, shape: tuple) -> Array:
    out = np.zeros((m, m) + shape)
    for i in range(m):
        out[i, i] = 1.0
    return out


@dataclass(frozen=True)
class DiffusionModel:
    """The triple (P, A = P_u, lam) with its structural metadata.

    ``floor`` is the ellipticity floor (lam >= floor); ``shift`` is the total
    amount added by :func:`regularize`, so ``lam(u) - shift`` is the
    ellipticity of the unregularised map.
    """

    name: str
    m: int
    P: Callable[[Array], Array]
    A: Callable[[Array], Array]
    lam: Callable[[Array], Array]
    k: float | None
    floor: float
    c_star: float
    holder_exp: float | None = None
    holder_const: float | None = None
    domain: str = "box"
    shift: float = 0.0
    params: dict = field(default_factory=dict)
    approx_jacobian: bool = False

    @property
    def regular(self) -> bool:
        return self.floor > 0.0

    def describe(self) -> dict:
        return {
            "name": self.name,
            "m": self.m,
            "params": dict(self.params),
            "shift": self.shift,
            "floor": self.floor,
            "c_star": self.c_star,
            "k": self.k,
        }


@dataclass(frozen=True)
class ReactionModel:
    """Reaction f with Jacobian f_u.

    ``growth`` is the declared constant of the growth bounds
    |f(u)| <= C|u|(1 + lam(u)) and |f_u(u)| <= C(1 + lam(u)); ``None`` means
    only the empirical constants are reported. ``sign_class`` is
    ``"competitive"`` (<f(u),u> <= C|u|^2, constants ``(C,)``) or
    ``"cooperative"`` (<f(u),u> <= C0|u|^2 + c0|u|^3, constants ``(C0, c0)``).
    ``K`` is the linear part in f(u) = K u + g(u).
    """

    name: str
    m: int
    f: Callable[[Array], Array]
    f_u: Callable[[Array], Array]
    growth: float | None = None
    sign_class: str | None = None
    sign_constants: tuple = ()
    K: Array | None = None
    params: dict = field(default_factory=dict)

    def linear_part(self) -> Array:
        return np.zeros((self.m, self.m)) if self.K is None else np.asarray(self.K, float)

    def g(self, u: Array) -> Array:
        return self.f(u) - np.einsum("ab,b...->a...", self.linear_part(), u)

    def g_u(self, u: Array) -> Array:
        K = self.linear_part().reshape((self.m, self.m) + (1,) * (np.ndim(u) - 1))
        return self.f_u(u) - K

    def describe(self) -> dict:
        return {"name": self.name, "m": self.m, "params": dict(self.params)}


@dataclass(frozen=True)
class SktParams:
    d1: float = 0.0
    d2: float = 0.0
    a11: float = 1.0
    a12: float = 1.0
    a21: float = 1.0
    a22: float = 1.0
    # Lotka-Volterra reaction u_i (a_i + b_i u_1 + c_i u_2)
    a: tuple = (0.0, 0.0)
    b: tuple = (0.0, 0.0)
    c: tuple = (0.0, 0.0)

    @property
    def admissible(self) -> bool:
        return bool(
            self.a21**2 < 8.0 * self.a11 * self.a12
            and self.a12**2 < 8.0 * self.a22 * self.a21
        )

    @property
    def c_alpha(self) -> float:
        return skt_rayleigh_bounds(self)[0]


# ---------------------------------------------------------------------------
# constructors


def make_heat(m: int = 1) -> DiffusionModel:
    """Linear diffusion P(u) = u (lam = 1)."""
    if m < 1:
        raise ValueError("m must be >= 1")

    def P(u):
        return np.array(u, dtype=float, copy=True)

    def A(u):
        return _eye(m, np.shape(u)[1:])

    def lam(u):
        return np.ones(np.shape(u)[1:])

    return DiffusionModel(
        name="heat", m=m, P=P, A=A, lam=lam, k=None, floor=1.0, c_star=1.0,
        holder_exp=1.0, holder_const=1.0, params={"m": m},
    )


def make_porous_media(m: int, k: float) -> DiffusionModel:
    """Vectorial porous medium map P(u) = |u|^k u."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not k > 0:
        raise ValueError(f"porous media exponent k must be positive, got {k}")

    def P(u):
        u = np.asarray(u, dtype=float)
        return _norm(u) ** k * u

    def A(u):
        u = np.asarray(u, dtype=float)
        r = _norm(u)
        pos = r > 0
        rk = np.where(pos, r, 1.0) ** k
        rk2 = np.where(pos, np.where(pos, r, 1.0) ** (k - 2.0), 0.0)
        out = k * rk2 * np.einsum("a...,b...->ab...", u, u)
        for i in range(m):
            out[i, i] += np.where(pos, rk, 0.0)
        return out

    def lam(u):
        return _norm(np.asarray(u, dtype=float)) ** k

    return DiffusionModel(
        name="porous_media", m=m, P=P, A=A, lam=lam, k=float(k), floor=0.0,
        c_star=1.0 + k, holder_exp=1.0 / (k + 1.0),
        holder_const=2.0 ** (k / (k + 1.0)), params={"m": m, "k": float(k)},
    )


def _skt_A0(p: SktParams, u: Array) -> Array:
    u1, u2 = u[0], u[1]
    return np.array([
        [2 * p.a11 * u1 + p.a12 * u2, p.a12 * u1],
        [p.a21 * u2, p.a21 * u1 + 2 * p.a22 * u2],
    ])


def skt_rayleigh_bounds(p: SktParams, n_grid: int = 721) -> tuple[float, float]:
    """Extremes of the cross-diffusion part over unit directions of the quadrant.

    Returns ``(c_alpha, sigma)``: the minimum of the smallest eigenvalue of the
    symmetric part and the maximum singular value. The cross-diffusion part is
    homogeneous of degree one, so the unit quarter circle is enough.
    """

    def lo(t):
        M = _skt_A0(p, np.array([np.cos(t), np.sin(t)]))
        return np.linalg.eigvalsh(0.5 * (M + M.T))[0]

    def hi(t):
        M = _skt_A0(p, np.array([np.cos(t), np.sin(t)]))
        return -np.linalg.norm(M, 2)

    th = np.linspace(0.0, 0.5 * np.pi, n_grid)
    dth = th[1] - th[0]
    out = []
    for fun in (lo, hi):
        vals = np.array([fun(t) for t in th])
        i = int(np.argmin(vals))
        a, b = max(th[i] - dth, 0.0), min(th[i] + dth, 0.5 * np.pi)
        res = minimize_scalar(fun, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        out.append(min(vals[i], float(res.fun)))
    return float(out[0]), float(-out[1])


def make_skt(params: SktParams) -> tuple[DiffusionModel, ReactionModel]:
    """SKT cross-diffusion map with Lotka-Volterra reaction."""
    p = params
    alphas = (p.a11, p.a12, p.a21, p.a22)
    if min(alphas) <= 0:
        raise ValueError(f"SKT cross-diffusion coefficients must be positive, got {alphas}")
    if min(p.d1, p.d2) < 0:
        raise ValueError("SKT self-diffusion must be nonnegative")
    c_raw, sigma = skt_rayleigh_bounds(p)
    c_alpha = float(max(c_raw, 0.0))
    dmin, dmax = min(p.d1, p.d2), max(p.d1, p.d2)
    if c_alpha > 0:
        c_star = max(sigma / c_alpha, dmax / dmin if dmin > 0 else 1.0, 1.0)
    else:
        c_star = float("inf")

    def P(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[0], u[1]
        return np.array([
            p.d1 * u1 + p.a11 * u1**2 + p.a12 * u1 * u2,
            p.d2 * u2 + p.a21 * u1 * u2 + p.a22 * u2**2,
        ])

    def A(u):
        u = np.asarray(u, dtype=float)
        out = _skt_A0(p, u)
        out[0, 0] = out[0, 0] + p.d1
        out[1, 1] = out[1, 1] + p.d2
        return out

    def lam(u):
        return dmin + c_alpha * _norm(np.asarray(u, dtype=float))

    model = DiffusionModel(
        name="skt", m=2, P=P, A=A, lam=lam, k=1.0, floor=dmin, c_star=c_star,
        holder_exp=0.5, holder_const=None, domain="quadrant",
        params={**dataclasses.asdict(p), "c_alpha": c_alpha},
    )
    reaction = lotka_volterra(p.a, p.b, p.c)
    return model, reaction


def regularize(model: DiffusionModel, lam0: float) -> DiffusionModel:
    """Return the model with P'(u) = lam0 u + P(u); ``model`` is untouched."""
    if not lam0 > 0:
        raise ValueError(f"regularisation must be positive, got {lam0}")
    m, P, A, lam = model.m, model.P, model.A, model.lam

    def P2(u):
        return lam0 * np.asarray(u, dtype=float) + P(u)

    def A2(u):
        return A(u) + lam0 * _eye(m, np.shape(u)[1:])

    def lam2(u):
        return lam0 + lam(u)

    return dataclasses.replace(
        model, P=P2, A=A2, lam=lam2, floor=model.floor + lam0,
        shift=model.shift + lam0, c_star=max(1.0, model.c_star),
        holder_const=None,
    )


# ---------------------------------------------------------------------------
# reactions


def zero_reaction(m: int) -> ReactionModel:
    return ReactionModel(
        name="zero", m=m, f=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        f_u=lambda u: np.zeros((m, m) + np.shape(u)[1:]), growth=0.0,
        sign_class="competitive", sign_constants=(0.0,), params={"m": m},
    )


def linear_reaction(m: int, rate: float) -> ReactionModel:
    """f(u) = rate * u."""

    def f(u):
        return rate * np.asarray(u, dtype=float)

    def f_u(u):
        return rate * _eye(m, np.shape(u)[1:])

    return ReactionModel(
        name="linear", m=m, f=f, f_u=f_u, growth=abs(rate),
        sign_class="competitive", sign_constants=(max(rate, 0.0),),
        K=rate * np.eye(m), params={"m": m, "rate": rate},
    )


def logistic_reaction(m: int, rate: float = 1.0) -> ReactionModel:
    """f(u) = rate * u (1 - |u|)."""

    def f(u):
        u = np.asarray(u, dtype=float)
        return rate * u * (1.0 - _norm(u))

    def f_u(u):
        u = np.asarray(u, dtype=float)
        r = _norm(u)
        safe = np.where(r > 0, r, 1.0)
        out = -rate * np.where(r > 0, 1.0 / safe, 0.0) * np.einsum("a...,b...->ab...", u, u)
        for i in range(m):
            out[i, i] += rate * (1.0 - r)
        return out

    return ReactionModel(
        name="logistic", m=m, f=f, f_u=f_u, growth=2.0 * abs(rate),
        sign_class="competitive", sign_constants=(max(rate, 0.0),),
        K=rate * np.eye(m), params={"m": m, "rate": rate},
    )


def cubic_reaction(m: int, rate: float = 1.0) -> ReactionModel:
    """f(u) = rate |u|^2 u, no sign condition (blow-up prone)."""

    def f(u):
        u = np.asarray(u, dtype=float)
        return rate * _norm(u) ** 2 * u

    def f_u(u):
        u = np.asarray(u, dtype=float)
        out = 2.0 * rate * np.einsum("a...,b...->ab...", u, u)
        r2 = np.sum(u * u, axis=0)
        for i in range(m):
            out[i, i] += rate * r2
        return out

    return ReactionModel(name="cubic", m=m, f=f, f_u=f_u, params={"m": m, "rate": rate})


def lotka_volterra(a, b, c) -> ReactionModel:
    """f_i(u) = u_i (a_i + b_i u_1 + c_i u_2)."""
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))

    def f(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[0], u[1]
        return np.array([
            u1 * (a[0] + b[0] * u1 + c[0] * u2),
            u2 * (a[1] + b[1] * u1 + c[1] * u2),
        ])

    def f_u(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[0], u[1]
        return np.array([
            [a[0] + 2 * b[0] * u1 + c[0] * u2, c[0] * u1],
            [b[1] * u2, a[1] + b[1] * u1 + 2 * c[1] * u2],
        ])

    competitive = bool(np.all(b <= 0) and np.all(c <= 0))
    if competitive:
        sign_class, consts = "competitive", (float(max(a.max(), 0.0)),)
    else:
        # <f(u),u> <= max(a)|u|^2 + (sum of positive coefficients)|u|^3
        c0 = float(np.sum(np.clip(b, 0, None)) + np.sum(np.clip(c, 0, None)))
        sign_class, consts = "cooperative", (float(max(a.max(), 0.0)), c0)
    return ReactionModel(
        name="lotka_volterra", m=2, f=f, f_u=f_u, sign_class=sign_class,
        sign_constants=consts, K=np.diag(a),
        params={"a": a.tolist(), "b": b.tolist(), "c": c.tolist()},
    )


# ---------------------------------------------------------------------------
# sampled structure checks


@dataclass(frozen=True)
class Sampler:
    """Where and how densely to sample.

    ``domain`` is ``"box"`` (each coordinate in [lo, hi]) or ``"quadrant"``
    (nonnegative coordinates in [0, hi]).
    """

    domain: str = "box"
    lo: float = -2.0
    hi: float = 2.0
    n_u: int = 1000
    n_zeta: int = 16
    tol: float = 1e-9
    seed: int = 0

    def points(self, m: int) -> Array:
        rng = np.random.default_rng(self.seed)
        lo = 0.0 if self.domain == "quadrant" else self.lo
        pts = rng.uniform(lo, self.hi, size=(self.n_u, m))
        corners = np.array([[lo] * m, [self.hi] * m])
        axes = []
        for i in range(m):
            e = np.full(m, 0.0 if lo <= 0.0 <= self.hi else lo)
            e[i] = self.hi
            axes.append(e)
        return np.vstack([pts, corners, np.array(axes)])

    def describe(self) -> str:
        lo = 0.0 if self.domain == "quadrant" else self.lo
        return f"{self.domain} [{lo}, {self.hi}]^m, {self.n_u} random u + corners/axes, seed {self.seed}"


@dataclass
class ConditionResult:
    condition: str
    verdict: str
    witness_u: list | None
    witness_zeta: list | None
    margin: float
    samples: int
    constant: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class StructureReport:
    results: list[ConditionResult]
    domain: str

    @property
    def verdict(self) -> str:
        return "pass" if all(r.passed for r in self.results) else "fail"

    def __getitem__(self, condition: str) -> ConditionResult:
        for r in self.results:
            if r.condition == condition:
                return r
        raise KeyError(condition)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "domain": self.domain,
            "conditions": [r.to_json() for r in self.results],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _check_leq(name, lhs, rhs, us, zetas, tol, constant=None) -> ConditionResult:
    """Verify lhs <= rhs samplewise; margins normalised by 1 + |lhs| + |rhs|."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    margin = (rhs - lhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
    i = int(np.argmin(margin))
    verdict = "pass" if margin[i] >= -tol else "fail"
    return ConditionResult(
        condition=name,
        verdict=verdict,
        witness_u=[float(x) for x in us[i]],
        witness_zeta=None if zetas is None else [float(x) for x in zetas[i]],
        margin=float(margin[i]),
        samples=int(lhs.size),
        constant=constant,
    )


def _directions(m: int, n: int, rng) -> Array:
    z = rng.normal(size=(n, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    axes = np.vstack([np.eye(m), -np.eye(m)])
    return np.vstack([z, axes])


def check_ellipticity(model: DiffusionModel, sampler: Sampler) -> StructureReport:
    """Check lam|z|^2 <= <A z, z>, |A| <= C_* lam and lam >= floor on samples."""
    us = sampler.points(model.m)
    rng = np.random.default_rng(sampler.seed + 1)
    base_dirs = _directions(model.m, sampler.n_zeta, rng)
    lam = np.asarray(model.lam(us.T), dtype=float)
    Amat = np.moveaxis(model.A(us.T), -1, 0)  # (n, m, m)

    lo_l, lo_r, lo_u, lo_z = [], [], [], []
    for j in range(len(us)):
        M = Amat[j]
        _, vecs = np.linalg.eigh(0.5 * (M + M.T))
        dirs = np.vstack([base_dirs, vecs.T])
        q = np.einsum("na,ab,nb->n", dirs, M, dirs)
        i = int(np.argmin(q - lam[j]))
        lo_l.append(lam[j])
        lo_r.append(q[i])
        lo_u.append(us[j])
        lo_z.append(dirs[i])
    lower = _check_leq("ellipticity_lower", lo_l, lo_r, lo_u, lo_z, sampler.tol)

    opnorm = np.linalg.norm(Amat, ord=2, axis=(1, 2))
    emp = np.where(lam > 0, opnorm / np.where(lam > 0, lam, 1.0), np.where(opnorm > 0, np.inf, 0.0))
    # an infinite C_* bounds nothing where lam vanishes
    with np.errstate(invalid="ignore"):
        bound = np.where(lam > 0, np.minimum(model.c_star * lam, np.finfo(float).max), 0.0)
    upper = _check_leq("operator_norm", opnorm, bound, us, None,
                       sampler.tol, constant=float(np.max(emp)))
    floor = _check_leq("floor", np.full(len(us), model.floor), lam, us, None, sampler.tol,
                       constant=float(np.min(lam)))
    return StructureReport([lower, upper, floor], sampler.describe())


def check_reaction_growth(reaction: ReactionModel, model: DiffusionModel,
                          sampler: Sampler) -> StructureReport:
    """Check the growth bounds on f, f_u and the declared sign condition.

    Each result carries the smallest constant that makes its inequality hold on
    the sample; the verdict compares against the declared constant (when one is
    declared).
    """
    us = sampler.points(reaction.m)
    U = us.T
    r = np.linalg.norm(us, axis=1)
    lam = np.asarray(model.lam(U), dtype=float)
    fval = np.linalg.norm(reaction.f(U), axis=0)
    fu = np.linalg.norm(np.moveaxis(reaction.f_u(U), -1, 0), ord=2, axis=(1, 2))

    def smallest(num, den):
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                         np.where(num > sampler.tol, np.inf, 0.0))
        return float(np.max(q))

    results = []
    env_f = r * (1.0 + lam)
    c_f = smallest(fval, env_f)
    C = reaction.growth if reaction.growth is not None else c_f
    results.append(_check_leq("growth_f", fval, C * env_f, us, None, sampler.tol, constant=c_f))
    env_fu = 1.0 + lam
    c_fu = smallest(fu, env_fu)
    C = reaction.growth if reaction.growth is not None else c_fu
    results.append(_check_leq("growth_fu", fu, C * env_fu, us, None, sampler.tol, constant=c_fu))

    inner = np.einsum("an,an->n", reaction.f(U), U)
    if reaction.sign_class == "competitive":
        c_s = smallest(np.clip(inner, 0, None), r**2)
        (C,) = reaction.sign_constants
        results.append(_check_leq("sign_competitive", inner, C * r**2, us, None,
                                  sampler.tol, constant=c_s))
    elif reaction.sign_class == "cooperative":
        C0, c0 = reaction.sign_constants
        c_s = smallest(np.clip(inner - C0 * r**2, 0, None), r**3)
        results.append(_check_leq("sign_cooperative", inner, C0 * r**2 + c0 * r**3, us, None,
                                  sampler.tol, constant=c_s))
    return StructureReport(results, sampler.describe())


def check_holder_inverse(model: DiffusionModel, sampler: Sampler) -> StructureReport:
    """Check |u - v| <= [P] |P(u) - P(v)|^alpha on sampled pairs.

    Pairs are consecutive points of two independent samples, plus antipodal
    pairs v = -u (binding for odd maps) when the domain allows them.
    """
    if model.holder_exp is None:
        raise ValueError(f"model {model.name!r} declares no Hoelder exponent")
    alpha = model.holder_exp
    us = sampler.points(model.m)
    vs = dataclasses.replace(sampler, seed=sampler.seed + 7).points(model.m)
    pairs_u = [us, us]
    pairs_v = [vs, us.copy()]
    if sampler.domain == "box" and sampler.lo <= -sampler.hi:
        pairs_u.append(us)
        pairs_v.append(-us)
    u = np.vstack(pairs_u)
    v = np.vstack(pairs_v)
    du = np.linalg.norm(u - v, axis=1)
    dP = np.linalg.norm(model.P(u.T) - model.P(v.T), axis=0)
    rhs_unit = dP**alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(rhs_unit > 0, du / np.where(rhs_unit > 0, rhs_unit, 1.0),
                     np.where(du > 0, np.inf, 0.0))
    emp = float(np.max(q))
    const = model.holder_const if model.holder_const is not None else emp
    res = _check_leq("holder_inverse", du, const * rhs_unit, u, v, sampler.tol, constant=emp)
    return StructureReport([res], sampler.describe())


def check_jacobian(model: DiffusionModel, sampler: Sampler, step: float = 1e-6,
                   rtol: float = 1e-6) -> StructureReport:
    """Compare analytic A(u) against central differences of P."""
    us = sampler.points(model.m)[: sampler.n_u]
    return _jacobian_report("jacobian_P", model.P, model.A, us, model.m, step, rtol, sampler)


def check_reaction_jacobian(reaction: ReactionModel, sampler: Sampler, step: float = 1e-6,
                            rtol: float = 1e-6) -> StructureReport:
    us = sampler.points(reaction.m)[: sampler.n_u]
    return _jacobian_report("jacobian_f", reaction.f, reaction.f_u, us, reaction.m, step,
                            rtol, sampler)


def fd_jacobian(fun, u: Array, step: float = 1e-6) -> Array:
    """Central-difference Jacobian of ``fun`` at the points ``u`` (shape (m, n))."""
    m = u.shape[0]
    cols = []
    for b in range(m):
        e = np.zeros_like(u)
        e[b] = step
        cols.append((fun(u + e) - fun(u - e)) / (2.0 * step))
    return np.stack(cols, axis=1)


def _jacobian_report(name, fun, jac, us, m, step, rtol, sampler) -> StructureReport:
    U = us.T
    exact = jac(U)
    approx = fd_jacobian(fun, U, step)
    err = np.linalg.norm(np.moveaxis(exact - approx, -1, 0), ord=2, axis=(1, 2))
    scale = 1.0 + np.linalg.norm(np.moveaxis(exact, -1, 0), ord=2, axis=(1, 2))
    i = int(np.argmax(err / scale))
    res = ConditionResult(
        condition=name,
        verdict="pass" if err[i] <= rtol * scale[i] else "fail",
        witness_u=[float(x) for x in us[i]],
        witness_zeta=None,
        margin=float(rtol - err[i] / scale[i]),
        samples=len(us),
        constant=float(err[i] / scale[i]),
    )
    return StructureReport([res], sampler.describe())


def check_skt_admissible(params: SktParams) -> ConditionResult:
    """Verdict on a21^2 < 8 a11 a12 and a12^2 < 8 a22 a21."""
    g1 = 8.0 * params.a11 * params.a12 - params.a21**2
    g2 = 8.0 * params.a22 * params.a21 - params.a12**2
    worst = min(g1, g2)
    return ConditionResult(
        condition="skt_admissible",
        verdict="pass" if params.admissible else "fail",
        witness_u=[params.a11, params.a12, params.a21, params.a22],
        witness_zeta=None,
        margin=float(worst),
        samples=1,
    )


# ---------------------------------------------------------------------------
# presets

MODEL_PRESETS = ("heat", "porous_media", "skt_compete", "skt_coop")

SKT_COMPETE = SktParams(a=(1.0, 1.0), b=(-1.0, -0.5), c=(-0.5, -1.0))
SKT_COOP = SktParams(a=(1.0, 1.0), b=(-1.0, 0.2), c=(0.2, -1.0))


def preset_model(name: str, **kw) -> tuple[DiffusionModel, ReactionModel]:
    """Look up a model/reaction pair by preset name."""
    if name == "heat":
        m = int(kw.get("m", 1))
        return make_heat(m), zero_reaction(m)
    if name == "porous_media":
        m = int(kw.get("m", 2))
        return make_porous_media(m, float(kw.get("k", 1.0))), zero_reaction(m)
    if name in ("skt_compete", "skt_coop"):
        base = SKT_COMPETE if name == "skt_compete" else SKT_COOP
        fields = {f.name for f in dataclasses.fields(SktParams)}
        over = {key: (tuple(v) if isinstance(v, list) else v) for key, v in kw.items() if key in fields}
        return make_skt(dataclasses.replace(base, **over))
    raise KeyError(f"unknown model preset {name!r}; known: {', '.join(MODEL_PRESETS)}")


def preset_reaction(name: str, m: int, rate: float = 1.0) -> ReactionModel:
    if name == "zero":
        return zero_reaction(m)
    if name == "linear":
        return linear_reaction(m, rate)
    if name == "logistic":
        return logistic_reaction(m, rate)
    if name == "cubic":
        return cubic_reaction(m, rate)
    raise KeyError(f"unknown reaction {name!r}")
