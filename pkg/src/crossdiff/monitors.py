"""Discrete energy functionals along trajectories and checks on their bounds.

Gradients are taken across cell faces (see :func:`grid.face_differences`);
state-dependent coefficients are evaluated at the face midpoint state.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, face_differences, lp_norm, mean_oscillation, OscillationProfile
from .model import DiffusionModel, ReactionModel
from .solver import MeshMismatch, Trajectory

FUNCTIONALS = ("E1", "E2", "E3", "E4", "E5")


@dataclass
class EstimateLedger:
    times: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    E4: np.ndarray
    E5: np.ndarray
    q1: float
    lam0: float
    q0: float = 2.0
    lam_q0: np.ndarray | None = None
    label: str = ""

    def series(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def rows(self):
        for j, t in enumerate(self.times):
            yield [float(t)] + [float(self.series(k)[j]) for k in FUNCTIONALS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *FUNCTIONALS])
        for row in self.rows():
            w.writerow([repr(x) for x in row])
        return buf.getvalue()

    def summary(self) -> list:
        out = []
        for name in FUNCTIONALS:
            s = self.series(name)
            i = int(np.argmax(s))
            ok = bool(np.all(np.isfinite(s)) and np.all(s >= 0))
            if name == "E3":
                ok = ok and bool(np.all(np.diff(s) >= 0))
            out.append({"functional": name, "sup": float(s[i]), "argmax_t": float(self.times[i]),
                        "verdict": "pass" if ok else "fail"})
        if self.lam_q0 is not None:
            out.append({"functional": f"lambda_L{self.q0:g}", "sup": float(np.max(self.lam_q0)),
                        "argmax_t": float(self.times[int(np.argmax(self.lam_q0))]),
                        "verdict": "reported"})
        return out


def gradient_energies(values: np.ndarray, grid, bc: str, model: DiffusionModel):
    """(E2, E5) of one state: int (floor^2 + (lam - floor)^2)|Du|^2 and int |A(u) Du|^2."""
    e2 = e5 = 0.0
    floor = model.floor
    for diff, mid, w in face_differences(values, grid, bc):
        lam = model.lam(mid)
        g2 = np.sum(diff**2, axis=0)
        e2 += float(np.sum(w * (floor**2 + (lam - floor) ** 2) * g2))
        flux = np.einsum("ab...,b...->a...", model.A(mid), diff)
        e5 += float(np.sum(w * np.sum(flux**2, axis=0)))
    vol = grid.cell_volume
    return e2 * vol, e5 * vol


def _check_fields(traj: Trajectory, model: DiffusionModel):
    g, bc = traj.fields[0].grid, traj.fields[0].bc
    for f in traj.fields:
        if f.grid != g or f.bc != bc or f.m != model.m:
            raise MeshMismatch("trajectory snapshots do not share grid, boundary and model size")


def build_ledger(traj: Trajectory, model: DiffusionModel | None = None,
                 reaction: ReactionModel | None = None, q1: float = 1.5,
                 q0: float = 2.0) -> EstimateLedger:
    model = model or traj.model
    reaction = reaction or traj.reaction
    if len(traj.fields) < 2:
        raise ValueError("a ledger needs at least two snapshots")
    _check_fields(traj, model)
    grid, bc = traj.grid, traj.bc
    J = len(traj.fields)
    E = {k: np.zeros(J) for k in FUNCTIONALS}
    lam_q0 = np.zeros(J)
    base_shift = model.shift
    for j, f in enumerate(traj.fields):
        u = f.values
        E["E1"][j] = lp_norm(f, 2)
        E["E2"][j], E["E5"][j] = gradient_energies(u, grid, bc, model)
        E["E4"][j] = lp_norm(f.with_values(reaction.f(u)), q1)
        lam_q0[j] = lp_norm(f.with_values((model.lam(u) - base_shift)[None]), q0)
        if j > 0:
            dt = traj.times[j] - traj.times[j - 1]
            ut = (u - traj.fields[j - 1].values) / dt
            inc = dt * float(np.sum(model.lam(u) * np.sum(ut**2, axis=0))) * grid.cell_volume
            E["E3"][j] = E["E3"][j - 1] + inc
    return EstimateLedger(np.asarray(traj.times, float), E["E1"], E["E2"], E["E3"], E["E4"],
                          E["E5"], q1, model.floor, q0, lam_q0)


def equivalence_margins(ledger: EstimateLedger, c_star: float):
    """Signed margins of E2/c_star^2 <= E5 <= 2 c_star^2 E2 at each snapshot."""
    lo = ledger.E5 - ledger.E2 / c_star**2
    hi = 2.0 * c_star**2 * ledger.E2 - ledger.E5
    return lo, hi


# ---------------------------------------------------------------------------
# uniformity over a regularisation sequence


@dataclass
class UniformBoundsReport:
    functionals: dict
    factor: float

    @property
    def verdict(self) -> str:
        return "pass" if all(v["verdict"] == "pass" for v in self.functionals.values()) else "fail"

    def to_json(self) -> dict:
        return {"factor": self.factor, "verdict": self.verdict, "functionals": self.functionals}


def check_uniform_bounds(ledgers: list, factor: float = 3.0,
                         functionals=("E1", "E2", "E3", "E4")) -> UniformBoundsReport:
    """Ratio of the last member's sup to the median sup, per functional.

    ``None`` entries stand for members whose run failed; they count as an
    infinite sup.
    """
    if len(ledgers) < 3:
        raise ValueError("uniform bounds need at least three ledgers")
    out = {}
    for name in functionals:
        sups = [float(np.max(lg.series(name))) if lg is not None else math.inf for lg in ledgers]
        med = float(np.median(sups))
        last = sups[-1]
        if not math.isfinite(last):
            ratio = math.inf
        elif med > 0:
            ratio = last / med
        else:
            ratio = 1.0 if last == 0 else math.inf
        out[name] = {"sups": sups, "max": max(sups), "median": med, "ratio": ratio,
                     "verdict": "pass" if ratio < factor else "fail"}
    return UniformBoundsReport(out, factor)


# ---------------------------------------------------------------------------
# Gronwall envelopes


@dataclass
class GronwallReport:
    C: float
    K: float
    violation: float
    worst_t: float
    tolerance: float

    @property
    def verdict(self) -> str:
        return "pass" if self.violation <= self.tolerance else "fail"

    def envelope(self, t, y0: float) -> np.ndarray:
        return gronwall_envelope(np.asarray(t, float), y0, self.C, self.K)

    def to_json(self) -> dict:
        return {"C": self.C, "K": self.K, "violation": self.violation, "worst_t": self.worst_t,
                "tolerance": self.tolerance, "verdict": self.verdict}


def gronwall_envelope(t: np.ndarray, y0: float, C: float, K: float) -> np.ndarray:
    t = t - t[0]
    return (y0 + K / C) * np.exp(C * t) - K / C


def gronwall_check(t, y, C: float | None = None, K: float = 0.0, tol: float = 1e-9,
                   fit: bool = False, y0: float | None = None) -> GronwallReport:
    """Pointwise check of y(t) <= (y0 + K/C) e^{C t} - K/C.

    With ``fit`` C is the smallest rate (for the given K) such that each step
    of the series satisfies the one-step bound from its previous value; the
    envelope started at y0 then holds by induction.
    ``y0`` defaults to y[0]; passing it lets a fitted envelope be checked
    against another series with its own starting value.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if K < 0:
        raise ValueError("K must be nonnegative")
    y0 = float(y[0]) if y0 is None else float(y0)
    if fit:
        C = _fit_rate(t, y, y0, K)
    if C is None or not C > 0:
        raise ValueError("C must be positive")
    env = gronwall_envelope(t, y0, C, K)
    gap = y - env
    i = int(np.argmax(gap))
    scale = tol * (1.0 + float(np.max(np.abs(y))))
    return GronwallReport(float(C), float(K), float(gap[i]), float(t[i]), scale)


def _fit_rate(t, y, y0, K, floor=1e-12):
    """Smallest C for which every step obeys the one-step Gronwall bound.

    Fitting the differential hypothesis y' <= C y + K step by step (rather
    than the integrated envelope) keeps C meaningful for series that dip
    before they grow.
    """
    ys = np.concatenate([[y0], y[1:]])
    rates = []
    for j in range(len(t) - 1):
        h = t[j + 1] - t[j]
        a, b = ys[j], ys[j + 1]
        if K == 0:
            if a <= 0:
                raise ValueError("rate fit with K = 0 needs positive values")
            rates.append(math.log(max(b, 1e-300) / a) / h)
            continue

        def gap(c):
            return b - ((a + K / c) * math.exp(c * h) - K / c)

        if gap(floor) <= 0:
            rates.append(floor)
            continue
        lo, hi = floor, 1.0
        while gap(hi) > 0 and hi < 1e8:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if gap(mid) > 0 else (lo, mid)
        rates.append(hi)
    return max(max(rates) * (1 + 1e-12), floor)


# ---------------------------------------------------------------------------
# oscillation profiles


@dataclass
class VmoProfile:
    time_index: int
    t: float
    u: OscillationProfile
    U: OscillationProfile

    @property
    def decay(self) -> float:
        """Oscillation at the smallest radius over the value at the largest."""
        big, small = self.u.values[0], self.u.values[-1]
        return small / big if big > 0 else 0.0

    def to_json(self) -> dict:
        return {"time_index": self.time_index, "t": self.t, "radii": list(self.u.radii),
                "osc_u": list(self.u.values), "osc_U": list(self.U.values), "decay": self.decay}


def vmo_profile(traj: Trajectory, radii, times=None, model: DiffusionModel | None = None,
                backend=None) -> list:
    """Mean-oscillation profiles of u and P(u) at the given snapshot indices (default: last)."""
    model = model or traj.model
    idx = [len(traj.fields) - 1] if times is None else list(times)
    out = []
    for j in idx:
        f = traj.fields[j]
        pu = mean_oscillation(f, radii, backend)
        pU = mean_oscillation(f.with_values(model.P(f.values)), radii, backend)
        out.append(VmoProfile(j, float(traj.times[j]),
                              OscillationProfile(pu.radii, pu.values, j, pu.centers),
                              OscillationProfile(pU.radii, pU.values, j, pU.centers)))
    return out


def holder_transfer(profile: VmoProfile, alpha: float, const: float | None = None) -> dict:
    """Check osc(u) <= K osc(P(u))^alpha radius by radius.

    With a declared Hoelder constant [P] the bound is K = 2[P]; otherwise the
    smallest K consistent with the profile is reported.
    """
    ou = np.asarray(profile.u.values)
    oU = np.asarray(profile.U.values) ** alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(oU > 0, ou / oU, np.where(ou > 0, np.inf, 0.0))
    fitted = float(np.max(ratio))
    bound = 2.0 * const if const is not None else fitted
    ok = bool(np.all(ou <= bound * oU * (1 + 1e-9) + 1e-14))
    return {"alpha": alpha, "fitted_constant": fitted, "bound": bound,
            "declared": const is not None, "verdict": "pass" if ok else "fail"}


# ---------------------------------------------------------------------------
# energy identity


@dataclass
class EnergyResidual:
    times: np.ndarray
    residuals: np.ndarray
    C: float
    E5_0: float

    @property
    def max_positive(self) -> float:
        return float(max(0.0, np.max(self.residuals))) if len(self.residuals) else 0.0

    def to_json(self) -> dict:
        return {"C": self.C, "E5_0": self.E5_0, "max_positive": self.max_positive,
                "residuals": [float(r) for r in self.residuals]}


def energy_identity_residual(traj: Trajectory, model: DiffusionModel | None = None,
                             reaction: ReactionModel | None = None,
                             ledger: EstimateLedger | None = None) -> EnergyResidual:
    """r_j = dE3_j + dE5_j / 2 - C dt_j int lam_A |f|^2, C fitted by least squares (>= 0)."""
    model = model or traj.model
    reaction = reaction or traj.reaction
    if len(traj.fields) < 3:
        raise ValueError("the energy residual needs at least three snapshots")
    ledger = ledger or build_ledger(traj, model, reaction)
    vol = traj.grid.cell_volume
    dE3 = np.diff(ledger.E3)
    dE5 = np.diff(ledger.E5)
    src = np.array([
        (traj.times[j] - traj.times[j - 1]) * vol * float(np.sum(
            model.lam(traj.fields[j].values) * np.sum(reaction.f(traj.fields[j].values) ** 2, axis=0)))
        for j in range(1, len(traj.fields))
    ])
    lhs = dE3 + 0.5 * dE5
    denom = float(np.dot(src, src))
    C = max(float(np.dot(lhs, src)) / denom, 0.0) if denom > 0 else 0.0
    return EnergyResidual(np.asarray(traj.times[1:], float), lhs - C * src, C, float(ledger.E5[0]))


def residual_order(coarse: EnergyResidual, fine: EnergyResidual, floor: float = 1e-14) -> float:
    """Observed order of the max positive residual under dt-halving.

    Residuals at or below ``floor * E5(0)`` on both levels count as exact
    (order reported as infinity).
    """
    tiny = floor * max(coarse.E5_0, 1e-300)
    a, b = coarse.max_positive, fine.max_positive
    if a <= tiny and b <= tiny:
        return math.inf
    if b <= tiny:
        return math.inf
    if a <= tiny:
        return -math.inf
    return math.log2(a / b)


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)
