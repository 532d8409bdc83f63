"""Regularisation cascades: solve along a decreasing lambda sequence, measure how
the members approach each other, and compare the limits of two sequences."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .grid import Grid, GridField, laplacian_values, lp_norm, mean_oscillation, mollify
from .model import DiffusionModel, ReactionModel, regularize
from .monitors import (EstimateLedger, build_ledger, check_uniform_bounds)
from .solver import (MeshMismatch, SolverControls, SolverError, Trajectory, save_trajectory,
                     solve_dual)


class SpecMismatch(ValueError):
    pass


def geometric_sequence(base: float, n: int, start: int = 0) -> tuple:
    return tuple(float(base) ** (-k) for k in range(start, start + n))


@dataclass
class CascadeSpec:
    model: DiffusionModel
    reaction: ReactionModel
    lambdas: tuple
    u0: GridField
    controls: SolverControls
    radii: tuple | None = None
    r0: float | None = None
    label: str = "cascade"
    q1: float = 1.5
    q0: float = 2.0
    sbmo_radius: float | None = None
    sbmo_mu0: float | None = None
    sbmo_abort: bool = False

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ValueError("the lambda sequence is empty")
        if min(lam) <= 0 or any(b >= a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambda sequence must be positive and strictly decreasing")
        self.lambdas = lam
        if self.radii is None and self.r0 is not None:
            h2 = 2 * max(self.grid.h)
            self.radii = tuple(max(h2, self.r0 * 2.0 ** (-n)) for n in range(len(lam)))
        if self.radii is not None:
            self.radii = tuple(float(r) for r in self.radii)
            if len(self.radii) != len(lam):
                raise ValueError("need one mollification radius per lambda")
            if any(r < max(self.grid.h) * (1 - 1e-12) for r in self.radii):
                raise ValueError("mollification radii must be at least the grid spacing")
            if any(b > a for a, b in zip(self.radii, self.radii[1:])):
                raise ValueError("mollification radii must not increase")

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def initial_datum(self, n: int) -> GridField:
        if self.radii is None:
            return self.u0
        return mollify(self.u0, self.radii[n])

    def echo(self) -> dict:
        return {
            "label": self.label,
            "model": self.model.describe(),
            "reaction": self.reaction.describe(),
            "lambdas": list(self.lambdas),
            "radii": list(self.radii) if self.radii is not None else None,
            "grid": self.grid.describe(),
            "bc": self.u0.bc,
            "controls": asdict(self.controls),
            "q1": self.q1,
        }


@dataclass
class Member:
    n: int
    lam: float
    traj: Trajectory | None
    ledger: EstimateLedger | None
    ic_l1: float
    error: str | None = None
    sbmo: float | None = None

    @property
    def ok(self) -> bool:
        return self.traj is not None


@dataclass
class CascadeReport:
    spec: CascadeSpec
    members: list
    distances: np.ndarray        # P-image distances in L2(Q)
    u_distances: np.ndarray      # u-image distances, reported only
    uniform: dict | None = None
    cauchy: dict = field(default_factory=dict)

    @property
    def limit(self) -> Member:
        return self.members[-1]

    def verdicts(self) -> dict:
        out = {}
        if self.cauchy.get("verdict") in ("pass", "fail"):
            out["cauchy"] = self.cauchy["verdict"]
        if self.uniform is not None:
            out["uniform_bounds"] = self.uniform["verdict"]
        out["members_completed"] = "pass" if all(m.ok for m in self.members) else "fail"
        return out

    def to_json(self) -> dict:
        return {
            "spec": self.spec.echo(),
            "members": [
                {"n": m.n, "lambda": m.lam, "ok": m.ok, "error": m.error, "ic_l1": m.ic_l1,
                 "sbmo": m.sbmo,
                 "ledger": m.ledger.summary() if m.ledger is not None else None}
                for m in self.members
            ],
            "distances": _matrix_json(self.distances),
            "u_distances": _matrix_json(self.u_distances),
            "cauchy": self.cauchy,
            "uniform_bounds": self.uniform,
            "verdicts": self.verdicts(),
        }


def _matrix_json(a):
    return [[None if not math.isfinite(x) else float(x) for x in row] for row in a]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CROSSDIFF_THREADS", "1")))
    except ValueError:
        return 1


def space_time_distance(a: Trajectory, b: Trajectory, fa=None, fb=None) -> float:
    """L2(Q) distance of two trajectories on a shared mesh (trapezoid in time).

    ``fa``/``fb`` map snapshot values before comparing (e.g. to P(u)).
    """
    if not np.array_equal(a.times, b.times) or a.grid != b.grid:
        raise MeshMismatch("members do not share a time mesh")
    t = np.asarray(a.times, float)
    sq = []
    for x, y in zip(a.fields, b.fields):
        vx = fa(x.values) if fa else x.values
        vy = fb(y.values) if fb else y.values
        sq.append(float(np.sum((vx - vy) ** 2)) * a.grid.cell_volume)
    return math.sqrt(max(float(trapezoid(sq, t)), 0.0))


def _run_member(spec: CascadeSpec, n: int) -> Member:
    from .solver import run_forward

    lam = spec.lambdas[n]
    u0n = spec.initial_datum(n)
    ic = lp_norm(u0n - spec.u0, 1)
    model = regularize(spec.model, lam)
    try:
        traj = run_forward(model, spec.reaction, u0n, spec.controls)
    except SolverError as exc:
        return Member(n, lam, None, None, ic, f"{type(exc).__name__}: {exc}")
    ledger = build_ledger(traj, model, spec.reaction, spec.q1, spec.q0)
    sbmo = None
    if spec.sbmo_radius is not None:
        f = traj.final
        sbmo = mean_oscillation(f.with_values(spec.model.P(f.values)), [spec.sbmo_radius]).values[0]
    return Member(n, lam, traj, ledger, ic, None, sbmo)


def run_cascade(spec: CascadeSpec) -> CascadeReport:
    """Solve every member (concurrently up to CROSSDIFF_THREADS) and assemble the report."""
    idx = range(len(spec.lambdas))
    if spec.sbmo_abort and spec.sbmo_mu0 is not None:
        members = []
        for n in idx:
            mem = _run_member(spec, n)
            members.append(mem)
            if mem.sbmo is not None and mem.sbmo > spec.sbmo_mu0:
                mem.error = "oscillation above the configured bound"
                break
    else:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            members = list(pool.map(lambda n: _run_member(spec, n), idx))
    return assemble(spec, members)


def assemble(spec: CascadeSpec, members: list) -> CascadeReport:
    k = len(members)
    D = np.zeros((k, k))
    Du = np.zeros((k, k))
    P = spec.model.P
    for i in range(k):
        for j in range(i + 1, k):
            a, b = members[i], members[j]
            if a.ok and b.ok:
                D[i, j] = space_time_distance(a.traj, b.traj, P, P)
                Du[i, j] = space_time_distance(a.traj, b.traj)
            else:
                D[i, j] = Du[i, j] = math.nan
            D[j, i], Du[j, i] = D[i, j], Du[i, j]
    uniform = None
    if k >= 3:
        uniform = check_uniform_bounds([m.ledger for m in members]).to_json()
    rep = CascadeReport(spec, members, D, Du, uniform)
    rep.cauchy = cauchy_table(rep)
    return rep


def cauchy_table(report: CascadeReport, start: int = 0) -> dict:
    """Rows (n, lambda, d(n, n_max)) for n < n_max.

    Passes when the distances decrease strictly in n from ``start`` on and the
    last ratio d(n_max-1, n_max) / d(n_max-2, n_max) is below one.
    """
    k = len(report.members)
    if k < 3:
        return {"rows": [], "verdict": "skipped", "ratios": []}
    last = k - 1
    d = [float(report.distances[n, last]) for n in range(last)]
    rows = [{"n": n, "lambda": report.members[n].lam, "dist_to_last": d[n]} for n in range(last)]
    ratios = [d[n + 1] / d[n] if d[n] > 0 else math.nan for n in range(last - 1)]
    tail = d[start:]
    ok = all(math.isfinite(x) for x in d) and all(b < a for a, b in zip(tail, tail[1:]))
    ok = ok and ratios[-1] < 1.0
    return {"rows": rows, "ratios": ratios, "start": start, "verdict": "pass" if ok else "fail"}


# ---------------------------------------------------------------------------
# two-sequence comparison


def _same_model(a: DiffusionModel, b: DiffusionModel) -> bool:
    return a.describe() == b.describe()


def check_compatible(spec_a: CascadeSpec, spec_b: CascadeSpec) -> None:
    if not _same_model(spec_a.model, spec_b.model):
        raise SpecMismatch("base models differ")
    if spec_a.reaction.describe() != spec_b.reaction.describe():
        raise SpecMismatch("reactions differ")
    if spec_a.grid != spec_b.grid or spec_a.u0.bc != spec_b.u0.bc:
        raise SpecMismatch("grids or boundary conditions differ")
    if spec_a.controls != spec_b.controls:
        raise SpecMismatch("solver controls (and final time) differ")
    if not np.array_equal(spec_a.u0.values, spec_b.u0.values):
        raise SpecMismatch("raw initial data differ")
    if (spec_a.radii is None) != (spec_b.radii is None):
        raise SpecMismatch("mollification schedules differ")


@dataclass
class CrossReport:
    a: CascadeReport
    b: CascadeReport
    cross: list          # d(u_a^k, u_b^k) for k = 0..n_max
    tails: tuple
    factor: float
    start: int = 0

    @property
    def cross_distance(self) -> float:
        return self.cross[-1]

    def checks(self) -> dict:
        bound = self.factor * max(self.tails)
        within = self.cross_distance <= bound
        tail = self.cross[self.start:]
        decreasing = all(y < x for x, y in zip(tail, tail[1:]))
        # a zero predecessor means the two members coincide; growth is undefined there
        growth = all(y <= self.factor * x for x, y in zip(self.cross, self.cross[1:]) if x > 0)
        return {
            "cross_within_tail": "pass" if within else "fail",
            "cross_decreasing": "pass" if decreasing else "fail",
            "extension_growth": "pass" if growth else "fail",
        }

    @property
    def verdict(self) -> str:
        return "pass" if all(v == "pass" for v in self.checks().values()) else "fail"

    def to_json(self) -> dict:
        return {"cross": self.cross, "tails": list(self.tails), "factor": self.factor,
                "start": self.start,
                "bound": self.factor * max(self.tails), "checks": self.checks(),
                "verdict": self.verdict}


def cross_uniqueness(spec_a: CascadeSpec, spec_b: CascadeSpec, factor: float = 2.0,
                     reports: tuple | None = None, start: int = 0) -> CrossReport:
    """Compare the limits of two cascades differing only in their lambda sequences.

    ``cross[k]`` is the L2(Q) distance between the k-th members of both
    cascades; the decrease check covers ``cross[start:]``.
    """
    check_compatible(spec_a, spec_b)
    if len(spec_a.lambdas) != len(spec_b.lambdas):
        raise SpecMismatch("sequences must have the same length")
    if len(spec_a.lambdas) < 2:
        raise ValueError("need at least two members per sequence")
    ra, rb = reports if reports is not None else (run_cascade(spec_a), run_cascade(spec_b))
    P = spec_a.model.P
    cross = []
    for ma, mb in zip(ra.members, rb.members):
        if ma.ok and mb.ok:
            cross.append(space_time_distance(ma.traj, mb.traj, P, P))
        else:
            cross.append(math.inf)
    last = len(ra.members) - 1
    tails = (float(ra.distances[last - 1, last]), float(rb.distances[last - 1, last]))
    return CrossReport(ra, rb, cross, tails, factor, start)


# ---------------------------------------------------------------------------
# duality identity


@dataclass
class DualityReport:
    times: list
    lhs: np.ndarray
    rhs: np.ndarray
    dlam: float
    factor_u: np.ndarray
    factor_psi: np.ndarray
    scale: float

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)

    @property
    def bound(self) -> np.ndarray:
        return 0.5 * math.sqrt(self.dlam) * self.factor_u * self.factor_psi

    @property
    def prefactor(self) -> np.ndarray:
        """bound / |dlam|^{1/2}: the part of the bound not explained by the lambda gap."""
        return 0.5 * self.factor_u * self.factor_psi

    def to_json(self) -> dict:
        return {"t": [float(t) for t in self.times], "lhs": self.lhs.tolist(),
                "rhs": self.rhs.tolist(), "residual": self.residual.tolist(),
                "bound": self.bound.tolist(), "dlam": self.dlam, "scale": self.scale}


def _ip(a, b, vol):
    return float(np.sum(a * b)) * vol


def duality_residual(traj_a: Trajectory, traj_b: Trajectory, reaction: ReactionModel,
                     psi: GridField, controls: SolverControls | None = None) -> DualityReport:
    """Both sides of <w(s), Psi(s)> - <w(0), Psi(0)> = I(s) for w = u_a - u_b.

    I(s) is the sum over steps i < s of dt <S^{i+1}, Lap Psi^i>, which is what
    the backward-Euler pair makes exact. Needs every step stored (stride 1).
    """
    for tr in (traj_a, traj_b):
        if tr.controls is not None and len(tr.fields) != tr.controls.steps + 1:
            raise MeshMismatch("duality needs trajectories stored at every step")
    dual = solve_dual(traj_a, traj_b, reaction, psi, controls)
    ma, mb = traj_a.model, traj_b.model
    grid, bc, vol = traj_a.grid, traj_a.bc, traj_a.grid.cell_volume
    J = len(traj_a.fields) - 1
    w = [traj_a.fields[j].values - traj_b.fields[j].values for j in range(J + 1)]
    Psi = [f.values for f in dual.fields]
    lhs = np.array([_ip(w[s], Psi[s], vol) - _ip(w[0], Psi[0], vol) for s in range(J + 1)])
    rhs = np.zeros(J + 1)
    fu = np.zeros(J + 1)
    fpsi = np.zeros(J + 1)
    for i in range(J):
        dt = traj_a.times[i + 1] - traj_a.times[i]
        ua, ub = traj_a.fields[i + 1].values, traj_b.fields[i + 1].values
        S = 0.5 * (ma.P(ub) - mb.P(ub) + ma.P(ua) - mb.P(ua))
        lap = laplacian_values(Psi[i], grid, bc)
        rhs[i + 1] = rhs[i] + dt * _ip(S, lap, vol)
        fu[i + 1] = fu[i] + dt * float(np.sum((ua + ub) ** 2)) * vol
        lam = ma.lam(ua) + mb.lam(ub)
        fpsi[i + 1] = fpsi[i] + dt * float(np.sum(lam * np.sum(lap**2, axis=0))) * vol
    scale = math.sqrt(max(_ip(w[-1], w[-1], vol), 0.0)) * math.sqrt(_ip(psi.values, psi.values, vol))
    dlam = abs(ma.shift - mb.shift)
    return DualityReport(list(traj_a.times), lhs, rhs, dlam, np.sqrt(fu), np.sqrt(fpsi), scale)


# ---------------------------------------------------------------------------
# serialisation


def save_cascade(report: CascadeReport, directory, dumps: bool = True) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for m in report.members:
        if m.traj is not None and dumps:
            save_trajectory(m.traj, d / f"member_{m.n:02d}")
        if m.ledger is not None:
            (d / f"ledger_{m.n:02d}.csv").write_text(m.ledger.to_csv())
    with open(d / "distances.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "n_prime", "d"])
        k = len(report.members)
        for i in range(k):
            for j in range(k):
                w.writerow([i, j, repr(float(report.distances[i, j]))])
    (d / "report.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
    return d
