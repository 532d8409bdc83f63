"""Backward-Euler integration of u_t = Lap P(u) + f(u) and of the linear dual system.

Unknowns are numbered cell-major with the component index fastest, so the
pointwise m-by-m blocks (A(u), f_u(u)) sit on the block diagonal and the
stencil couples blocks of neighbouring cells.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .grid import Grid, GridField, laplacian_matrix, laplacian_values, load_field, save_field
from .model import DiffusionModel, ReactionModel, fd_jacobian


class SolverError(RuntimeError):
    pass


class NewtonDiverged(SolverError):
    pass


class NonFiniteState(SolverError):
    pass


class MeshMismatch(ValueError):
    pass


class LinearSolveFailed(SolverError):
    pass


@dataclass(frozen=True)
class SolverControls:
    dt: float
    T: float
    newton_atol: float = 1e-10
    newton_rtol: float = 1e-10
    max_iter: int = 30
    max_halvings: int = 6
    stride: int = 1
    linear_solver: str = "direct"

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if not (self.newton_atol > 0 and self.newton_rtol > 0):
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1 or self.max_halvings < 0 or self.stride < 1:
            raise ValueError("max_iter and stride must be >= 1, max_halvings >= 0")
        if self.linear_solver not in ("direct", "cg"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-8 * max(1.0, n):
            raise ValueError(f"T = {self.T} is not a whole number of steps dt = {self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def tolerance(self, scale: float) -> float:
        return self.newton_atol + self.newton_rtol * scale


@dataclass
class StepDiagnostics:
    iterations: int
    residual: float
    dt_used: float
    substeps: int = 1
    history: list = field(default_factory=list)


@dataclass
class Trajectory:
    times: list
    fields: list
    diagnostics: list
    model: DiffusionModel | None = None
    reaction: ReactionModel | None = None
    controls: SolverControls | None = None
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def bc(self) -> str:
        return self.fields[0].bc

    def __len__(self) -> int:
        return len(self.fields)

    def stack(self) -> np.ndarray:
        """Snapshot values as one array of shape (J+1, m, *shape)."""
        return np.stack([f.values for f in self.fields])

    @property
    def final(self) -> GridField:
        return self.fields[-1]


@dataclass
class DualTrajectory:
    times: list          # increasing, matches the forward mesh
    fields: list         # Psi at each time
    psi: GridField
    sources: tuple = ()


# ---------------------------------------------------------------------------
# sparse assembly


def interleave(values: np.ndarray) -> np.ndarray:
    m = values.shape[0]
    return values.reshape(m, -1).T.ravel()


def deinterleave(vec: np.ndarray, m: int, shape: tuple) -> np.ndarray:
    return vec.reshape(-1, m).T.reshape((m,) + tuple(shape))


def block_diagonal(blocks: np.ndarray) -> sp.csr_matrix:
    """Sparse block diagonal from pointwise blocks of shape (m, m, *S)."""
    m = blocks.shape[0]
    b = blocks.reshape(m, m, -1).transpose(2, 0, 1)
    n = b.shape[0]
    return sp.bsr_matrix((np.ascontiguousarray(b), np.arange(n), np.arange(n + 1)),
                         shape=(n * m, n * m)).tocsr()


def stencil_operator(grid: Grid, bc: str, m: int) -> sp.csr_matrix:
    return sp.csr_matrix(sp.kron(laplacian_matrix(grid, bc), sp.identity(m)))


def _solve(mat: sp.spmatrix, rhs: np.ndarray, grid: Grid, m: int, method: str) -> np.ndarray:
    if grid.dim == 1:
        bw = 2 * m - 1
        coo = mat.tocoo()
        ab = np.zeros((2 * bw + 1, mat.shape[1]))
        ab[bw + coo.row - coo.col, coo.col] += coo.data
        try:
            out = solve_banded((bw, bw), ab, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise LinearSolveFailed(str(exc)) from exc
    else:
        out = None
        mat = mat.tocsc()
        if method == "cg":
            normal = (mat.T @ mat).tocsr()
            diag = normal.diagonal()
            prec = spla.LinearOperator(normal.shape, matvec=lambda x: x / diag)
            x, info = spla.cg(normal, mat.T @ rhs, rtol=1e-11, atol=0.0, M=prec,
                              maxiter=20 * mat.shape[0])
            if info == 0:
                out = x
        if out is None:
            try:
                out = spla.splu(mat).solve(rhs)
            except RuntimeError as exc:
                raise LinearSolveFailed(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise LinearSolveFailed("linear solve produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# forward integration


def _diffusion_jacobian(model: DiffusionModel, v: np.ndarray) -> np.ndarray:
    if model.approx_jacobian:
        m = v.shape[0]
        flat = v.reshape(m, -1)
        return fd_jacobian(model.P, flat).reshape((m, m) + v.shape[1:])
    return model.A(v)


def step_implicit(u: GridField, dt: float, model: DiffusionModel, reaction: ReactionModel,
                  controls: SolverControls) -> tuple[GridField, StepDiagnostics]:
    """One backward-Euler step: solve v - dt Lap P(v) - dt f(v) = u by damped Newton."""
    if u.m != model.m or reaction.m != model.m:
        raise ValueError("component counts of field, model and reaction differ")
    grid, bc, m = u.grid, u.bc, u.m
    L = stencil_operator(grid, bc, m)
    eye = sp.identity(grid.size * m, format="csr")
    u0 = u.values

    def residual(v):
        return v - dt * laplacian_values(model.P(v), grid, bc) - dt * reaction.f(v) - u0

    tol = controls.tolerance(float(np.max(np.abs(u0))))
    v = u0.copy()
    r = residual(v)
    rn = float(np.max(np.abs(r)))
    history = [rn]
    it = 0
    while rn > tol:
        if it >= controls.max_iter:
            raise NewtonDiverged(f"no convergence after {it} iterations, residual {rn:.3e}")
        J = eye - dt * (L @ block_diagonal(_diffusion_jacobian(model, v))) \
            - dt * block_diagonal(reaction.f_u(v))
        delta = deinterleave(_solve(J, -interleave(r), grid, m, controls.linear_solver),
                             m, grid.shape)
        step = 1.0
        for _ in range(12):
            trial = v + step * delta
            rt = residual(trial)
            rtn = float(np.max(np.abs(rt)))
            if np.isfinite(rtn) and rtn < (1.0 - 1e-4 * step) * rn:
                break
            step *= 0.5
        else:
            raise NewtonDiverged(f"line search failed at iteration {it}, residual {rn:.3e}")
        v, r, rn = trial, rt, rtn
        history.append(rn)
        it += 1
    if not np.all(np.isfinite(v)):
        raise NonFiniteState("non-finite state after Newton solve")
    return u.with_values(v), StepDiagnostics(it, rn, dt, 1, history)


def _advance(u, dt, model, reaction, controls, depth):
    try:
        return step_implicit(u, dt, model, reaction, controls)
    except (NewtonDiverged, LinearSolveFailed):
        if depth >= controls.max_halvings:
            raise
    half = 0.5 * dt
    mid, d1 = _advance(u, half, model, reaction, controls, depth + 1)
    out, d2 = _advance(mid, half, model, reaction, controls, depth + 1)
    return out, StepDiagnostics(d1.iterations + d2.iterations, max(d1.residual, d2.residual),
                                min(d1.dt_used, d2.dt_used), d1.substeps + d2.substeps,
                                d1.history + d2.history)


def run_forward(model: DiffusionModel, reaction: ReactionModel, u0: GridField,
                controls: SolverControls) -> Trajectory:
    """Integrate to ``controls.T``; a step whose Newton solve fails is retried as two
    half steps (recursively, up to ``max_halvings``) so the snapshot mesh is fixed."""
    if not np.all(np.isfinite(u0.values)):
        raise NonFiniteState("initial datum is not finite")
    n = controls.steps
    dt = controls.dt
    u = u0
    times, fields, diags = [0.0], [u0], []
    for j in range(1, n + 1):
        u, d = _advance(u, dt, model, reaction, controls, 0)
        diags.append(d)
        if j % controls.stride == 0 or j == n:
            times.append(controls.T if j == n else j * dt)
            fields.append(u)
    return Trajectory(times, fields, diags, model, reaction, controls,
                      meta={"degenerate": not model.regular})


# ---------------------------------------------------------------------------
# dual system


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
GL_NODES = 0.5 * (_GL_NODES + 1.0)
GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def segment_average(fun, ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Gauss-Legendre value of int_0^1 fun(s ua + (1-s) ub) ds."""
    return sum(w * fun(s * ua + (1.0 - s) * ub) for s, w in zip(GL_NODES, GL_WEIGHTS))


@dataclass
class DualCoefficients:
    """Per-step coefficients of the difference w = u_a - u_b.

    Entry j belongs to forward level j+1: w^{j+1} - w^j = dt Lap(A w^{j+1})
    + dt F w^{j+1} + dt Lap(S), where ``A`` averages the two diffusion
    Jacobians along the segment, ``F`` is the segment average of f_u and ``S``
    collects the mismatch of the two diffusion maps.
    """

    A: list
    F: list
    S: list
    dt: list


def _check_mesh(traj_a: Trajectory, traj_b: Trajectory) -> None:
    if traj_a.grid != traj_b.grid or traj_a.bc != traj_b.bc:
        raise MeshMismatch("trajectories live on different grids or boundary conditions")
    if len(traj_a.times) != len(traj_b.times) or not np.array_equal(traj_a.times, traj_b.times):
        raise MeshMismatch("trajectories have different time meshes")


def dual_coefficients(traj_a: Trajectory, traj_b: Trajectory,
                      reaction: ReactionModel) -> DualCoefficients:
    _check_mesh(traj_a, traj_b)
    ma, mb = traj_a.model, traj_b.model
    out = DualCoefficients([], [], [], [])
    for j in range(1, len(traj_a.times)):
        ua, ub = traj_a.fields[j].values, traj_b.fields[j].values
        Abar = 0.5 * (segment_average(ma.A, ua, ub) + segment_average(mb.A, ua, ub))
        out.A.append(Abar)
        out.F.append(segment_average(reaction.f_u, ua, ub))
        out.S.append(0.5 * (ma.P(ub) - mb.P(ub) + ma.P(ua) - mb.P(ua)))
        out.dt.append(traj_a.times[j] - traj_a.times[j - 1])
    return out


def dual_backward(psi: GridField, coeffs: DualCoefficients,
                  controls: SolverControls | None = None) -> list:
    """Backward sweep (I - dt (A^T Lap + F^T)) Psi^j = Psi^{j+1}; returns Psi^0..Psi^J."""
    grid, bc, m = psi.grid, psi.bc, psi.m
    method = controls.linear_solver if controls is not None else "direct"
    L = stencil_operator(grid, bc, m)
    eye = sp.identity(grid.size * m, format="csr")
    J = len(coeffs.A)
    out = [None] * (J + 1)
    out[J] = psi
    cur = interleave(psi.values)
    for j in range(J - 1, -1, -1):
        dt = coeffs.dt[j]
        At = np.swapaxes(coeffs.A[j], 0, 1)
        Ft = np.swapaxes(coeffs.F[j], 0, 1)
        M = eye - dt * (block_diagonal(At) @ L) - dt * block_diagonal(Ft)
        cur = _solve(M, cur, grid, m, method)
        out[j] = psi.with_values(deinterleave(cur, m, grid.shape))
    return out


def solve_dual(traj_a: Trajectory, traj_b: Trajectory, reaction: ReactionModel,
               psi: GridField, controls: SolverControls | None = None) -> DualTrajectory:
    _check_mesh(traj_a, traj_b)
    if psi.grid != traj_a.grid or psi.m != traj_a.fields[0].m:
        raise MeshMismatch("terminal datum does not match the trajectories")
    coeffs = dual_coefficients(traj_a, traj_b, reaction)
    fields = dual_backward(psi, coeffs, controls)
    return DualTrajectory(list(traj_a.times), fields, psi, (traj_a.meta, traj_b.meta))


def linearized_forward(w0: GridField, coeffs: DualCoefficients,
                       controls: SolverControls | None = None) -> list:
    """March w^{j+1} - dt Lap(A w^{j+1}) - dt F w^{j+1} = w^j + dt Lap(S^{j+1})."""
    grid, bc, m = w0.grid, w0.bc, w0.m
    method = controls.linear_solver if controls is not None else "direct"
    L = stencil_operator(grid, bc, m)
    eye = sp.identity(grid.size * m, format="csr")
    out = [w0]
    cur = w0.values
    for j in range(len(coeffs.A)):
        dt = coeffs.dt[j]
        M = eye - dt * (L @ block_diagonal(coeffs.A[j])) - dt * block_diagonal(coeffs.F[j])
        rhs = cur + dt * laplacian_values(coeffs.S[j], grid, bc)
        cur = deinterleave(_solve(M, interleave(rhs), grid, m, method), m, grid.shape)
        out.append(w0.with_values(cur))
    return out


# ---------------------------------------------------------------------------
# persistence


def save_trajectory(traj: Trajectory, directory) -> Path:
    """Snapshots as ``snap_XXXXX.xdf`` plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for j, f in enumerate(traj.fields):
        name = f"snap_{j:05d}.xdf"
        save_field(f, d / name)
        names.append(name)
    manifest = {
        "model": traj.model.describe() if traj.model is not None else None,
        "reaction": traj.reaction.describe() if traj.reaction is not None else None,
        "controls": asdict(traj.controls) if traj.controls is not None else None,
        "grid": traj.grid.describe(),
        "times": [float(t) for t in traj.times],
        "snapshots": names,
        "diagnostics": [
            {"iterations": s.iterations, "residual": s.residual, "dt_used": s.dt_used,
             "substeps": s.substeps}
            for s in traj.diagnostics
        ],
        "meta": traj.meta,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return d


def load_trajectory(directory) -> Trajectory:
    """Read a saved trajectory; model and reaction evaluators are not restored."""
    d = Path(directory)
    man = json.loads((d / "manifest.json").read_text())
    g = man["grid"]
    grid = Grid(tuple(g["shape"]), tuple(g["lengths"]), tuple(g["origin"]))
    fields = [load_field(d / name, grid) for name in man["snapshots"]]
    diags = [StepDiagnostics(x["iterations"], x["residual"], x["dt_used"], x["substeps"])
             for x in man["diagnostics"]]
    controls = SolverControls(**man["controls"]) if man["controls"] else None
    meta = dict(man.get("meta") or {})
    meta.update(model=man["model"], reaction=man["reaction"])
    return Trajectory(man["times"], fields, diags, None, None, controls, meta)
