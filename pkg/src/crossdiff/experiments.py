"""Scenario runners behind the command line: each takes a resolved config, writes
its artifacts under the output directory and returns the report dictionary."""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from . import cascade as cas
from . import model as mdl
from .config import ExperimentConfig
from .grid import Grid, GridField, integrate, lp_norm
from .monitors import (build_ledger, energy_identity_residual, gronwall_check, holder_transfer,
                       vmo_profile)
from .solver import SolverControls, run_forward, save_trajectory


# ---------------------------------------------------------------------------
# builders


def build_model(cfg: ExperimentConfig):
    m = cfg["model"]
    name = m["name"]
    if name in ("skt_compete", "skt_coop"):
        params = mdl.SktParams(d1=m["d1"], d2=m["d2"], a11=m["a11"], a12=m["a12"],
                               a21=m["a21"], a22=m["a22"], a=tuple(m["a"]), b=tuple(m["b"]),
                               c=tuple(m["c"]))
        model, reaction = mdl.make_skt(params)
    else:
        model, reaction = mdl.preset_model(name, m=m["m"], k=m["k"])
    r = cfg["reaction"]
    if r["name"] != "model":
        reaction = mdl.preset_reaction(r["name"], model.m, r["rate"])
    return model, reaction


def build_grid(cfg: ExperimentConfig, n: int | None = None) -> Grid:
    g = cfg["grid"]
    shape = tuple(g["n"]) if n is None else (n,) * len(g["n"])
    return Grid(shape, tuple(g["lengths"]), tuple(g["origin"]))


def build_controls(cfg: ExperimentConfig, dt: float | None = None, T: float | None = None,
                   stride: int | None = None) -> SolverControls:
    c = dict(cfg["controls"])
    if dt is not None:
        c["dt"] = dt
    if T is not None:
        c["T"] = T
    if stride is not None:
        c["stride"] = stride
    return SolverControls(**c)


def barenblatt(x, t, k: float = 1.0, C: float = 0.1):
    """Source solution of u_t = (u^{k+1})_xx in one dimension."""
    alpha = 1.0 / (k + 2.0)
    kappa = alpha * k / (2.0 * (k + 1.0))
    core = np.maximum(C - kappa * x**2 * t ** (-2.0 * alpha), 0.0)
    return t ** (-alpha) * core ** (1.0 / k)


def _bump(s2):
    return np.where(s2 < 1.0, np.exp(1.0 - 1.0 / np.where(s2 < 1.0, 1.0 - s2, 1.0)), 0.0)


def build_initial(cfg: ExperimentConfig, grid: Grid, m: int) -> GridField:
    ini = cfg["initial"]
    bc = cfg["grid"]["bc"]
    amp = ini["amplitude"]
    X = grid.centers()
    xi = [(x - o) / L for x, o, L in zip(X, grid.origin, grid.lengths)]
    if ini["kind"] == "barenblatt":
        if grid.dim != 1 or m != 1:
            raise ValueError("the Barenblatt datum is scalar and one-dimensional")
        k = cfg["model"]["k"]
        return GridField(grid, amp * barenblatt(X[0], ini["t0"], k, ini["C"]), bc)
    if ini["kind"] == "sine":
        base = np.prod([np.sin(np.pi * s) for s in xi], axis=0)
        vals = np.stack([amp * 0.5**a * base ** (a + 1) for a in range(m)])
        return GridField(grid, vals, bc)
    centres = [(0.35, 0.4), (0.65, 0.6)]
    comps = []
    for a in range(m):
        c = centres[a % 2]
        s2 = sum((s - c[i]) ** 2 for i, s in enumerate(xi)) / 0.3**2
        comps.append(amp * _bump(s2))
    return GridField(grid, np.stack(comps), bc)


def _regularized(model, lam0):
    return mdl.regularize(model, lam0) if lam0 > 0 else model


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _write_csv(path: Path, header: list, rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(x)) if not isinstance(x, str) else x for x in r))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scenarios


def run_single(cfg: ExperimentConfig, out: Path) -> dict:
    base, reaction = build_model(cfg)
    model = _regularized(base, cfg["model"]["lam0"])
    grid = build_grid(cfg)
    u0 = build_initial(cfg, grid, model.m)
    controls = build_controls(cfg)
    traj = run_forward(model, reaction, u0, controls)
    save_trajectory(traj, out / "trajectory")
    ledger = build_ledger(traj, model, reaction, cfg["monitors"]["q1"], cfg["monitors"]["q0"])
    (out / "ledger.csv").write_text(ledger.to_csv())
    verdicts = {"ledger": _verdict(all(s["verdict"] != "fail" for s in ledger.summary()))}
    tables = {"ledger_summary": ledger.summary()}
    if len(traj.fields) >= 3:
        er = energy_identity_residual(traj, model, reaction, ledger)
        tables["energy_residual"] = {"C": er.C, "max_positive": er.max_positive, "E5_0": er.E5_0}
        if not np.any(reaction.f(u0.values)):
            verdicts["energy_residual"] = _verdict(er.max_positive <= 1e-6 * max(er.E5_0, 1e-300))

    oracle = (base.name == "heat" and reaction.name == "zero" and cfg["initial"]["kind"] == "sine"
              and u0.bc == "dirichlet_zero" and model.m == 1)
    if oracle:
        rate = (1.0 + cfg["model"]["lam0"]) * np.pi**2 * sum(1.0 / L**2 for L in grid.lengths)
        exact = u0.values * math.exp(-rate * controls.T)
        err = lp_norm(traj.final.with_values(traj.final.values - exact), 2)
        tables["heat_error"] = {"n": list(grid.shape), "l2_error": err,
                                "tolerance": cfg["monitors"]["error_tol"]}
        verdicts["heat_error"] = _verdict(err <= cfg["monitors"]["error_tol"])
    refine = cfg["monitors"]["refine"]
    if len(refine) >= 3:
        rows = []
        for n in refine:
            g = build_grid(cfg, n)
            tr = run_forward(model, reaction, build_initial(cfg, g, model.m),
                             build_controls(cfg, stride=controls.steps))
            row = {"n": n, "l2_norm": lp_norm(tr.final, 2)}
            if oracle:
                ex = tr.fields[0].values * math.exp(-rate * controls.T)
                row["l2_error"] = lp_norm(tr.final.with_values(tr.final.values - ex), 2)
            rows.append(row)
        q = [r["l2_norm"] for r in rows]
        slopes = [math.log2(abs(q[i] - q[i + 1]) / abs(q[i + 1] - q[i + 2]))
                  for i in range(len(q) - 2)]
        tables["convergence"] = {"rows": rows, "richardson_slopes": slopes}
        verdicts["richardson_slope"] = _verdict(
            all(abs(s - 2.0) <= cfg["monitors"]["slope_tol"] for s in slopes))
        _write_csv(out / "convergence.csv", ["n", "l2_norm"], [[r["n"], r["l2_norm"]] for r in rows])
    return {"verdicts": verdicts, "tables": tables}


def run_barenblatt(cfg: ExperimentConfig, out: Path) -> dict:
    model, reaction = build_model(cfg)
    if model.m != 1 or model.name != "porous_media":
        raise ValueError("the Barenblatt scenario needs the scalar porous medium model")
    k = cfg["model"]["k"]
    ini = cfg["initial"]
    refine = cfg["monitors"]["refine"] or list(cfg["grid"]["n"])
    n0 = refine[0]
    T = cfg["controls"]["T"]
    rows = []
    for n in refine:
        grid = build_grid(cfg, n)
        u0 = build_initial(cfg, grid, 1)
        dt = cfg["controls"]["dt"] * n0 / n
        steps = int(round(T / dt))
        traj = run_forward(model, reaction, u0, build_controls(cfg, dt=T / steps, stride=steps))
        exact = ini["amplitude"] * barenblatt(grid.centers()[0], ini["t0"] + T, k, ini["C"])
        err = lp_norm(traj.final.with_values(traj.final.values - exact), 1)
        m0, m1 = float(integrate(u0)[0]), float(integrate(traj.final)[0])
        rows.append({"n": n, "dt": T / steps, "l1_error": err, "mass_rel": abs(m1 - m0) / abs(m0),
                     "min_value": float(traj.final.values.min())})
        if n == refine[-1]:
            save_trajectory(traj, out / "trajectory")
    errs = [r["l1_error"] for r in rows]
    verdicts = {
        "mass": _verdict(all(r["mass_rel"] <= 1e-8 for r in rows)),
        "l1_monotone": _verdict(all(b < a for a, b in zip(errs, errs[1:]))),
    }
    _write_csv(out / "convergence.csv", ["n", "l1_error", "mass_rel"],
               [[r["n"], r["l1_error"], r["mass_rel"]] for r in rows])
    return {"verdicts": verdicts, "tables": {"convergence": {"rows": rows}}}


def cascade_spec(cfg: ExperimentConfig, base: float | None = None, label: str = "cascade"):
    model, reaction = build_model(cfg)
    grid = build_grid(cfg)
    u0 = build_initial(cfg, grid, model.m)
    c = cfg["cascade"]
    lambdas = cas.geometric_sequence(base or c["base"], c["count"])
    return cas.CascadeSpec(model, reaction, lambdas, u0, build_controls(cfg),
                           r0=c["r0"] if c["r0"] > 0 else None, label=label,
                           q1=cfg["monitors"]["q1"], q0=cfg["monitors"]["q0"])


def _cascade_verdicts(rep, cfg, prefix=""):
    cauchy = cas.cauchy_table(rep, start=cfg["cascade"]["cauchy_start"])
    rep.cauchy = cauchy
    v = {f"{prefix}members_completed": _verdict(all(m.ok for m in rep.members))}
    if cauchy["verdict"] != "skipped":
        v[f"{prefix}cauchy"] = cauchy["verdict"]
    ic = [m.ic_l1 for m in rep.members]
    v[f"{prefix}ic_schedule"] = _verdict(all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(ic, ic[1:])))
    return v


def run_cascade_scenario(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cascade_spec(cfg)
    rep = cas.run_cascade(spec)
    verdicts = _cascade_verdicts(rep, cfg)
    if len(rep.members) >= 3:
        from .monitors import check_uniform_bounds

        ub = check_uniform_bounds([m.ledger for m in rep.members],
                                  cfg["monitors"]["uniform_factor"])
        rep.uniform = ub.to_json()
        verdicts["uniform_bounds"] = ub.verdict
    cas.save_cascade(rep, out / "cascade")
    return {"verdicts": verdicts,
            "tables": {"cauchy": rep.cauchy, "uniform_bounds": rep.uniform,
                       "lambdas": list(spec.lambdas)}}


def _perturbations(u0: GridField, p: float):
    X = u0.grid.centers()
    xi = [(x - o) / L for x, o, L in zip(X, u0.grid.origin, u0.grid.lengths)]
    wave = np.prod([np.cos(2 * np.pi * s) for s in xi], axis=0)
    return {
        "scaled_up": u0 * (1 + p),
        "scaled_down": u0 * (1 - p),
        "wave_plus": u0.with_values(u0.values * (1 + p * wave)),
        "wave_minus": u0.with_values(u0.values * (1 - p * wave)),
    }


def run_gronwall(cfg: ExperimentConfig, out: Path) -> dict:
    base, reaction = build_model(cfg)
    model = _regularized(base, cfg["model"]["lam0"])
    grid = build_grid(cfg)
    u0 = build_initial(cfg, grid, model.m)
    controls = build_controls(cfg)
    traj = run_forward(model, reaction, u0, controls)
    save_trajectory(traj, out / "trajectory")
    ledger = build_ledger(traj, model, reaction, cfg["monitors"]["q1"], cfg["monitors"]["q0"])
    (out / "ledger.csv").write_text(ledger.to_csv())
    y = ledger.E1**2
    fit = gronwall_check(ledger.times, y, fit=True)
    verdicts = {"gronwall_fit": fit.verdict,
                "finite": _verdict(bool(np.all(np.isfinite(traj.final.values))))}
    rows = [[t, yy, e] for t, yy, e in zip(ledger.times, y, fit.envelope(ledger.times, y[0]))]
    _write_csv(out / "gronwall.csv", ["t", "y", "envelope"], rows)
    reruns = {}
    n0 = lp_norm(u0, 2)
    for name, v0 in _perturbations(u0, cfg["monitors"]["perturbation"]).items():
        tr = run_forward(model, reaction, v0, controls)
        lg = build_ledger(tr, model, reaction)
        scale = (n0 / lp_norm(v0, 2)) ** 2
        rep = gronwall_check(lg.times, lg.E1**2 * scale, C=fit.C, K=fit.K, y0=y[0])
        reruns[name] = rep.to_json()
        verdicts[f"rerun_{name}"] = rep.verdict
    return {"verdicts": verdicts,
            "tables": {"gronwall": fit.to_json(), "reruns": reruns,
                       "ledger_summary": ledger.summary()}}


def vmo_radii(cfg: ExperimentConfig, grid: Grid) -> list:
    r = cfg["monitors"]["vmo_radii"]
    if r:
        return sorted(r, reverse=True)
    return [min(grid.lengths) / 4.0, 4.0 * max(grid.h)]


def run_cross(cfg: ExperimentConfig, out: Path) -> dict:
    c = cfg["cascade"]
    spec_a = cascade_spec(cfg, c["base"], "a")
    spec_b = cascade_spec(cfg, c["base_b"], "b")
    cross = cas.cross_uniqueness(spec_a, spec_b, c["factor"], start=c["cauchy_start"])
    verdicts = {}
    for prefix, rep in (("a_", cross.a), ("b_", cross.b)):
        verdicts.update(_cascade_verdicts(rep, cfg, prefix))
        cas.save_cascade(rep, out / prefix.rstrip("_"))
    verdicts.update(cross.checks())
    lim = cross.a.limit
    tables = {"cross": cross.to_json(), "cauchy_a": cross.a.cauchy, "cauchy_b": cross.b.cauchy,
              "lambdas_a": list(spec_a.lambdas), "lambdas_b": list(spec_b.lambdas)}
    if lim.ok:
        radii = vmo_radii(cfg, spec_a.grid)
        prof = vmo_profile(lim.traj, radii, model=spec_a.model)[0]
        tables["vmo"] = prof.to_json()
        tables["vmo"]["transfer"] = holder_transfer(prof, spec_a.model.holder_exp or 1.0,
                                                    spec_a.model.holder_const)
        thr = cfg["monitors"]["vmo_threshold"]
        if thr > 0:
            verdicts["vmo_decay"] = _verdict(prof.decay <= thr)
        _write_csv(out / "oscillation.csv", ["R", "osc_u", "osc_U"],
                   zip(prof.u.radii, prof.u.values, prof.U.values))
    _write_csv(out / "cross.csv", ["k", "lambda_a", "lambda_b", "cross"],
               [[k, spec_a.lambdas[k], spec_b.lambdas[k], d] for k, d in enumerate(cross.cross)])
    return {"verdicts": verdicts, "tables": tables}


def structure_checks(cfg: ExperimentConfig) -> dict:
    model, reaction = build_model(cfg)
    s = cfg["structure"]
    domain = "quadrant" if model.domain == "quadrant" else "box"
    sampler = mdl.Sampler(domain, s["lo"], s["hi"], s["samples"], s["directions"], s["tol"],
                          cfg["seed"])
    reports = {
        "jacobian_P": mdl.check_jacobian(model, sampler),
        "jacobian_f": mdl.check_reaction_jacobian(reaction, sampler),
        "ellipticity": mdl.check_ellipticity(model, sampler),
        "reaction": mdl.check_reaction_growth(reaction, model, sampler),
    }
    if model.holder_exp is not None:
        reports["holder_inverse"] = mdl.check_holder_inverse(model, sampler)
    tables = {k: r.to_json() for k, r in reports.items()}
    verdicts = {}
    for r in reports.values():
        for c in r.results:
            verdicts[c.condition] = c.verdict
    if model.name == "skt":
        p = dataclasses.replace(mdl.SktParams(), **{k: v for k, v in model.params.items()
                                                   if k in {f.name for f in dataclasses.fields(mdl.SktParams)}})
        adm = mdl.check_skt_admissible(p)
        tables["skt_admissible"] = adm.to_json()
        verdicts["skt_admissible"] = adm.verdict
        tables["c_alpha"] = model.params["c_alpha"]
    return {"verdicts": verdicts, "tables": tables}


def run_structure(cfg: ExperimentConfig, out: Path) -> dict:
    return structure_checks(cfg)


RUNNERS = {
    "single": run_single,
    "barenblatt": run_barenblatt,
    "cascade": run_cascade_scenario,
    "gronwall": run_gronwall,
    "cross": run_cross,
    "structure": run_structure,
}
