"""Scenario orchestration behind the CLI and the service."""

from __future__ import annotations

import math
import os

import numpy as np

from . import experiments, shrinker
from .config import ExperimentConfig
from .driver import run_flow
from .errors import LabError
from .grids import field_from_callable, make_grid
from .hermite import hermite_eval
from .io import config_hash, write_csv, write_dat, write_json
from .modes import centering
from .normal_form import classify, profile_residual, remainder_decay
from .rmcf import FlowDiagnostics, SolverConfig, initial_state, l2_decay_probe, profile_state
from .rotational import (
    RotationalGraph,
    arrival_time_from_graph_flow,
    evolve_aag,
    evolve_meridians,
    make_torus,
    second_difference_probe,
    squeeze_perturbation,
)


def set_thread_cap():
    cap = os.environ.get("LAB_THREADS")
    if cap:
        try:
            import numba

            numba.set_num_threads(max(1, min(int(cap), numba.get_num_threads())))
        except Exception:
            pass


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config": config_hash(cfg.text), "seed": cfg.seed}


def _named_initial(cfg: ExperimentConfig, spec, K, nodes, t0):
    family = cfg.get("init.family", "profile")
    eps = float(cfg.get("init.eps", 0.0))
    active = cfg.get("init.active", list(range(1, spec.k + 1)))
    if isinstance(active, int):
        active = [active]
    active = tuple(int(a) - 1 for a in active)
    if family == "profile":
        extra = None
        flat = [i for i in range(spec.k) if i not in active]
        if eps and flat:
            i = flat[0]

            def extra(*ms):
                return eps * (ms[i] ** 2 - 2.0)

        return profile_state(spec, active, t0, K, nodes, extra=extra), active
    if family == "quadratic":
        def u0(*ms):
            out = 0.0
            for i in active:
                out = out + (spec.rho / (4.0 * t0)) * (ms[i] ** 2 - 2.0)
            return out

        st = initial_state(spec, K * math.sqrt(t0), nodes, u0=u0, t0=t0)
        return st, active
    if family == "mode":
        m = int(cfg.get("init.mode", 2))
        amp = float(cfg.get("init.amplitude", 1e-4))
        st = initial_state(
            spec, float(cfg.get("grid.radius", 10.0)), nodes,
            u0=lambda *ms: amp * hermite_eval(m, ms[0]), t0=t0,
        )
        return st, active
    raise LabError(f"unknown init.family {family!r}")


def run_spectrum(cfg: ExperimentConfig) -> dict:
    spec = cfg.shrinker()
    rows = shrinker.spectrum_table(spec)
    table = [{"eigenvalue": ev, "eigenfunctions": labels} for ev, labels in rows]
    # the (m, j) grid up to modest degree
    grid = [
        {"m": m, "j": j, "eigenvalue": shrinker.mode_eigenvalue(spec, shrinker.ModeIndex((m,) + (0,) * (spec.k - 1), j))}
        for m in range(0, 5)
        for j in range(0, 3)
    ]
    report = {
        "n": spec.n,
        "k": spec.k,
        "rho": spec.rho,
        "table": table,
        "modes": grid,
        "gaussian_sphere_factor": shrinker.gaussian_sphere_factor(spec),
        "entropy": shrinker.f_cylinder(spec),
        "gamma": shrinker.gamma_constant(spec),
    }
    meta = _meta(cfg)
    write_json(os.path.join(cfg.out_dir, "report.json"), report, meta)
    write_dat(
        os.path.join(cfg.out_dir, "spectrum.dat"),
        ([g["m"] for g in grid], [g["j"] for g in grid], [g["eigenvalue"] for g in grid]),
        meta,
    )
    return {"exit": 0, "report": report}


def _flow_common(cfg: ExperimentConfig):
    spec = cfg.shrinker()
    nodes = int(cfg.get("grid.nodes", 512))
    K = float(cfg.get("grid.K", 1.5))
    t0 = float(cfg.get("time.t0", 10.0))
    t1 = float(cfg.get("time.t1", 100.0))
    st, active = _named_initial(cfg, spec, K, nodes, t0)
    boundary = cfg.get("flow.boundary", "profile" if cfg.get("init.family", "profile") == "profile" else "extrapolate")
    solver = SolverConfig(
        nodes=nodes,
        K=K,
        boundary=boundary,
        profile_active=active if boundary == "profile" else (),
        symmetrize=bool(cfg.get("flow.symmetrize", True)),
        c_cfl=float(cfg.get("flow.c_cfl", 0.2)),
    )
    center = {"none": (), "const": ("const",), "const+axis": ("const", "axis")}[
        cfg.get("flow.center", "const")
    ]
    return spec, st, solver, center, t0, t1


def run_flow_scenario(cfg: ExperimentConfig) -> dict:
    spec, st, solver, center, t0, t1 = _flow_common(cfg)
    res = run_flow(st, solver, t1, center=center, keep_states=True,
                   state_stride=int(cfg.get("flow.state_stride", 10)))
    meta = _meta(cfg)
    rows = []
    for s in res.states:
        ms = s.grid.meshes()
        flat = [m.ravel() for m in ms]
        for i in range(0, flat[0].size, max(1, flat[0].size // 2048)):
            rows.append([s.t] + [f[i] for f in flat] + [s.r.ravel()[i]])
    ycols = ",".join(f"y{i+1}" for i in range(spec.k))
    write_csv(os.path.join(cfg.out_dir, "trajectory.csv"), f"t,{ycols},r", rows, meta)
    write_csv(
        os.path.join(cfg.out_dir, "diagnostics.csv"),
        FlowDiagnostics.CSV_HEADER,
        [d.csv_row().split(",") for d in res.diagnostics],
        meta,
    )
    exit_code = 0
    report = {"status": res.status, "t_end": res.final.t if res.final else None}
    t_lo = float(cfg.get("classify.t_lo", max(t1 / 4.0, t0)))
    t_hi = float(cfg.get("classify.t_hi", t1))
    try:
        cls = classify(res.mode_series, spec=spec, window=(t_lo, t_hi))
        report["classification"] = cls.to_dict()
        rd = remainder_decay([s for s in res.states if t_lo <= s.t <= t_hi], cls)
        report["sup_t2_remainder"] = rd["sup_t2_remainder"]
        if cls.verdict == "inconclusive":
            exit_code = 2
    except LabError as exc:
        report["classification_error"] = f"{type(exc).__name__}: {exc}"
        exit_code = 2
    ts = [d.t for d in res.diagnostics if d.t >= t_lo]
    l2s = [d.l2 for d in res.diagnostics if d.t >= t_lo]
    if len(ts) >= 10:
        report["l2_decay"] = l2_decay_probe(ts, l2s)
    write_json(os.path.join(cfg.out_dir, "classification.json"), report, meta)
    times, mats = res.mode_series
    write_dat(
        os.path.join(cfg.out_dir, "modes.dat"),
        (list(times), [float(m[0, 0]) for m in mats]),
        meta,
    )
    return {"exit": exit_code, "report": report}


def run_normalform(cfg: ExperimentConfig) -> dict:
    spec = cfg.shrinker()
    rng = np.random.default_rng(cfg.seed)
    active = tuple(range(spec.k))
    pts = rng.uniform(-3.0, 3.0, size=(100, spec.k))
    ts = rng.uniform(5.0, 50.0, size=100)
    gap_max = 0.0
    res_max = 0.0
    for p, t in zip(pts, ts):
        meshes = tuple(np.array([v]) for v in p)
        out = profile_residual(spec, active, meshes, float(t))
        res_max = max(res_max, float(np.max(np.abs(out["identity_gap"]))))
        from .normal_form import profile_gap_identity

        lhs, rhs = profile_gap_identity(spec, active, meshes, float(t))
        gap_max = max(gap_max, float(np.max(np.abs(lhs - rhs))))
    report = {
        "identity_gap_max": res_max,
        "profile_gap_identity_max": gap_max,
        "n": spec.n,
        "k": spec.k,
    }
    write_json(os.path.join(cfg.out_dir, "report.json"), report, _meta(cfg))
    return {"exit": 0, "report": report}


def run_semigroup(cfg: ExperimentConfig) -> dict:
    from .semigroup import apply_semigroup, smoothing_ratio

    spec = cfg.shrinker()
    g = make_grid(float(cfg.get("grid.radius", 16.0)), int(cfg.get("grid.nodes", 1000)), 1)
    w = np.exp(-g.axes[0] ** 2 / 4.0) * g.h
    eig_err = {}
    for m in range(0, 7):
        f = field_from_callable(lambda y: hermite_eval(m, y), g)
        sf = apply_semigroup(f, 1.0)
        lam = 1.0 - m / 2.0
        ball = np.abs(g.axes[0]) <= 6.0
        err = math.sqrt(float(np.sum((sf.values[ball] - math.exp(lam) * f.values[ball]) ** 2 * w[ball])))
        eig_err[str(m)] = err / math.exp(lam)
    ratios = []
    f0 = field_from_callable(lambda y: hermite_eval(0, y), g)
    for tau in (0.2, 0.5, 1.0, 2.0, 3.0):
        for r in (0.0, 2.0, 4.0, 6.0):
            ratios.append([tau, r, smoothing_ratio(f0, r, 1.0, tau, spec)])
    report = {"eigenrelation_rel_err": eig_err, "smoothing_ratio_max": max(r[2] for r in ratios)}
    meta = _meta(cfg)
    write_json(os.path.join(cfg.out_dir, "report.json"), report, meta)
    write_csv(os.path.join(cfg.out_dir, "smoothing_sweep.csv"), "tau,r,ratio", ratios, meta)
    return {"exit": 0, "report": report}


def run_centering(cfg: ExperimentConfig) -> dict:
    spec = cfg.shrinker()
    d0 = float(cfg.get("centering.shift", 0.01))
    t_ref = float(cfg.get("time.t0", 25.0))
    st = initial_state(
        spec, 8.0, int(cfg.get("grid.nodes", 800)),
        u0=lambda *ms: (spec.rho / (4 * t_ref)) * ((ms[0] + d0) ** 2 - 2.0), t0=t_ref,
    )
    tr, _ = centering(st)
    report = {
        "applied_shift": d0,
        "recovered_translation": list(np.atleast_1d(tr.d)),
        "dilation": tr.lam,
        "relative_error": abs(tr.d[0] + d0) / abs(d0),
    }
    write_json(os.path.join(cfg.out_dir, "report.json"), report, _meta(cfg))
    return {"exit": 0, "report": report}


def run_genericity(cfg: ExperimentConfig) -> dict:
    spec = cfg.shrinker()
    out = experiments.genericity_experiment(
        spec,
        eps=float(cfg.get("init.eps", 1e-3)),
        t0=float(cfg.get("time.t0", 90.0)),
        t_end=float(cfg.get("time.t1", 360.0)),
        nodes=int(cfg.get("grid.nodes", 256)),
        K=float(cfg.get("grid.K", 1.6)),
    )
    meta = _meta(cfg)
    times, mats = out.pop("mode_series")
    write_csv(
        os.path.join(cfg.out_dir, "modes.csv"),
        "t,a11,a22,a12",
        [[t, m[0, 0], m[1, 1], m[0, 1]] for t, m in zip(times, mats)],
        meta,
    )
    report = {k: v for k, v in out.items()}
    report["verdicts"] = {"base": out.get("base_verdict"), "perturbed": out.get("verdict")}
    write_json(os.path.join(cfg.out_dir, "report.json"), report, meta)
    code = 2 if out.get("verdict") == "inconclusive" else 0
    return {"exit": code, "report": report}


def run_stability(cfg: ExperimentConfig) -> dict:
    spec = cfg.shrinker()
    seeds = cfg.get("stability.seeds", [0, 1, 2, 3, 4])
    if isinstance(seeds, int):
        seeds = [seeds]
    out = experiments.stability_experiment(
        spec,
        eps0=float(cfg.get("init.eps", 1e-4)),
        seeds=tuple(int(s) for s in seeds),
        t0=float(cfg.get("time.t0", 20.0)),
        t_end=float(cfg.get("time.t1", 200.0)),
        nodes=int(cfg.get("grid.nodes", 512)),
        K=float(cfg.get("grid.K", 1.5)),
    )
    write_json(os.path.join(cfg.out_dir, "report.json"), out, _meta(cfg))
    code = 0 if out["all_nondegenerate"] else 2
    return {"exit": code, "report": out}


def _aag_profile(cfg: ExperimentConfig, nodes):
    family = cfg.get("init.family", "dumbbell")
    if family == "csv":
        path = cfg.get("init.path")
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=0)
        x, u = data[:, 0], data[:, 1]
        periodic = bool(abs(x[-1] - x[0]) > 0 and np.isclose(u[0], u[-1]))
        return RotationalGraph(x=x, u=u, n=int(cfg.get("shrinker.n", 2)), periodic=False, capped=True)
    n = int(cfg.get("shrinker.n", 2))
    if family == "dumbbell":
        x = np.linspace(0.0, 1.0, nodes, endpoint=False)
        u = 0.5 + 0.3 * np.cos(2.0 * np.pi * x)
        return RotationalGraph(x=x, u=u, n=n, periodic=True, capped=False)
    if family == "sphere":
        R = float(cfg.get("init.radius", 1.0))
        x = np.linspace(-1.05 * R, 1.05 * R, nodes)
        return RotationalGraph(x=x, u=np.sqrt(np.maximum(R * R - x**2, 0.0)), n=n, capped=True)
    raise LabError(f"unknown aag profile family {family!r}")


def run_aag(cfg: ExperimentConfig) -> dict:
    nodes = int(cfg.get("grid.nodes", 512))
    st = _aag_profile(cfg, nodes)
    rep = evolve_aag(st)
    meta = _meta(cfg)
    report = {
        "pinched": rep.get("pinched", False),
        "T_hat": rep.get("T_hat"),
        "events": rep.get("events", []),
        "count": rep.get("count", 0),
        "extrema_bound": rep.get("extrema_bound"),
        "bound_ok": rep.get("bound_ok"),
    }
    write_json(os.path.join(cfg.out_dir, "report.json"), report, meta)
    write_csv(
        os.path.join(cfg.out_dir, "profile.csv"), "x,r",
        [[x, u] for x, u in zip(st.x, st.u)], meta,
    )
    return {"exit": 0, "report": report}


def run_marriage_ring(cfg: ExperimentConfig) -> dict:
    R = float(cfg.get("torus.R", 1.0))
    a = float(cfg.get("torus.a", 0.05))
    eps = float(cfg.get("init.eps", 0.05))
    nodes = int(cfg.get("grid.nodes", 256))
    torus = make_torus(R, a, nodes)
    base = evolve_meridians(torus)
    report = {
        "unsqueezed": {
            "T_first": base["T_first"],
            "spread": base["spread"],
            "spread_rel": base["spread"] / base["T_first"],
            "tie": base["tie"],
        }
    }
    meta = _meta(cfg)
    if eps:
        p = float(cfg.get("init.angle", math.pi / 2.0))
        sq = squeeze_perturbation(torus, p, eps)
        rep = evolve_meridians(sq)
        inside = np.abs(np.angle(np.exp(1j * (rep["first_angles"] - p)))) < float(cfg.get("init.width", 0.6))
        t_out = float(np.nanmax(rep["T"]))
        report["squeezed"] = {
            "T_first": rep["T_first"],
            "first_inside_bump": bool(np.all(inside)),
            "margin": (t_out - rep["T_first"]) / t_out,
            "tie": rep["tie"],
        }
        write_csv(
            os.path.join(cfg.out_dir, "extinction.csv"), "phi,T",
            [[p_, t_] for p_, t_ in zip(sq.phi, rep["T"])], meta,
        )
    write_json(os.path.join(cfg.out_dir, "report.json"), report, meta)
    return {"exit": 0, "report": report}


def run_arrival_time(cfg: ExperimentConfig) -> dict:
    nodes = int(cfg.get("grid.nodes", 512))
    st = _aag_profile(cfg, nodes)
    r_grid = np.linspace(
        float(cfg.get("arrival.r_min", 0.05)),
        float(cfg.get("arrival.r_max", 0.9 * float(np.max(st.u)))),
        int(cfg.get("arrival.r_nodes", 48)),
    )
    fld = arrival_time_from_graph_flow(st, r_grid)
    meta = _meta(cfg)
    rows = []
    for i, xv in enumerate(fld.x):
        for j, rv in enumerate(fld.r):
            if fld.reached[i, j]:
                rows.append([xv, rv, fld.g[i, j]])
    write_csv(os.path.join(cfg.out_dir, "arrival.csv"), "x,r,g", rows, meta)
    # regularity probe along the r-line through the pinch location
    rep = {"columns": len(rows)}
    j_center = int(np.argmin(np.abs(fld.x)))
    col = fld.g[j_center, :]
    try:
        probe = second_difference_probe(col, fld.r, float(np.mean(fld.r)), np.array([0.2, 0.1, 0.05, 0.025]))
        rep["second_differences"] = list(probe["d2"])
        rep["dyadic_variation"] = list(probe["dyadic_variation"])
    except LabError as exc:
        rep["probe_error"] = str(exc)
    write_json(os.path.join(cfg.out_dir, "report.json"), rep, meta)
    return {"exit": 0, "report": rep}


RUNNERS = {
    "spectrum": run_spectrum,
    "flow": run_flow_scenario,
    "normalform": run_normalform,
    "semigroup": run_semigroup,
    "centering": run_centering,
    "genericity": run_genericity,
    "stability": run_stability,
    "aag": run_aag,
    "marriage-ring": run_marriage_ring,
    "arrival-time": run_arrival_time,
}


def run(cfg: ExperimentConfig) -> dict:
    """Execute one scenario; returns {'exit': code, 'report': dict}."""
    set_thread_cap()
    np.random.seed(cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    return RUNNERS[cfg.scenario](cfg)
