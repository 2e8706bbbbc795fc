"""Command-line front end.

Subcommands: simulate | optimal | global-opt | diagram | sweep | validate.
Configuration comes from a JSON file (--config) with per-command defaults;
command-line flags override config values. Every run writes plot-ready CSV
files plus a manifest.json that reproduces it (config echo, seed, version,
checksums).

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 I/O
failure.
"""
import argparse
import json
import math
import os
import sys

import numpy as np

from . import kernels
from .errors import (CatalogError, ConfigError, DivergedTrajectoryError,
                     EmptyBinError, EntlabError, NoSolutionError,
                     TrajectoryAbortError, ZeroNormError)
from .io import ManifestWriter, load_config, validate_config
from .params import SimParams

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

THREADS_ENV = "ENTLAB_THREADS"

_NUMERICAL_ERRORS = (TrajectoryAbortError, DivergedTrajectoryError,
                     NoSolutionError, ZeroNormError)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        return args.func(args, config)
    except (ConfigError, CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EntlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="entlab",
        description="Entanglement dynamics of a noisy monitored two-qubit pair.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="64-bit RNG seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--backend", choices=("kraus", "sde"))
        p.add_argument("--threads", type=int,
                       help=f"worker threads (default ${THREADS_ENV} or 1)")

    p = sub.add_parser("simulate", help="ensemble average C^2 vs time")
    common(p)
    p.set_defaults(func=cmd_simulate, schema=SIMULATE_SCHEMA)

    p = sub.add_parser("optimal", help="most probable trajectory to a boundary condition")
    common(p)
    p.set_defaults(func=cmd_optimal, schema=OPTIMAL_SCHEMA)

    p = sub.add_parser("global-opt", help="global optimum flow, tau sweep and transition")
    common(p)
    p.set_defaults(func=cmd_global_opt, schema=GLOBAL_OPT_SCHEMA)

    p = sub.add_parser("diagram", help="closed-form weak-coupling curves")
    common(p)
    p.add_argument("--paired", help="simulate-output CSV to compare against")
    p.set_defaults(func=cmd_diagram, schema=DIAGRAM_SCHEMA)

    p = sub.add_parser("sweep", help="steady-state entanglement vs noise strength")
    common(p)
    p.set_defaults(func=cmd_sweep, schema=SWEEP_SCHEMA)

    p = sub.add_parser("validate", help="run the structural/physics property suite")
    common(p)
    p.add_argument("--without-sde", action="store_true",
                   help="skip the SDE backend cross-checks")
    p.set_defaults(func=cmd_validate, schema=VALIDATE_SCHEMA)
    return parser


def _resolve_config(args):
    raw = load_config(args.config) if args.config else {}
    config = validate_config(raw, args.schema, args.command)
    if args.seed is not None:
        config["seed"] = int(args.seed)
    if args.backend is not None:
        config["backend"] = args.backend
    if getattr(args, "threads", None) is not None:
        config["threads"] = args.threads
    elif os.environ.get(THREADS_ENV):
        try:
            config["threads"] = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"${THREADS_ENV} is not an integer") from None
    return config


_COMMON = {
    "seed": (int, 1),
    "backend": (str, "kraus"),
    "threads": (int, 1),
    "q0": (list, [0.5, 0.5, 0.5, 0.5]),
}

SIMULATE_SCHEMA = {
    **_COMMON,
    "tau": (float, 0.2),
    "gammas": (list, [0.0, 1.0, 3.0, 10.0]),
    "dt": (float, 0.02),
    "t_final": (float, 30.0),
    "n_traj": (int, 400),
    "dump_trajectories": (bool, False),
}

OPTIMAL_SCHEMA = {
    **_COMMON,
    "tau": (float, 0.2),
    "gamma": (float, 0.01),
    "t_final": (float, 3.0),
    "target": (str, "max"),       # max | min | a concurrence value
    "n_starts": (int, 64),
    "n_candidates": (int, 6),
    "n_perturbations": (int, 64),
}

GLOBAL_OPT_SCHEMA = {
    **_COMMON,
    "taus": (list, [0.3, 0.4, 0.6, 0.7]),
    "t_final": (float, 20.0),
    "detect_transition": (bool, True),
}

DIAGRAM_SCHEMA = {
    **_COMMON,
    "tau": (float, 2.0),
    "gamma": (float, 0.05),
    "t_final": (float, 3.0),
    "dt": (float, 0.01),
}

SWEEP_SCHEMA = {
    **_COMMON,
    "taus": (list, [0.2]),
    "gammas": (list, list(np.logspace(-2, 1, 8))),
    "dt": (float, 0.02),
    "t_final": (float, 30.0),
    "n_traj": (int, 400),
    "burn_in": (float, 15.0),
    "window": (float, 15.0),
}

VALIDATE_SCHEMA = {
    **_COMMON,
    "n_traj": (int, 400),
    "fast": (bool, False),
}


def _gamma_tag(g):
    return f"{g:g}".replace(".", "p").replace("-", "m")


def cmd_simulate(args, config):
    from .ensemble import run_ensemble
    man = ManifestWriter(args.out, "simulate", config, config["seed"])
    q0 = np.asarray(config["q0"], float)
    for gamma in config["gammas"]:
        params = SimParams(tau=config["tau"], gamma=float(gamma), dt=config["dt"],
                           t_final=config["t_final"], n_traj=config["n_traj"],
                           seed=config["seed"])
        res = run_ensemble(q0, params, backend=config["backend"],
                           threads=config["threads"],
                           keep_trajectories=config["dump_trajectories"])
        name = f"c2_vs_time_gamma{_gamma_tag(gamma)}.csv"
        if res.stderr is None:
            man.write_csv(name, ["t", "mean_c2"], [res.times, res.mean_c2])
            man.notes[name] = "stderr column absent: single-trajectory ensemble"
        else:
            man.write_csv(name, ["t", "mean_c2", "stderr"],
                          [res.times, res.mean_c2, res.stderr])
        if config["dump_trajectories"]:
            tname = f"trajectories_gamma{_gamma_tag(gamma)}.csv"
            cols = [res.times] + [res.c2_matrix[k] for k in range(res.n_traj)]
            man.write_csv(tname, ["t"] + [f"c2_traj{k}" for k in range(res.n_traj)], cols)
        if res.n_aborted:
            man.notes[name + ":aborted"] = res.n_aborted
    man.finalize()
    return EXIT_OK


def cmd_optimal(args, config):
    from .extremal import (PhasePoint, classify_extremum, integrate_extremal,
                           shoot_to_boundary)
    from .state import concurrence_sq
    man = ManifestWriter(args.out, "optimal", config, config["seed"])
    params = SimParams(tau=config["tau"], gamma=config["gamma"], dt=0.02,
                       t_final=max(config["t_final"], 1.0), seed=config["seed"])
    q0 = np.asarray(config["q0"], float)
    T = config["t_final"]
    if T == 0.0:
        man.write_csv("optimal_c2.csv", ["t", "c2"], [np.array([0.0]),
                      np.array([concurrence_sq(q0 / np.linalg.norm(q0))])])
        man.write_json("optimal_summary.json",
                       {"action": 0.0, "classification": "most-probable",
                        "note": "zero-length horizon"})
        man.finalize()
        return EXIT_OK
    target = config["target"]
    if target not in ("max", "min"):
        target = ("concurrence", float(target))
    traj = shoot_to_boundary(q0, target, params, T, n_starts=config["n_starts"],
                             seed=config["seed"], n_candidates=config["n_candidates"])
    ts = np.linspace(0.0, T, max(201, int(T * 100) + 1))
    c2 = np.array([concurrence_sq(traj.sol(t)[:4]) for t in ts])
    man.write_csv("optimal_c2.csv", ["t", "c2"], [ts, c2])
    label = classify_extremum(traj, params,
                              n_perturbations=config["n_perturbations"],
                              seed=config["seed"])
    man.write_json("optimal_summary.json", {
        "action": traj.action,
        "classification": label,
        "p0": list(traj.phase_points[0, 4:]),
        "final_state": list(traj.phase_points[-1, :4]),
        "final_c2": float(c2[-1]),
    })
    man.finalize()
    return EXIT_OK


def cmd_global_opt(args, config):
    from .extremal import (classify_global_flow, detect_global_transition,
                           global_optimum_flow)
    from .state import concurrence_sq
    man = ManifestWriter(args.out, "global-opt", config, config["seed"])
    q0 = np.asarray(config["q0"], float)
    T = config["t_final"]
    classes = {}
    for tau in config["taus"]:
        params = SimParams(tau=float(tau), gamma=0.0, dt=0.02, t_final=max(T, 1.0),
                           seed=config["seed"])
        ts = np.linspace(0.0, T, max(2, int(T * 50) + 1))
        _, states = global_optimum_flow(q0, params, T, t_eval=ts)
        c2 = np.array([concurrence_sq(s) for s in states])
        man.write_csv(f"global_opt_tau{_gamma_tag(tau)}.csv", ["t", "c2"], [ts, c2])
        classes[str(tau)] = classify_global_flow(float(tau), q0=q0)
    payload = {"classifications": classes}
    if config["detect_transition"] and len(config["taus"]) >= 2:
        try:
            est, bracket, cl = detect_global_transition(config["taus"], q0=q0)
            payload["transition"] = {"tau_c": est, "bracket": list(bracket)}
        except EntlabError as exc:
            payload["transition"] = {"error": str(exc)}
    man.write_json("global_opt_summary.json", payload)
    man.finalize()
    return EXIT_OK


def cmd_diagram(args, config):
    from .diagram import closed_form_c2, linear_c2
    man = ManifestWriter(args.out, "diagram", config, config["seed"])
    params = SimParams(tau=config["tau"], gamma=config["gamma"], dt=config["dt"],
                       t_final=max(config["t_final"], 1.0), seed=config["seed"])
    ts = np.arange(0.0, config["t_final"] + 0.5 * config["dt"], config["dt"])
    man.write_csv("diagram.csv", ["t", "linear_c2", "closed_form_c2"],
                  [ts, linear_c2(ts, params), closed_form_c2(ts, params)])
    if args.paired:
        dev = _paired_deviation(args.paired, params)
        man.write_json("deviation_report.json", dev)
    man.finalize()
    return EXIT_OK


def _paired_deviation(csv_path, params):
    from .diagram import closed_form_c2, linear_c2
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    if not {"t", "mean_c2", "stderr"} <= set(data.dtype.names or ()):
        raise ConfigError("paired CSV must have columns t, mean_c2, stderr")
    t = data["t"]
    dev = np.abs(data["mean_c2"] - closed_form_c2(t, params))
    lin_dev = np.abs(data["mean_c2"] - linear_c2(t, params))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(data["stderr"] > 0, dev / data["stderr"], np.inf)
    return {
        "max_abs_dev": float(dev.max()),
        "max_z": float(np.nanmax(z)),
        "linear_max_abs_dev": float(lin_dev.max()),
        "closed_form_beats_linear": bool(dev.max() < lin_dev.max()),
    }


def cmd_sweep(args, config):
    from .ensemble import sweep_gamma
    man = ManifestWriter(args.out, "sweep", config, config["seed"])
    if not config["gammas"]:
        raise ConfigError("sweep: empty gamma grid")
    if not config["taus"]:
        raise ConfigError("sweep: empty tau list")
    q0 = np.asarray(config["q0"], float)
    for tau in config["taus"]:
        params = SimParams(tau=float(tau), gamma=1.0, dt=config["dt"],
                           t_final=config["t_final"], n_traj=config["n_traj"],
                           seed=config["seed"])
        sw = sweep_gamma(float(tau), config["gammas"], params,
                         backend=config["backend"], burn_in=config["burn_in"],
                         window=config["window"], q0=q0,
                         threads=config["threads"])
        man.write_csv(f"sweep_tau{_gamma_tag(tau)}.csv",
                      ["gamma", "mean_c", "err_c", "mean_c2", "err_c2"],
                      [sw.gammas, sw.mean_c, sw.err_c, sw.mean_c2, sw.err_c2])
    man.finalize()
    return EXIT_OK


def cmd_validate(args, config):
    man = ManifestWriter(args.out, "validate", config, config["seed"])
    report = run_validation_suite(seed=config["seed"], n_traj=config["n_traj"],
                                  with_sde=not args.without_sde,
                                  fast=config["fast"])
    man.write_json("validation.json", report)
    man.finalize()
    hard_fail = [k for k, v in report["checks"].items()
                 if v.get("hard", True) and not v["passed"]]
    for name, chk in sorted(report["checks"].items()):
        status = "PASS" if chk["passed"] else ("FAIL" if chk.get("hard", True) else "warn")
        print(f"[{status}] {name}: {chk.get('detail', '')}")
    if not report["sde_checked"]:
        print("note: SDE backend checks skipped (kraus-only subset)")
    if hard_fail:
        print(f"{len(hard_fail)} hard check(s) failed", file=sys.stderr)
        return EXIT_VALIDATION
    print("all hard checks passed")
    return EXIT_OK


def run_validation_suite(seed=1, n_traj=400, with_sde=True, fast=False):
    """Machine-readable pass/fail property suite (used by `entlab validate`)."""
    from . import diagram as dg
    from . import extremal as ex
    from . import kraus
    from .ensemble import run_ensemble
    from .state import normalize

    checks = {}

    def record(name, passed, detail, hard=True):
        checks[name] = {"passed": bool(passed), "detail": detail, "hard": hard}

    rng = np.random.default_rng(seed)

    # vertex catalog structure
    try:
        terms = dg.load_vertex_catalog()
        ok = (len(terms) == 127
              and all(t.n_degree <= 6 for t in terms)
              and all(t.m_degree in (1, 2) for t in terms))
        record("catalog_structure", ok, f"{len(terms)} terms")
    except CatalogError as exc:
        record("catalog_structure", False, str(exc))
        terms = None

    params = SimParams(tau=0.7, gamma=0.0, dt=0.01, t_final=1.0, seed=seed)
    if terms is not None:
        rep0 = dg.catalog_residual_report(100, params, np.random.default_rng(seed))
        record("catalog_residual_gamma0", rep0.max_abs < 1e-10,
               f"max residual {rep0.max_abs:.2e} at gamma=0")
        rep1 = dg.catalog_residual_report(
            100, params.with_(tau=1.0, gamma=1.7), np.random.default_rng(seed))
        record("catalog_residual_tau1", rep1.max_abs < 1e-10,
               f"max residual {rep1.max_abs:.2e} at tau=1")
        repg = dg.catalog_residual_report(
            100, params.with_(tau=2.0, gamma=1.0), np.random.default_rng(seed))
        record("catalog_residual_generic", True,
               f"reported floor rms {repg.rms:.3e} at tau=2, gamma=1 "
               "(printed noise couplings carry an extra 1/tau)", hard=False)

    # propagator identities
    pp = SimParams(tau=1.3, gamma=0.4, dt=0.01, t_final=1.0, seed=seed)
    semi = 0.0
    for _ in range(20):
        t1, t2 = rng.uniform(0.05, 2.0, 2)
        semi = max(semi, np.max(np.abs(
            dg.free_propagator(t1 + t2, pp).matrix
            - dg.free_propagator(t1, pp).matrix @ dg.free_propagator(t2, pp).matrix)))
    record("propagator_semigroup", semi < 1e-12, f"max defect {semi:.2e}")
    q0 = np.full(4, 0.5)
    contr = max(abs(4.0 * (lambda q: q[0] * q[3] - q[2] * q[1])(
        dg.free_propagator(t, pp).matrix @ q0) ** 2 - dg.linear_c2(t, pp))
        for t in np.linspace(0.01, 3.0, 50))
    record("propagator_contraction", contr < 1e-12, f"max defect {contr:.2e}")

    # extremal-system properties
    drift_max = 0.0
    n_int = 5 if fast else 20
    n_done = n_diverged = 0
    epar = SimParams(tau=1.0, gamma=0.5, dt=0.02, t_final=1.0, seed=seed)
    while n_done < n_int and n_diverged < 10 * n_int:
        q = normalize(rng.standard_normal(4))
        p = rng.uniform(-0.25, 0.25, 4)
        try:
            traj = ex.integrate_extremal(ex.PhasePoint(q, p), epar, 3.0)
        except ex.DivergedTrajectoryError:
            n_diverged += 1  # finite-time blow-up is a feature of the flow
            continue
        h = [ex.hamiltonian(ex.PhasePoint(r[:4], r[4:]), epar)
             for r in traj.phase_points]
        drift_max = max(drift_max, float(np.max(np.abs(np.array(h) - h[0]))))
        n_done += 1
    record("hamiltonian_conservation", n_done == n_int and drift_max < 1e-8,
           f"max drift {drift_max:.2e} over {n_done} integrations "
           f"({n_diverged} diverged draws skipped)")

    grad_max = 0.0
    for _ in range(20 if fast else 100):
        q = normalize(rng.standard_normal(4))
        p = rng.uniform(-1.0, 1.0, 4)
        x = ex.PhasePoint(q, p)
        s = ex.optimal_controls(x, epar)
        h = 1e-6
        for name_, ds in (("epsilon", h), ("lam", h)):
            import dataclasses
            sp = dataclasses.replace(s, **{name_: getattr(s, name_) + ds})
            sm = dataclasses.replace(s, **{name_: getattr(s, name_) - ds})
            g = (ex.stochastic_hamiltonian(x, sp, epar)
                 - ex.stochastic_hamiltonian(x, sm, epar)) / (2 * h)
            grad_max = max(grad_max, abs(g))
    record("control_stationarity", grad_max < 1e-6,
           f"max |dH/d(noise controls)| {grad_max:.2e}")

    # kraus determinism
    kp = SimParams(tau=0.5, gamma=1.0, dt=0.02, t_final=2.0, seed=seed)
    r1 = kraus.simulate_trajectory(q0, kp, 3)
    r2 = kraus.simulate_trajectory(q0, kp, 3)
    record("kraus_determinism",
           np.array_equal(r1.states, r2.states), "bit-identical replay")

    # backend cross-validation
    sde_checked = False
    if with_sde:
        n = 200 if fast else max(400, n_traj)
        cpar = SimParams(tau=2.0, gamma=0.1, dt=0.01, t_final=2.0,
                         n_traj=n, seed=seed)
        ek = run_ensemble(q0, cpar, backend="kraus")
        # independent streams: the z-statistic assumes independent ensembles
        es = run_ensemble(q0, cpar.with_(seed=seed + 7_777_777), backend="sde")
        z = np.abs(ek.mean_c2 - es.mean_c2) / np.sqrt(ek.stderr ** 2 + es.stderr ** 2 + 1e-300)
        # the first few steps are excluded: there the integrator's one-step
        # bias is divided by a vanishing ensemble variance, so z diverges at
        # any step size while the absolute deviation is ~1e-5
        sel = ek.times >= 0.1
        record("backend_agreement", float(np.nanmax(z[sel])) < 4.0,
               f"max z {np.nanmax(z[sel]):.2f} over {n} trajectories (t >= 0.1)")
        sde_checked = True

    return {"checks": checks, "sde_checked": sde_checked,
            "kernel_backend": kernels.backend_name()}


if __name__ == "__main__":
    sys.exit(main())
