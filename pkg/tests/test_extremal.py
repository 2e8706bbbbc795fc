import dataclasses
import math

import numpy as np
import pytest

from entlab import extremal as ex
from entlab.errors import EntlabError, NoSolutionError
from entlab.params import SimParams
from entlab.state import concurrence_sq, normalize

Q0 = np.full(4, 0.5)


def params(**kw):
    base = dict(tau=1.0, gamma=0.5, dt=0.02, t_final=1.0, seed=1)
    base.update(kw)
    return SimParams(**base)


def random_point(rng, p_scale=1.0):
    return ex.PhasePoint(normalize(rng.standard_normal(4)),
                         rng.uniform(-p_scale, p_scale, 4))


# --------------------------------------------------------------- controls & H

def test_controls_at_zero_momentum_are_mean_values():
    p = params(tau=0.4, gamma=2.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        q = normalize(rng.standard_normal(4))
        s = ex.optimal_controls(ex.PhasePoint(q, np.zeros(4)), p)
        a, c, al, g = q
        assert s.lam == 0.0 and s.epsilon == 0.0
        assert abs(s.r - (1 - 2 * al * al - 2 * g * g)) < 1e-14
        assert abs(s.w - (1 - 2 * c * c - 2 * g * g)) < 1e-14
    s0 = ex.optimal_controls(ex.PhasePoint(Q0, np.zeros(4)), p)
    assert s0.r == 0.0 and s0.w == 0.0


def test_control_example_unit_momentum():
    # p = (1, 0, 0, 0) at the symmetric state: lambda = -Gamma c p_a = -Gamma/2
    p = params(gamma=0.8)
    s = ex.optimal_controls(ex.PhasePoint(Q0, np.array([1.0, 0, 0, 0])), p)
    assert abs(s.lam - (-p.gamma * 0.5)) < 1e-15
    assert abs(s.epsilon - (-p.gamma * 0.5)) < 1e-15


def test_controls_scale_linearly_with_gamma():
    rng = np.random.default_rng(1)
    x = random_point(rng)
    s1 = ex.optimal_controls(x, params(gamma=1.0))
    s10 = ex.optimal_controls(x, params(gamma=10.0))
    assert abs(s10.lam - 10 * s1.lam) < 1e-12
    assert abs(s10.epsilon - 10 * s1.epsilon) < 1e-12


def test_hamiltonian_reference_value():
    # at p = 0, s = 0 and the symmetric state only the readout-likelihood
    # term survives; with the sign that generates the printed extremal
    # equations it evaluates to -1/tau
    p = params(tau=0.5, gamma=0.3)
    s = ex.StochasticControls(0.0, 0.0, 0.0, 0.0)
    h = ex.stochastic_hamiltonian(ex.PhasePoint(Q0, np.zeros(4)), s, p)
    assert abs(h - (-1.0 / p.tau)) < 1e-15


def test_hamiltonian_gamma_zero_rules():
    p = params(gamma=0.0)
    x = ex.PhasePoint(Q0, np.zeros(4))
    ok = ex.stochastic_hamiltonian(x, ex.StochasticControls(0.1, -0.2, 0.0, 0.0), p)
    assert np.isfinite(ok)
    with pytest.raises(EntlabError):
        ex.stochastic_hamiltonian(x, ex.StochasticControls(0.0, 0.0, 0.3, 0.0), p)


def test_substituted_hamiltonian_consistency():
    p = params(tau=0.7, gamma=1.3)
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = random_point(rng)
        s = ex.optimal_controls(x, p)
        assert abs(ex.stochastic_hamiltonian(x, s, p) - ex.hamiltonian(x, p)) < 1e-12


def test_gradient_stationarity_all_controls():
    # central finite differences of H in each control vanish at the optimum
    p = params(tau=0.6, gamma=0.9)
    rng = np.random.default_rng(3)
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        x = random_point(rng)
        s = ex.optimal_controls(x, p)
        for name in ("r", "w", "epsilon", "lam"):
            sp = dataclasses.replace(s, **{name: getattr(s, name) + h})
            sm = dataclasses.replace(s, **{name: getattr(s, name) - h})
            g = (ex.stochastic_hamiltonian(x, sp, p)
                 - ex.stochastic_hamiltonian(x, sm, p)) / (2 * h)
            worst = max(worst, abs(g))
    assert worst < 1e-6


def test_control_solve_reproduces_closed_form():
    # numerically solving dH/dlambda = 0 lands on the closed-form control
    p = params(gamma=0.7)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = random_point(rng)
        s = ex.optimal_controls(x, p)

        def dhdl(lam):
            sp = dataclasses.replace(s, lam=lam + 1e-7)
            sm = dataclasses.replace(s, lam=lam - 1e-7)
            return (ex.stochastic_hamiltonian(x, sp, p)
                    - ex.stochastic_hamiltonian(x, sm, p)) / 2e-7

        from scipy.optimize import brentq
        root = brentq(dhdl, s.lam - 5, s.lam + 5)
        assert abs(root - s.lam) < 1e-8


# ------------------------------------------------------------------ phase flow

def _printed_momentum_flow(x, p):
    """Verbatim transcription of the printed extremal momentum equations."""
    a, c, al, g = x.q
    pa, pc, pal, pg = x.p
    tau = p.tau
    s = ex.optimal_controls(x, p)
    r, w, eps, lam = s.r, s.w, s.epsilon, s.lam
    pa_dot = -(1 / tau) * (c**2 * pa * w + pa * r * al**2 + pa * r * g**2
                           + pa * g**2 * w + tau * pal * eps + tau * pc * lam)
    pc_dot = (1 / tau) * (-2 * a * c * pa * w - 2 * c * pal * al * w
                          - 2 * c * pg * g * w - 3 * c**2 * pc * w + 4 * c * w
                          + tau * pal + tau * pa * lam - pc * r * al**2
                          - pc * r * g**2 - pc * g**2 * w + pc * w - tau * pg * eps)
    pal_dot = (1 / tau) * (-2 * a * pa * r * al - c**2 * pal * w
                           - 2 * c * pc * r * al - tau * pc - 3 * pal * r * al**2
                           - pal * r * g**2 + pal * r - pal * g**2 * w
                           + tau * pa * eps - 2 * pg * r * al * g - tau * pg * lam
                           + 4 * r * al)
    pg_dot = (1 / tau) * (-2 * a * pa * r * g - 2 * a * pa * g * w
                          - 2 * c * pc * r * g - 2 * c * pc * g * w
                          - c**2 * pg * w - 2 * pal * r * al * g + tau * pal * lam
                          - 2 * pal * al * g * w - pg * r * al**2
                          - 3 * pg * r * g**2 + pg * r - 3 * pg * g**2 * w
                          + pg * w + tau * pc * eps + 4 * r * g + 4 * g * w)
    return np.array([pa_dot, pc_dot, pal_dot, pg_dot])


def test_phase_flow_matches_printed_equations():
    p = params(tau=0.7, gamma=1.1)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = random_point(rng, p_scale=2.0)
        _, pdot = ex.phase_flow(x, p)
        assert np.allclose(pdot, _printed_momentum_flow(x, p), atol=1e-10)


def test_phase_flow_is_hamiltonian():
    # finite-difference gradient of H* against the analytic vector field
    p = params(tau=0.8, gamma=0.6)
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(30):
        x = random_point(rng)
        y = x.as_vector()
        grad = np.zeros(8)
        for i in range(8):
            yp, ym = y.copy(), y.copy()
            yp[i] += h
            ym[i] -= h
            grad[i] = (ex.hamiltonian(ex.PhasePoint(yp[:4], yp[4:]), p)
                       - ex.hamiltonian(ex.PhasePoint(ym[:4], ym[4:]), p)) / (2 * h)
        qdot, pdot = ex.phase_flow(x, p)
        assert np.max(np.abs(qdot - grad[4:])) < 1e-8
        assert np.max(np.abs(pdot + grad[:4])) < 1e-8


def test_momentum_free_slice():
    # dq/dt at p = 0 is the global-optimum field; dp/dt does not vanish in
    # general (its exact residual is the mean-readout-likelihood gradient)
    p = params(tau=0.4, gamma=2.0)
    rng = np.random.default_rng(7)
    for _ in range(30):
        q = normalize(rng.standard_normal(4))
        qdot, pdot = ex.phase_flow(ex.PhasePoint(q, np.zeros(4)), p)
        f0, fr, fw, _, _, rbar, wbar = ex._fields(q, p.tau)
        assert np.allclose(qdot, f0 + rbar * fr + wbar * fw, atol=1e-14)
        a, c, al, g = q
        expect = np.array([0.0,
                           4 * c * wbar,
                           4 * al * rbar,
                           4 * g * (rbar + wbar)]) / p.tau
        assert np.allclose(pdot, expect, atol=1e-13)


def test_gamma_zero_forces_zero_noise_controls():
    p = params(gamma=0.0)
    rng = np.random.default_rng(8)
    x = random_point(rng)
    s = ex.optimal_controls(x, p)
    assert s.lam == 0.0 and s.epsilon == 0.0


# ------------------------------------------------------------- integrations

def test_hamiltonian_conserved_along_flow():
    p = params()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        x0 = random_point(rng, p_scale=0.25)
        traj = ex.integrate_extremal(x0, p, 3.0)
        hs = [ex.hamiltonian(ex.PhasePoint(r[:4], r[4:]), p)
              for r in traj.phase_points]
        worst = max(worst, np.max(np.abs(np.array(hs) - hs[0])))
    assert worst < 1e-8


def test_time_reversal():
    p = params()
    rng = np.random.default_rng(9)
    x0 = random_point(rng, p_scale=0.2)
    fwd = ex.integrate_extremal(x0, p, 3.0)
    xT = ex.PhasePoint(fwd.phase_points[-1, :4], fwd.phase_points[-1, 4:])

    # reverse flow: integrate the sign-flipped vector field
    from scipy.integrate import solve_ivp
    back = solve_ivp(lambda t, y: -ex._flow_vector(y, p.tau, p.gamma)[0],
                     (0.0, 3.0), xT.as_vector(), method="DOP853",
                     rtol=1e-10, atol=1e-12)
    assert np.max(np.abs(back.y[:, -1] - x0.as_vector())) < 1e-6


def test_momentum_gauge_invariance():
    # shifting p along q leaves the state path and the action unchanged
    p = params(tau=0.5, gamma=0.8)
    rng = np.random.default_rng(10)
    q0 = normalize(rng.standard_normal(4))
    pt = rng.uniform(-0.3, 0.3, 4)
    t1 = ex.integrate_extremal(ex.PhasePoint(q0, pt), p, 2.0)
    t2 = ex.integrate_extremal(ex.PhasePoint(q0, pt + 3.7 * q0), p, 2.0)
    ts = np.linspace(0, 2.0, 100)
    dq = max(np.max(np.abs(t1.sol(t)[:4] - t2.sol(t)[:4])) for t in ts)
    assert dq < 1e-8
    assert abs(t1.action - t2.action) < 1e-8


def test_blowup_detection():
    p = params(tau=0.2, gamma=0.01)
    with pytest.raises(ex.DivergedTrajectoryError):
        ex.integrate_extremal(ex.PhasePoint(Q0, np.zeros(4)), p, 3.0)


def test_action_accumulation_matches_quadrature():
    p = params(tau=0.8, gamma=0.4)
    rng = np.random.default_rng(11)
    x0 = random_point(rng, p_scale=0.2)
    traj = ex.integrate_extremal(x0, p, 2.0)
    assert abs(ex.action_along(traj, p) - traj.action) < 1e-6
    # and against the Freidlin-Wentzell quadrature on the state path
    ts = np.linspace(0, 2.0, 2001)
    qpath = np.array([traj.sol(t)[:4] for t in ts])
    assert abs(ex.path_action(ts, qpath, p) - traj.action) < 1e-3


def test_zero_length_action():
    p = params()
    traj = ex.integrate_extremal(ex.PhasePoint(Q0, np.zeros(4)), p, 0.0)
    assert traj.action == 0.0
    assert ex.action_along(traj, p) == 0.0


# ------------------------------------------------------------- global optimum

def test_global_flow_gamma_independent():
    ts = np.linspace(0, 20, 500)
    _, s0 = ex.global_optimum_flow(Q0, params(tau=0.3, gamma=0.0), 20.0, t_eval=ts)
    _, s5 = ex.global_optimum_flow(Q0, params(tau=0.3, gamma=5.0), 20.0, t_eval=ts)
    assert np.max(np.abs(s0 - s5)) < 1e-10


def test_global_flow_norm_preserved():
    ts = np.linspace(0, 30, 400)
    _, states = ex.global_optimum_flow(Q0, params(tau=0.45, gamma=0.0), 30.0,
                                       t_eval=ts)
    assert np.max(np.abs((states ** 2).sum(axis=1) - 1.0)) < 1e-8


def test_global_flow_classifications():
    assert ex.classify_global_flow(0.3) == "saturating"
    assert ex.classify_global_flow(0.7) == "oscillatory"
    assert ex.classify_global_flow(10.0) == "oscillatory"


def test_global_saturation_matches_invariant_circle_value():
    # on the invariant circle c^2 + alpha^2 = 1 the flow reduces to
    # chi' = -1 - sin(4 chi)/(2 tau); its stable fixed point gives the
    # plateau C^2 = (1 - sqrt(1 - 4 tau^2))/2
    for tau in (0.2, 0.3, 0.4):
        sat = ex.global_saturation_value(tau)
        assert abs(sat - 0.5 * (1 - math.sqrt(1 - 4 * tau * tau))) < 1e-4


def test_transition_detection():
    est, bracket, classes = ex.detect_global_transition([0.3, 0.4, 0.6, 0.7])
    assert classes[0.3] == "saturating" and classes[0.4] == "saturating"
    assert classes[0.6] == "oscillatory" and classes[0.7] == "oscillatory"
    assert abs(est - 0.5) <= 0.05
    assert bracket[0] <= 0.5 + 0.05 and bracket[1] >= 0.5 - 0.05


def test_transition_needs_bracket():
    with pytest.raises(EntlabError):
        ex.detect_global_transition([0.6, 0.7, 0.8])


# ---------------------------------------------------------------- shooting

def test_shoot_trivial_zero_horizon():
    p = params()
    traj = ex.shoot_to_boundary(Q0, ("state", Q0), p, 0.0)
    assert traj.action == 0.0


def test_shoot_deterministic_rotation():
    # weak-measurement noise-free limit: the rotation is the only dynamics,
    # so the shot trajectory is the deterministic path with ~zero action
    p = params(tau=1e9, gamma=0.0)
    qf = np.array([0.5, 0.5, -0.5, 0.5])
    traj = ex.shoot_to_boundary(Q0, ("state", qf), p, math.pi / 2, n_starts=8,
                                seed=0)
    assert np.max(np.abs(traj.phase_points[-1, :4] - qf)) < 1e-6
    assert abs(traj.action) < 1e-6
    assert ex.classify_extremum(traj, p, n_perturbations=20, seed=1) == "most-probable"


def test_shoot_no_solution_reports_residual():
    # an unreachable target state in the noiseless weak-measurement limit
    p = params(tau=1e9, gamma=0.0)
    qf = np.array([0.0, 1.0, 0.0, 0.0])
    with pytest.raises(NoSolutionError) as err:
        ex.shoot_to_boundary(Q0, ("state", qf), p, math.pi / 2, n_starts=4,
                             seed=0, n_refine=2)
    assert np.isfinite(err.value.best_residual)
    assert err.value.best_residual > 1e-3


def test_classify_perturbation_amplitude_robustness():
    p = params(tau=1e9, gamma=0.0)
    qf = np.array([0.5, 0.5, -0.5, 0.5])
    traj = ex.shoot_to_boundary(Q0, ("state", qf), p, math.pi / 2, n_starts=4,
                                seed=0)
    a = ex.classify_extremum(traj, p, n_perturbations=16, amplitude=1e-3, seed=2)
    b = ex.classify_extremum(traj, p, n_perturbations=16, amplitude=5e-4, seed=2)
    assert a == b == "most-probable"
