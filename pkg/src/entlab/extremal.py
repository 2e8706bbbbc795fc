"""Optimal-trajectory machinery for the monitored noisy two-qubit system.

The probability functional over quantum trajectories is extremized by an
8-dimensional Hamiltonian flow in (q, p): the four state parameters plus
conjugate momenta. The stochastic Hamiltonian at general control values
s = (r, w, epsilon, lambda) is

    H(q, p, s) = p . F(q, s) - (lambda^2 + epsilon^2) / (2 Gamma)
                 - (1/2 tau) (r^2 + w^2 - 2 r r_bar - 2 w w_bar + 2),

where F is the full state drift (exchange rotation, measurement terms
linear in r and w, local-noise terms linear in epsilon and lambda) and
r_bar = 1 - 2(alpha^2 + gamma^2), w_bar = 1 - 2(c^2 + gamma^2) are the mean
readouts. Stationarity of H in s gives the optimal controls

    lambda* = Gamma p.F_lam     epsilon* = Gamma p.F_eps
    r*      = r_bar + tau p.F_r w*       = w_bar + tau p.F_w

and Hamilton's equations with s = s* give the closed autonomous phase flow.
Because s* is a stationary point, the substituted Hamiltonian

    H*(q, p) = p.F_mean + (tau/2)[(p.F_r)^2 + (p.F_w)^2]
             + (Gamma/2)[(p.F_lam)^2 + (p.F_eps)^2] + V(q),
    V(q)     = (r_bar^2 + w_bar^2 - 2) / (2 tau),

is conserved along every extremal trajectory (F_mean is the drift at the
mean controls, i.e. the global-optimum vector field).

Trajectory probabilities are compared through the path cost functional

    S[q] = int [ (1/2) (qdot - F_mean) . Q(q)^+ (qdot - F_mean) - V(q) ] dt,
    Q    = tau (F_r F_r^T + F_w F_w^T) + Gamma (F_lam F_lam^T + F_eps F_eps^T),

which is >= 0, vanishes only on noiseless deterministic paths, and is larger
for less probable paths. Along an extremal S = int (p.qdot - H*) dt.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .errors import DivergedTrajectoryError, EntlabError, NoSolutionError
from .state import concurrence_sq, normalize, states_with_concurrence

P_BLOWUP = 1.0e6       # |p| beyond this counts as a diverged integration
RTOL, ATOL = 1e-10, 1e-12


@dataclass(frozen=True)
class PhasePoint:
    """State q (unit 4-vector) plus conjugate momenta p."""

    q: np.ndarray
    p: np.ndarray

    def as_vector(self):
        return np.concatenate([self.q, self.p])

    @staticmethod
    def from_vector(x):
        x = np.asarray(x, dtype=float)
        return PhasePoint(x[:4].copy(), x[4:8].copy())


@dataclass(frozen=True)
class StochasticControls:
    """Control values s = (r, w, epsilon, lambda)."""

    r: float
    w: float
    epsilon: float
    lam: float


@dataclass(frozen=True)
class ExtremalTrajectory:
    """An integrated extremal: phase path, controls along it, and its action."""

    times: np.ndarray         # (n,)
    phase_points: np.ndarray  # (n, 8)
    controls: np.ndarray      # (n, 4) columns (r, w, epsilon, lambda)
    action: float             # ODE-accumulated path cost
    sol: object               # dense OdeSolution over [times[0], times[-1]]

    @property
    def states(self):
        return self.phase_points[:, :4]

    @property
    def momenta(self):
        return self.phase_points[:, 4:]


def _fields(q, tau):
    """Drift building blocks at q: (F0, Fr, Fw, Flam, Feps, r_bar, w_bar)."""
    a, c, al, g = q
    m1 = al * al + g * g
    m2 = c * c + g * g
    f0 = np.array([0.0, al, -c, 0.0])
    fr = np.array([a * m1, c * m1, al * (m1 - 1.0), g * (m1 - 1.0)]) / tau
    fw = np.array([a * m2, c * (m2 - 1.0), al * m2, g * (m2 - 1.0)]) / tau
    fl = np.array([-c, a, -g, al])
    fe = np.array([-al, -g, a, c])
    return f0, fr, fw, fl, fe, 1.0 - 2.0 * m1, 1.0 - 2.0 * m2


def optimal_controls(x, params):
    """Stationary controls of H at phase point x (exact, closed form)."""
    q, p = np.asarray(x.q, float), np.asarray(x.p, float)
    _, fr, fw, fl, fe, rbar, wbar = _fields(q, params.tau)
    return StochasticControls(
        r=rbar + params.tau * float(p @ fr),
        w=wbar + params.tau * float(p @ fw),
        epsilon=params.gamma * float(p @ fe),
        lam=params.gamma * float(p @ fl),
    )


def stochastic_hamiltonian(x, s, params):
    """H(q, p, s) at general (not necessarily optimal) controls.

    With gamma = 0 the noise controls must vanish (their cost is otherwise
    undefined); the noise penalty term is then dropped.
    """
    q, p = np.asarray(x.q, float), np.asarray(x.p, float)
    tau, gamma = params.tau, params.gamma
    f0, fr, fw, fl, fe, rbar, wbar = _fields(q, tau)
    drift = f0 + s.r * fr + s.w * fw + s.lam * fl + s.epsilon * fe
    h = float(p @ drift)
    if gamma == 0.0:
        if s.lam != 0.0 or s.epsilon != 0.0:
            raise EntlabError("gamma = 0 admits no unitary-noise controls")
    else:
        h -= (s.lam ** 2 + s.epsilon ** 2) / (2.0 * gamma)
    h -= (s.r ** 2 + s.w ** 2 - 2.0 * s.r * rbar - 2.0 * s.w * wbar + 2.0) / (2.0 * tau)
    return h


def hamiltonian(x, params):
    """Conserved value H*(x) = H(x, s*(x)) along the extremal flow."""
    q, p = np.asarray(x.q, float), np.asarray(x.p, float)
    tau, gamma = params.tau, params.gamma
    f0, fr, fw, fl, fe, rbar, wbar = _fields(q, tau)
    fbar = f0 + rbar * fr + wbar * fw
    pr, pw, pl, pe = p @ fr, p @ fw, p @ fl, p @ fe
    v = (rbar * rbar + wbar * wbar - 2.0) / (2.0 * tau)
    return float(p @ fbar + 0.5 * tau * (pr * pr + pw * pw)
                 + 0.5 * gamma * (pl * pl + pe * pe) + v)


def _flow_vector(x8, tau, gamma):
    """RHS of the substituted 8-dim Hamilton flow, plus the action integrand.

    Returns (xdot (8,), action_integrand). The momentum equation is
    pdot = -J(q, s*)^T p - (1/tau)(r* grad r_bar + w* grad w_bar), with J the
    state-Jacobian of the drift at frozen controls; the control-gradient
    terms vanish by stationarity. Written out in scalars: this sits in the
    inner loop of every shooting residual.
    """
    a, c, al, g, pa, pc, pl_, pg = x8
    m1 = al * al + g * g
    m2 = c * c + g * g
    rbar = 1.0 - 2.0 * m1
    wbar = 1.0 - 2.0 * m2
    # control projections p.F_s
    pr = (pa * a * m1 + pc * c * m1 + pl_ * al * (m1 - 1.0) + pg * g * (m1 - 1.0)) / tau
    pw = (pa * a * m2 + pc * c * (m2 - 1.0) + pl_ * al * m2 + pg * g * (m2 - 1.0)) / tau
    plam = -c * pa + a * pc - g * pl_ + al * pg
    peps = -al * pa - g * pc + a * pl_ + c * pg
    r = rbar + tau * pr
    w = wbar + tau * pw
    lam = gamma * plam
    eps = gamma * peps

    rt = r / tau
    wt = w / tau
    qdot_a = rt * a * m1 + wt * a * m2 - c * lam - al * eps
    qdot_c = al + rt * c * m1 + wt * c * (m2 - 1.0) + a * lam - g * eps
    qdot_al = -c + rt * al * (m1 - 1.0) + wt * al * m2 + a * eps - g * lam
    qdot_g = rt * g * (m1 - 1.0) + wt * g * (m2 - 1.0) + c * eps + al * lam

    # (J^T p) assembled from the five Jacobian pieces
    apa_cpc = a * pa + c * pc
    jtp_a = pc * lam + pl_ * eps + rt * pa * m1 + wt * pa * m2
    jtp_c = -pl_ - pa * lam + pg * eps + rt * pc * m1 \
        + wt * (2.0 * c * (a * pa + al * pl_ + g * pg) + pc * (m2 - 1.0 + 2.0 * c * c))
    jtp_al = pc + pg * lam - pa * eps + wt * pl_ * m2 \
        + rt * (2.0 * al * apa_cpc + pl_ * (m1 - 1.0 + 2.0 * al * al) + 2.0 * al * g * pg)
    jtp_g = -pl_ * lam - pc * eps \
        + rt * (2.0 * g * apa_cpc + 2.0 * al * g * pl_ + pg * (m1 - 1.0 + 2.0 * g * g)) \
        + wt * (2.0 * g * (a * pa + c * pc + al * pl_) + pg * (m2 - 1.0 + 2.0 * g * g))

    pdot_a = -jtp_a
    pdot_c = -jtp_c + 4.0 * c * w / tau
    pdot_al = -jtp_al + 4.0 * al * r / tau
    pdot_g = -jtp_g + 4.0 * g * (r + w) / tau

    v = (rbar * rbar + wbar * wbar - 2.0) / (2.0 * tau)
    integrand = 0.5 * tau * (pr * pr + pw * pw) + 0.5 * gamma * (plam * plam + peps * peps) - v
    return (np.array([qdot_a, qdot_c, qdot_al, qdot_g,
                      pdot_a, pdot_c, pdot_al, pdot_g]), integrand)


def phase_flow(x, params):
    """(dq/dt, dp/dt) of the closed extremal system at phase point x."""
    xdot, _ = _flow_vector(np.asarray(x.as_vector(), float), params.tau, params.gamma)
    return xdot[:4], xdot[4:]


def integrate_extremal(x0, params, t_final, t_eval=None, rtol=RTOL, atol=ATOL):
    """Integrate the extremal flow from x0 over [0, t_final].

    Adaptive high-order integration (DOP853, rtol 1e-10 by default); the
    action integrand is accumulated as a 9th component. Raises
    DivergedTrajectoryError when |p| blows past 1e6 or the adaptive step
    collapses.
    """
    tau, gamma = params.tau, params.gamma

    def rhs(t, y):
        xdot, integrand = _flow_vector(y[:8], tau, gamma)
        return np.concatenate([xdot, [integrand]])

    def blowup(t, y):
        return float(np.max(np.abs(y[4:8]))) - P_BLOWUP
    blowup.terminal = True

    y0 = np.concatenate([x0.as_vector(), [0.0]])
    if t_final == 0.0:
        times = np.array([0.0])
        return ExtremalTrajectory(times, y0[None, :8].copy(),
                                  _controls_along(y0[None, :8], params), 0.0, None)
    sol = solve_ivp(rhs, (0.0, t_final), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=blowup, t_eval=t_eval)
    if sol.status == 1:
        raise DivergedTrajectoryError(
            f"momentum blow-up at t = {sol.t_events[0][0]:.4f}")
    if not sol.success:
        # includes the adaptive step collapsing below hardware resolution
        raise DivergedTrajectoryError(f"integration failed: {sol.message}")
    phase = sol.y[:8].T.copy()
    return ExtremalTrajectory(sol.t.copy(), phase, _controls_along(phase, params),
                              float(sol.y[8, -1]), sol.sol)


def _controls_along(phase, params):
    out = np.empty((phase.shape[0], 4))
    for i, row in enumerate(phase):
        s = optimal_controls(PhasePoint(row[:4], row[4:]), params)
        out[i] = (s.r, s.w, s.epsilon, s.lam)
    return out


def action_along(traj, params, n_grid=2001):
    """Path cost of an integrated extremal, by quadrature of its integrand.

    Consistent with the ODE-accumulated traj.action to quadrature accuracy.
    """
    if traj.sol is None or traj.times[-1] == traj.times[0]:
        return 0.0
    ts = np.linspace(traj.times[0], traj.times[-1], n_grid)
    vals = np.empty(n_grid)
    for i, t in enumerate(ts):
        y = traj.sol(t)
        _, vals[i] = _flow_vector(y[:8], params.tau, params.gamma)
    return float(np.trapezoid(vals, ts))


def path_action(times, qpath, params):
    """Freidlin-Wentzell cost of an arbitrary state path q(t).

    The path is spline-differentiated; at each node the deviation
    v = qdot - F_mean is charged (1/2) v . Q^+ v, and the measurement-rate
    term -V(q) is added. Deviations outside the range of Q are impossible
    for the dynamics and make the cost infinite.
    """
    times = np.asarray(times, float)
    qpath = np.asarray(qpath, float)
    if times.size < 2:
        return 0.0
    qdot = CubicSpline(times, qpath, axis=0)(times, 1)
    tau, gamma = params.tau, params.gamma
    a, c, al, g = qpath.T
    m1 = al * al + g * g
    m2 = c * c + g * g
    rbar = 1.0 - 2.0 * m1
    wbar = 1.0 - 2.0 * m2
    n = times.size
    # noise-coupling matrix scaled so the cost is |s|^2/2 per unit time
    B = np.empty((n, 4, 4))
    st, sg = math.sqrt(tau), math.sqrt(gamma)
    B[:, :, 0] = (st / tau) * np.stack([a * m1, c * m1, al * (m1 - 1), g * (m1 - 1)], 1)
    B[:, :, 1] = (st / tau) * np.stack([a * m2, c * (m2 - 1), al * m2, g * (m2 - 1)], 1)
    B[:, :, 2] = sg * np.stack([-c, a, -g, al], 1)
    B[:, :, 3] = sg * np.stack([-al, -g, a, c], 1)
    fbar = np.stack([
        rbar * a * m1 / tau + wbar * a * m2 / tau,
        al + rbar * c * m1 / tau + wbar * c * (m2 - 1) / tau,
        -c + rbar * al * (m1 - 1) / tau + wbar * al * m2 / tau,
        rbar * g * (m1 - 1) / tau + wbar * g * (m2 - 1) / tau,
    ], 1)
    v = qdot - fbar
    # the true path derivative is tangent to the sphere; the spline's small
    # normal component is a discretization artifact and is projected out
    v -= (np.einsum("ni,ni->n", v, qpath) / np.einsum("ni,ni->n", qpath, qpath))[:, None] * qpath
    # rcond clips the exactly-null normal direction of B without touching
    # the weakly coupled tangent directions (smallest tangent sv ~ sqrt(gamma))
    s = np.einsum("nij,nj->ni", np.linalg.pinv(B, rcond=1e-8), v)
    resid = np.abs(np.einsum("nij,nj->ni", B, s) - v).max(axis=1)
    if np.any(resid > 1e-5 * np.maximum(1.0, np.abs(v).max(axis=1))):
        return math.inf
    vals = 0.5 * (s * s).sum(axis=1) - (rbar ** 2 + wbar ** 2 - 2.0) / (2.0 * tau)
    return float(np.trapezoid(vals, times))


def classify_extremum(traj, params, n_perturbations=64, amplitude=1e-3,
                      seed=0, n_grid=801):
    """Classify an extremal as most-probable, least-probable, or saddle.

    The trajectory's cost is compared against boundary-respecting random
    perturbations of its state path: smooth bumps that vanish at both
    endpoints, of the given amplitude, applied on the unit sphere. All
    perturbations costlier -> 'most-probable'; all cheaper ->
    'least-probable'; mixed -> 'saddle'.
    """
    rng = np.random.default_rng(seed)
    t0, t1 = traj.times[0], traj.times[-1]
    if t1 <= t0:
        return "most-probable"
    ts = np.linspace(t0, t1, n_grid)
    base = np.array([traj.sol(t)[:4] for t in ts])
    s0 = path_action(ts, base, params)
    taper = np.sin(np.pi * (ts - t0) / (t1 - t0)) ** 2
    n_larger = n_smaller = 0
    for _ in range(n_perturbations):
        center = rng.uniform(t0 + 0.15 * (t1 - t0), t1 - 0.15 * (t1 - t0))
        width = rng.uniform(0.05, 0.25) * (t1 - t0)
        bump = np.exp(-0.5 * ((ts - center) / width) ** 2) * taper
        direc = rng.standard_normal(4)
        eta = amplitude * np.outer(bump / np.max(bump), direc / np.max(np.abs(direc)))
        pert = base + eta
        pert /= np.linalg.norm(pert, axis=1)[:, None]
        sp = path_action(ts, pert, params)
        if sp > s0:
            n_larger += 1
        else:
            n_smaller += 1
    if n_smaller == 0:
        return "most-probable"
    if n_larger == 0:
        return "least-probable"
    return "saddle"


def _flow_batch(X, tau, gamma):
    """_flow_vector's xdot, vectorized over rows of X (n, 8)."""
    a, c, al, g, pa, pc, pl_, pg = X.T
    m1 = al * al + g * g
    m2 = c * c + g * g
    rbar = 1.0 - 2.0 * m1
    wbar = 1.0 - 2.0 * m2
    pr = (pa * a * m1 + pc * c * m1 + pl_ * al * (m1 - 1.0) + pg * g * (m1 - 1.0)) / tau
    pw = (pa * a * m2 + pc * c * (m2 - 1.0) + pl_ * al * m2 + pg * g * (m2 - 1.0)) / tau
    plam = -c * pa + a * pc - g * pl_ + al * pg
    peps = -al * pa - g * pc + a * pl_ + c * pg
    r = rbar + tau * pr
    w = wbar + tau * pw
    lam = gamma * plam
    eps = gamma * peps
    rt = r / tau
    wt = w / tau
    out = np.empty_like(X)
    out[:, 0] = rt * a * m1 + wt * a * m2 - c * lam - al * eps
    out[:, 1] = al + rt * c * m1 + wt * c * (m2 - 1.0) + a * lam - g * eps
    out[:, 2] = -c + rt * al * (m1 - 1.0) + wt * al * m2 + a * eps - g * lam
    out[:, 3] = rt * g * (m1 - 1.0) + wt * g * (m2 - 1.0) + c * eps + al * lam
    apa_cpc = a * pa + c * pc
    out[:, 4] = -(pc * lam + pl_ * eps + rt * pa * m1 + wt * pa * m2)
    out[:, 5] = -(-pl_ - pa * lam + pg * eps + rt * pc * m1
                  + wt * (2 * c * (a * pa + al * pl_ + g * pg) + pc * (m2 - 1 + 2 * c * c))) \
        + 4.0 * c * w / tau
    out[:, 6] = -(pc + pg * lam - pa * eps + wt * pl_ * m2
                  + rt * (2 * al * apa_cpc + pl_ * (m1 - 1 + 2 * al * al) + 2 * al * g * pg)) \
        + 4.0 * al * r / tau
    out[:, 7] = -(-pl_ * lam - pc * eps
                  + rt * (2 * g * apa_cpc + 2 * al * g * pl_ + pg * (m1 - 1 + 2 * g * g))
                  + wt * (2 * g * (a * pa + c * pc + al * pl_) + pg * (m2 - 1 + 2 * g * g))) \
        + 4.0 * g * (r + w) / tau
    return out


def _screen_endpoints(q0, momenta, params, t_final, dt=0.01):
    """Endpoint phase points for a batch of initial momenta (fixed-step RK4).

    Cheap screening pass; diverging rows come back as NaN.
    """
    tau, gamma = params.tau, params.gamma
    n = momenta.shape[0]
    X = np.empty((n, 8))
    X[:, :4] = q0
    X[:, 4:] = momenta
    steps = max(1, int(math.ceil(t_final / dt)))
    h = t_final / steps
    with np.errstate(all="ignore"):
        for _ in range(steps):
            k1 = _flow_batch(X, tau, gamma)
            k2 = _flow_batch(X + 0.5 * h * k1, tau, gamma)
            k3 = _flow_batch(X + 0.5 * h * k2, tau, gamma)
            k4 = _flow_batch(X + h * k3, tau, gamma)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            X[np.abs(X).max(axis=1) > P_BLOWUP] = np.nan
    return X


def _final_state(q0, p0, params, t_final, rtol=1e-9):
    """Adaptive endpoint integration of the 8-dim flow (no dense output)."""
    def rhs(t, y):
        return _flow_vector(y, params.tau, params.gamma)[0]

    def blowup(t, y):
        return float(np.max(np.abs(y[4:]))) - P_BLOWUP
    blowup.terminal = True

    sol = solve_ivp(rhs, (0.0, t_final), np.concatenate([q0, p0]),
                    method="DOP853", rtol=rtol, atol=rtol * 1e-2, events=blowup)
    if sol.status == 1 or not sol.success:
        raise DivergedTrajectoryError("endpoint integration diverged")
    return sol.y[:, -1]


def shoot_to_boundary(q0, target, params, t_final, n_starts=64, seed=0,
                      p_scale=5.0, residual_tol=1e-6, n_candidates=8,
                      n_refine=6):
    """Find the minimum-cost extremal from q0 meeting a final-time condition.

    target is ("state", q_f) for a fixed final state, or ("concurrence", c)
    / "max" / "min" for a final concurrence value. Concurrence targets are
    resolved over the equivalence class of final states with that
    concurrence: the scalar concurrence mismatch is attacked directly, the
    level set is additionally sampled through its angle parameterization,
    and the converged candidate with the smallest action wins.

    Multi-start over p(0): p(0) = 0 first, the rest uniform in
    [-p_scale, p_scale]^4. All starts are screened with a cheap fixed-step
    pass; the most promising n_refine are polished by least squares on an
    adaptive integrator. Raises NoSolutionError (carrying the best residual)
    if nothing converges to residual_tol.
    """
    q0 = normalize(q0)
    if t_final == 0.0:
        return integrate_extremal(PhasePoint(q0, np.zeros(4)), params, 0.0)
    rng = np.random.default_rng(seed)
    # the momentum component along q0 is pure gauge (it commutes with the
    # flow and leaves the state path and the action unchanged), so the
    # search runs over tangent momenta only
    basis = _tangent_basis(q0)
    zstarts = np.vstack([np.zeros(3),
                         rng.uniform(-p_scale, p_scale, (n_starts - 1, 3))])
    kind, value = _parse_target(target)

    endpoints = _screen_endpoints(q0, zstarts @ basis.T, params, t_final)
    solutions = []
    best_res = [math.inf]

    def state_res(qf, T, rtol=1e-9):
        def res(z):
            try:
                return _final_state(q0, basis @ z, params, T, rtol=rtol)[:4] - qf
            except DivergedTrajectoryError:
                return np.full(4, 1e3)
        return res

    def accept(z):
        traj = integrate_extremal(PhasePoint(q0, basis @ z), params, t_final)
        solutions.append(traj)

    def refine(res_fn, z0, method="lm", max_nfev=150):
        try:
            fit = least_squares(res_fn, z0, method=method, xtol=1e-14,
                                ftol=1e-14, gtol=1e-15, max_nfev=max_nfev)
        except Exception:
            return None, math.inf
        rnorm = float(np.max(np.abs(res_fn(fit.x))))
        best_res[0] = min(best_res[0], rnorm)
        return fit.x, rnorm

    # the unforced (p = 0) integration may blow up well before t_final;
    # horizon continuation has to start inside that window
    t_blow = _blowup_horizon(q0, params, t_final)
    t_start = min(t_final, 0.75 * t_blow)
    n_rungs = max(2, int(math.ceil((t_final - t_start) / (0.15 * t_final))) + 1)
    rungs = np.linspace(t_start, t_final, n_rungs)

    def shoot_state(qf, extra_starts=2):
        # horizon continuation from the unforced start: the low-action
        # branch is tracked from a short horizon where p(0) = 0 converges
        z, ok = np.zeros(3), True
        for T in rungs:
            rt = 1e-9 if T == t_final else 1e-8
            z, rnorm = refine(state_res(qf, T, rtol=rt), z)
            if z is None or (T == t_final and rnorm >= residual_tol):
                ok = False
                break
        if ok:
            accept(z)
        # plus direct refinement from the best-screened random starts
        with np.errstate(invalid="ignore"):
            score = np.nansum((endpoints[:, :4] - qf) ** 2, axis=1) \
                + 1e6 * np.isnan(endpoints[:, 0])
        for z0 in zstarts[np.argsort(score)[:extra_starts]]:
            z, rnorm = refine(state_res(qf, t_final), z0)
            if z is not None and rnorm < residual_tol:
                accept(z)

    if kind == "state":
        shoot_state(normalize(np.asarray(value, float)), extra_starts=n_refine)
    else:
        c_target = float(value)
        for qf in _class_candidates(c_target, n_candidates, rng):
            shoot_state(qf, extra_starts=1)

        # direct scalar attack on the concurrence mismatch explores the
        # level set away from the sampled candidates
        def cres(z):
            try:
                qT = _final_state(q0, basis @ z, params, t_final)[:4]
            except DivergedTrajectoryError:
                return np.array([1e3])
            return np.array([math.sqrt(concurrence_sq(qT)) - c_target])

        with np.errstate(invalid="ignore"):
            cT = np.array([math.sqrt(concurrence_sq(e[:4])) if np.isfinite(e[0])
                           else math.inf for e in endpoints])
        for z0 in zstarts[np.argsort(np.abs(cT - c_target))[:n_refine]]:
            z, rnorm = refine(cres, z0, method="trf", max_nfev=60)
            if z is not None and rnorm < residual_tol:
                accept(z)

    if not solutions:
        raise NoSolutionError(best_res[0])
    actions = [s.action for s in solutions]
    return solutions[int(np.argmin(actions))]


def _tangent_basis(q):
    """Orthonormal basis of the tangent space of the unit sphere at q."""
    mats = np.eye(4) - np.outer(q, q)
    u, s, _ = np.linalg.svd(mats)
    return u[:, :3]


def _blowup_horizon(q0, params, t_final):
    """Time at which the p = 0 extremal integration diverges (t_final if never)."""
    def rhs(t, y):
        return _flow_vector(y, params.tau, params.gamma)[0]

    def blowup(t, y):
        return float(np.max(np.abs(y[4:]))) - P_BLOWUP
    blowup.terminal = True

    sol = solve_ivp(rhs, (0.0, t_final), np.concatenate([q0, np.zeros(4)]),
                    method="DOP853", rtol=1e-8, atol=1e-10, events=blowup)
    if sol.status == 1:
        return float(sol.t_events[0][0])
    if not sol.success:
        return float(sol.t[-1])
    return t_final


def _parse_target(target):
    if isinstance(target, str):
        if target == "max":
            return "concurrence", 1.0
        if target == "min":
            return "concurrence", 0.0
        raise ValueError(f"unknown target {target!r}")
    kind, value = target
    if kind not in ("state", "concurrence"):
        raise ValueError(f"unknown target kind {kind!r}")
    return kind, value


def _class_candidates(c_target, n, rng):
    if c_target >= 1.0 - 1e-12:
        # the C = 1 level set is the circle (x, y, -y, x), 2(x^2+y^2) = 1;
        # pi/4 and -pi/4 are the states the bare exchange rotation passes
        # through, where the low-action branches end
        chis = np.unique(np.concatenate([
            [np.pi / 4.0, 7.0 * np.pi / 4.0],
            np.linspace(0.0, 2.0 * np.pi, max(n - 2, 0), endpoint=False),
        ]))
        return [np.array([math.cos(x), math.sin(x), -math.sin(x), math.cos(x)])
                / math.sqrt(2.0) for x in chis]
    return list(states_with_concurrence(c_target, n, rng))


# ---------------------------------------------------------------------------
# Global optimum (no final boundary condition)

def global_optimum_flow(q0, params, t_final, t_eval=None):
    """Deterministic flow at the mean controls (r_bar, w_bar, 0, 0).

    This is the globally most probable trajectory; the vector field carries
    no dependence on the noise strength, so the output is identical for any
    gamma. Returns (times, states).
    """
    tau = params.tau

    def rhs(t, q):
        f0, fr, fw, _, _, rbar, wbar = _fields(q, tau)
        return f0 + rbar * fr + wbar * fw

    if t_final == 0.0:
        return np.array([0.0]), normalize(q0)[None, :]
    sol = solve_ivp(rhs, (0.0, t_final), normalize(q0), method="DOP853",
                    rtol=RTOL, atol=ATOL, dense_output=t_eval is None,
                    t_eval=t_eval)
    if not sol.success:
        raise DivergedTrajectoryError(f"global-optimum integration failed: {sol.message}")
    return sol.t.copy(), sol.y.T.copy()


def classify_global_flow(tau, q0=None, t_final=80.0, tail=20.0,
                         slope_tol=1e-4, osc_tol=1e-2, _params_cls=None):
    """'oscillatory' or 'saturating' behavior of the global optimum at tau.

    Saturating: |dC^2/dt| stays below slope_tol over the final `tail` time
    units. Oscillatory: the peak-to-peak C^2 range over the tail exceeds
    osc_tol. Near-critical cases are retried once with a doubled horizon
    before being reported as 'ambiguous'.
    """
    from .params import SimParams
    if q0 is None:
        q0 = np.full(4, 0.5)
    params = SimParams(tau=tau, gamma=0.0, dt=0.02, t_final=1.0)
    for horizon in (t_final, 2.0 * t_final):
        ts = np.linspace(0.0, horizon, max(2000, int(horizon * 40)))
        _, states = global_optimum_flow(q0, params, horizon, t_eval=ts)
        c2 = np.fromiter((concurrence_sq(s) for s in states), float, ts.size)
        sel = ts >= horizon - tail
        slope = np.gradient(c2[sel], ts[sel])
        if np.max(np.abs(slope)) < slope_tol:
            return "saturating"
        if np.ptp(c2[sel]) > osc_tol:
            return "oscillatory"
    return "ambiguous"


def global_saturation_value(tau, q0=None, t_final=120.0, tail=10.0):
    """Late-time C^2 plateau of the global optimum (tau < 1/2 regime)."""
    from .params import SimParams
    if q0 is None:
        q0 = np.full(4, 0.5)
    params = SimParams(tau=tau, gamma=0.0, dt=0.02, t_final=1.0)
    ts = np.linspace(t_final - tail, t_final, 200)
    _, states = global_optimum_flow(q0, params, t_final, t_eval=ts)
    return float(np.mean([concurrence_sq(s) for s in states]))


def detect_global_transition(tau_grid, q0=None, width=0.025, **classify_kw):
    """Estimate the oscillation/saturation transition by bisection.

    The grid supplies the initial bracket (largest saturating tau, smallest
    oscillatory tau); bisection refines it to the requested width. Returns
    (tau_c_estimate, bracket, {tau: classification}).
    """
    classes = {float(t): classify_global_flow(float(t), q0=q0, **classify_kw)
               for t in tau_grid}
    sat = [t for t, k in classes.items() if k == "saturating"]
    osc = [t for t, k in classes.items() if k == "oscillatory"]
    if not sat or not osc:
        raise EntlabError(f"classifier found no transition bracket on the grid: {classes}")
    lo, hi = max(sat), min(osc)
    if lo > hi:
        raise EntlabError(f"inconsistent classifications on the grid: {classes}")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        k = classify_global_flow(mid, q0=q0, **classify_kw)
        classes[mid] = k
        if k == "saturating":
            lo = mid
        elif k == "oscillatory":
            hi = mid
        else:  # degenerate point: the bracket cannot be tightened further
            break
    return 0.5 * (lo + hi), (lo, hi), classes
