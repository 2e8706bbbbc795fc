"""Ground-truth discrete-time engine: Gaussian measurement back-action
composed with the noisy two-qubit unitary.

One step of duration dt does, in order:

1. draw detector readouts (r, w) from the exact Born mixture of the current
   state: pick a basis state with probability |amplitude|^2, then
   r ~ Normal(z1, tau/dt) and w ~ Normal(z2, tau/dt) where z1, z2 = +/-1 are
   the sigma_z eigenvalues of qubit 1 and 2 in that basis state
   (|0> -> +1, |1> -> -1);
2. apply the measurement back-action: each amplitude is damped by
   exp(-(dt/4 tau) [(r - z1)^2 + (w - z2)^2]) and the state renormalized;
3. draw the Hamiltonian noise amplitudes (epsilon, lambda), each
   Normal(0, gamma/dt);
4. advance by the exact orthogonal map exp(G dt), where G generates
   a' = -c l - alpha e,  c' = alpha + a l - gamma e,
   alpha' = -c + a e - gamma l,  gamma' = c e + alpha l
   (unit-frequency exchange rotation in the (c, alpha) plane plus the two
   local noise rotations).

The readout sampling is exact for any dt, and exp(G dt) is evaluated in
closed form (G lives in so(4) = su(2) x su(2), so the map factorizes into a
left and a right quaternion rotation). The only discretization effect is
the operator splitting between measurement and unitary within a step.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import TrajectoryAbortError
from .rng import kraus_noise_block, trajectory_rng
from .state import concurrence_sq, normalize

# sigma_z eigenvalues of (qubit 1, qubit 2) on the basis (|00>,|01>,|10>,|11>)
Z1 = np.array([1.0, 1.0, -1.0, -1.0])
Z2 = np.array([1.0, -1.0, 1.0, -1.0])


@dataclass(frozen=True)
class TrajectoryRecord:
    """One stochastic trajectory on the step grid t_k = k dt.

    All arrays have n_steps + 1 rows; row k describes the state after step k
    and the stochastic inputs (r, w) and (epsilon, lambda) that produced it.
    Row 0 is the initial state, so its readout/noise entries are NaN.
    """

    times: np.ndarray        # (n+1,)
    states: np.ndarray       # (n+1, 4)
    readouts: np.ndarray     # (n+1, 2)
    noises: np.ndarray       # (n+1, 2)
    concurrence_sq: np.ndarray  # (n+1,)


def sample_unitary_noise(params, rng):
    """Draw (epsilon, lambda) for one step: independent Normal(0, gamma/dt)."""
    if params.gamma == 0.0:
        return 0.0, 0.0
    s = math.sqrt(params.gamma / params.dt)
    eps, lam = rng.standard_normal(2)
    return s * eps, s * lam


def sample_readouts(q, params, rng):
    """Draw one (r, w) pair from the exact Born mixture of state q."""
    u = rng.random()
    xi_r, xi_w = rng.standard_normal(2)
    return _readouts_from_draws(q, params.tau, params.dt, u, xi_r, xi_w)


def _readouts_from_draws(q, tau, dt, u, xi_r, xi_w):
    p = np.asarray(q) ** 2
    # cumulative scan in fixed component order; u is uniform on [0, sum)
    target = u * p.sum()
    acc = 0.0
    k = 3
    for i in range(4):
        acc += p[i]
        if target < acc:
            k = i
            break
    sig = math.sqrt(tau / dt)
    return Z1[k] + sig * xi_r, Z2[k] + sig * xi_w


def apply_measurement(q, readouts, params):
    """Back-action of one readout pair: Gaussian damping then renormalize."""
    r, w = readouts
    expo = -(params.dt / (4.0 * params.tau)) * ((r - Z1) ** 2 + (w - Z2) ** 2)
    expo -= expo.max()  # common factor drops out after renormalization
    out = np.asarray(q) * np.exp(expo)
    n = math.sqrt(float(np.dot(out, out)))
    if n < 1e-150:
        raise TrajectoryAbortError(None, "post-measurement norm underflow")
    return out / n


def apply_unitary(q, noise, dt):
    """Advance q by the exact orthogonal map exp(G dt).

    Exact for any dt: with quaternion coordinates (a, c, alpha, gamma) the
    generator splits into left multiplication by (lambda, 0, -1/2) and right
    multiplication by (0, epsilon, 1/2), each exponentiated in closed form.
    """
    eps, lam = noise
    return np.array(_rotate(q[0], q[1], q[2], q[3], eps, lam, dt))


def _rotate(a, c, al, g, eps, lam, dt):
    hu = math.sqrt(lam * lam + 0.25)
    hv = math.sqrt(eps * eps + 0.25)
    su = math.sin(dt * hu) / hu
    sv = math.sin(dt * hv) / hv
    u0, u1, u3 = math.cos(dt * hu), su * lam, -0.5 * su
    v0, v2, v3 = math.cos(dt * hv), sv * eps, 0.5 * sv
    # m = qu * x  (Hamilton product, x = (a, c, alpha, gamma))
    m0 = u0 * a - u1 * c - u3 * g
    m1 = u0 * c + u1 * a - u3 * al
    m2 = u0 * al - u1 * g + u3 * c
    m3 = u0 * g + u1 * al + u3 * a
    # x' = m * qv
    r0 = m0 * v0 - m2 * v2 - m3 * v3
    r1 = m1 * v0 + m2 * v3 - m3 * v2
    r2 = m0 * v2 - m1 * v3 + m2 * v0
    r3 = m0 * v3 + m1 * v2 + m3 * v0
    return r0, r1, r2, r3


def step(q, params, rng):
    """One full step: measure, damp, draw noise, rotate; state renormalized.

    Returns (state, (r, w), (epsilon, lambda)).
    """
    r, w = sample_readouts(q, params, rng)
    q = apply_measurement(q, (r, w), params)
    eps, lam = sample_unitary_noise(params, rng)
    q = normalize(apply_unitary(q, (eps, lam), params.dt))
    return q, (r, w), (eps, lam)


def simulate_trajectory(q0, params, rng_stream):
    """Run one trajectory of n_steps = round(t_final/dt) steps.

    rng_stream is either a Generator or a trajectory index (int); an index
    is resolved through the (seed, index) Philox stream, which makes the
    output a pure function of (params.seed, index).
    """
    if isinstance(rng_stream, (int, np.integer)):
        rng_stream = trajectory_rng(params.seed, rng_stream)
    n = params.n_steps
    uniforms, normals = kraus_noise_block(rng_stream, n)
    states = np.empty((n + 1, 4))
    readouts = np.full((n + 1, 2), np.nan)
    noises = np.full((n + 1, 2), np.nan)
    c2 = np.empty(n + 1)
    q0 = normalize(q0)
    abort = kernels.kraus_full(q0, params.dt, params.tau, params.gamma,
                               uniforms, normals, states, readouts, noises, c2)
    if abort >= 0:
        raise TrajectoryAbortError(abort)
    times = params.dt * np.arange(n + 1)
    return TrajectoryRecord(times, states, readouts, noises, c2)


def trajectory_c2(q0, params, rng_stream):
    """Squared-concurrence series of one trajectory (fast path, no record).

    Returns (c2_array, abort_step); abort_step is -1 when the trajectory
    completed. Used by the ensemble driver, which handles aborts itself.
    """
    if isinstance(rng_stream, (int, np.integer)):
        rng_stream = trajectory_rng(params.seed, rng_stream)
    n = params.n_steps
    uniforms, normals = kraus_noise_block(rng_stream, n)
    c2 = np.empty(n + 1)
    q0 = normalize(q0)
    abort = kernels.kraus_c2(q0, params.dt, params.tau, params.gamma,
                             uniforms, normals, c2)
    return c2, abort


def mean_readouts(q):
    """Ensemble-mean readouts (r, w) of state q: (<Z1>, <Z2>).

    Componentwise: r_bar = 1 - 2(alpha^2 + gamma^2), w_bar = 1 - 2(c^2 +
    gamma^2). (The sign convention follows the sigma_z eigenvalue assignment
    |0> -> +1 used by sample_readouts.)
    """
    p = np.asarray(q) ** 2
    return float(np.dot(p, Z1)), float(np.dot(p, Z2))


__all__ = [
    "TrajectoryRecord", "sample_unitary_noise", "sample_readouts",
    "apply_measurement", "apply_unitary", "step", "simulate_trajectory",
    "trajectory_c2", "mean_readouts", "concurrence_sq", "Z1", "Z2",
]
