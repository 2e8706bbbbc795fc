"""Ito-form stochastic differential equations for the monitored noisy pair.

Second, independent integrator used to cross-validate the discrete Kraus
engine and as the numerical bridge to the quadratic action of the
diagrammatic module.

The drift and diffusion below are re-derived from the one-step update:
expand the normalized measurement + unitary map to second order, apply the
Ito substitutions (dt^2 r^2 -> dt tau, dt^2 eps^2 -> Gamma dt), and split
the readouts into mean plus fluctuation, r -> r_bar + sqrt(tau) theta with
theta of variance 1/dt. With m1 = alpha^2 + gamma^2, m2 = c^2 + gamma^2 and
K = (m1^2 + m2^2)/2 the Ito drift is

    a'     = -a (K/tau + Gamma)
    c'     =  alpha - Gamma c + (c/tau)     (m2 - 1/2 - K)
    alpha' = -c - Gamma alpha + (alpha/tau) (m1 - 1/2 - K)
    gamma' =     -Gamma gamma + (gamma/tau) (m1 + m2 - 1 - K)

and the four unit-variance noise columns (theta, phi, epsilon, lambda) are

    theta:   (a m1, c m1, alpha (m1-1), gamma (m1-1)) / sqrt(tau)
    phi:     (a m2, c (m2-1), alpha m2, gamma (m2-1)) / sqrt(tau)
    epsilon: sqrt(Gamma) (-alpha, -gamma, a, c)
    lambda:  sqrt(Gamma) (-c, a, -gamma, alpha)

This vector field satisfies the Ito norm budget q.drift + tr(D D^T)/2 = 0
identically, so the renormalization applied after each Euler-Maruyama step
only removes O(dt) discretization drift.
"""
import numpy as np

from . import kernels
from .errors import TrajectoryAbortError
from .kraus import TrajectoryRecord
from .rng import sde_noise_block, trajectory_rng
from .state import normalize

# Euler-Maruyama carries its own O(dt) bias, so this backend defaults to a
# tighter step than the Kraus engine.
DEFAULT_SDE_DT = 0.005


def drift(q, params):
    """Ito drift vector at unit state q."""
    a, c, al, g = q
    tau, gamma = params.tau, params.gamma
    m1 = al * al + g * g
    m2 = c * c + g * g
    K = 0.5 * (m1 * m1 + m2 * m2)
    return np.array([
        -a * (K / tau + gamma),
        al - gamma * c + (c / tau) * (m2 - 0.5 - K),
        -c - gamma * al + (al / tau) * (m1 - 0.5 - K),
        -gamma * g + (g / tau) * (m1 + m2 - 1.0 - K),
    ])


def diffusion(q, params):
    """4x4 noise couplings; columns are (theta, phi, epsilon, lambda)."""
    a, c, al, g = q
    tau, gamma = params.tau, params.gamma
    m1 = al * al + g * g
    m2 = c * c + g * g
    st = 1.0 / np.sqrt(tau)
    sg = np.sqrt(gamma)
    out = np.empty((4, 4))
    out[:, 0] = st * np.array([a * m1, c * m1, al * (m1 - 1.0), g * (m1 - 1.0)])
    out[:, 1] = st * np.array([a * m2, c * (m2 - 1.0), al * m2, g * (m2 - 1.0)])
    out[:, 2] = sg * np.array([-al, -g, a, c])
    out[:, 3] = sg * np.array([-c, a, -g, al])
    return out


def em_step(q, params, rng):
    """One Euler-Maruyama step with renormalization.

    The noise draw is a 4-vector of standard normals in the fixed column
    order (theta, phi, epsilon, lambda).
    """
    xi = rng.standard_normal(4)
    dq = drift(q, params) * params.dt + diffusion(q, params) @ (np.sqrt(params.dt) * xi)
    return normalize(q + dq)


def simulate_trajectory_sde(q0, params, rng_stream):
    """Run one Euler-Maruyama trajectory; same record layout as the Kraus engine.

    The recorded readouts are the realized r = r_bar + sqrt(tau/dt) theta_k
    (and likewise w), and the noises are the realized epsilon, lambda with
    variance gamma/dt, i.e. the same physical variables the Kraus engine
    records.
    """
    if isinstance(rng_stream, (int, np.integer)):
        rng_stream = trajectory_rng(params.seed, rng_stream)
    n = params.n_steps
    xi = sde_noise_block(rng_stream, n)
    states = np.empty((n + 1, 4))
    readouts = np.full((n + 1, 2), np.nan)
    noises = np.full((n + 1, 2), np.nan)
    c2 = np.empty(n + 1)
    q0 = normalize(q0)
    abort = kernels.sde_full(q0, params.dt, params.tau, params.gamma,
                             xi, states, readouts, noises, c2)
    if abort >= 0:
        raise TrajectoryAbortError(abort)
    times = params.dt * np.arange(n + 1)
    return TrajectoryRecord(times, states, readouts, noises, c2)


def trajectory_c2_sde(q0, params, rng_stream):
    """Squared-concurrence series of one SDE trajectory; see kraus.trajectory_c2."""
    if isinstance(rng_stream, (int, np.integer)):
        rng_stream = trajectory_rng(params.seed, rng_stream)
    n = params.n_steps
    xi = sde_noise_block(rng_stream, n)
    c2 = np.empty(n + 1)
    q0 = normalize(q0)
    abort = kernels.sde_c2(q0, params.dt, params.tau, params.gamma, xi, c2)
    return c2, abort
