"""Two-qubit pure states with real amplitudes, and their entanglement.

A state is a real 4-vector q = (a, c, alpha, gamma) of amplitudes on the
computational basis |00>, |01>, |10>, |11>, normalized to the unit 3-sphere.
The dynamics implemented in this package preserves realness, so complex
amplitudes never appear.

The concurrence of such a state is C = 2|a*gamma - alpha*c|, with C = 0 on
product states and C = 1 on Bell-type states.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroNormError

NORM_TOL = 1e-9  # unit-norm tolerance enforced after every renormalization


def normalize(q):
    """Rescale q to unit norm, preserving direction.

    Raises ZeroNormError when the input norm is numerically zero, which a
    stochastic trajectory should treat as a collapse.
    """
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(np.dot(q, q)))
    if n < 1e-150:
        raise ZeroNormError(f"cannot normalize state with norm {n:.3e}")
    return q / n


def concurrence(q):
    """Concurrence 2|a*gamma - alpha*c| of a normalized real state."""
    a, c, al, g = q
    return 2.0 * abs(a * g - al * c)


def concurrence_sq(q):
    """Squared concurrence 4(a*gamma - alpha*c)^2."""
    a, c, al, g = q
    d = a * g - al * c
    return 4.0 * d * d


@dataclass(frozen=True)
class ErgodicAngles:
    """Hyperspherical coordinates (psi, theta, phi) on the real 3-sphere.

    a = cos(psi), c = sin(psi)cos(theta), alpha = sin(psi)sin(theta)cos(phi),
    gamma = sin(psi)sin(theta)sin(phi); psi, theta in [0, pi], phi in [0, 2pi).
    These angles are unrelated to the measurement noises of the SDE engine.
    """

    psi: float
    theta: float
    phi: float

    def to_state(self):
        sp = math.sin(self.psi)
        st = math.sin(self.theta)
        return np.array([
            math.cos(self.psi),
            sp * math.cos(self.theta),
            sp * st * math.cos(self.phi),
            sp * st * math.sin(self.phi),
        ])


def angles_from_state(q):
    """Inverse of ErgodicAngles.to_state (phi returned in [0, 2pi))."""
    a, c, al, g = normalize(q)
    psi = math.acos(min(1.0, max(-1.0, a)))
    sp = math.sin(psi)
    if sp < 1e-14:
        return ErgodicAngles(psi, 0.0, 0.0)
    theta = math.acos(min(1.0, max(-1.0, c / sp)))
    st = math.sin(theta)
    if st < 1e-14:
        return ErgodicAngles(psi, theta, 0.0)
    phi = math.atan2(g / (sp * st), al / (sp * st))
    if phi < 0:
        phi += 2.0 * math.pi
    return ErgodicAngles(psi, theta, phi)


def sample_ergodic(rng, size=None):
    """Draw states uniformly on the real 3-sphere.

    The uniform measure factorizes as sin^2(psi) dpsi * sin(theta) dtheta *
    dphi. theta and phi are drawn by inverse CDF; psi by rejection against
    the sin^2 density (acceptance rate 1/2).

    With size=None returns a single state (shape (4,)); otherwise an array
    of shape (size, 4).
    """
    n = 1 if size is None else int(size)
    psi = _sample_psi(rng, n)
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    sp = np.sin(psi)
    st = np.sin(theta)
    out = np.column_stack([
        np.cos(psi),
        sp * np.cos(theta),
        sp * st * np.cos(phi),
        sp * st * np.sin(phi),
    ])
    return out[0] if size is None else out


def _sample_psi(rng, n):
    # rejection on [0, pi] against sin^2(psi) (envelope: uniform)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 16)
        cand = np.pi * rng.random(2 * m)
        acc = cand[rng.random(2 * m) < np.sin(cand) ** 2]
        k = min(acc.size, n - filled)
        out[filled:filled + k] = acc[:k]
        filled += k
    return out


def ergodic_mean_c2():
    """Exact uniform-measure average of the squared concurrence: 1/3."""
    return 1.0 / 3.0


def states_with_concurrence(c_target, n, rng):
    """Sample n states on the concurrence level set C = c_target.

    For moderate targets, draws (psi, theta) from the uniform marginal and
    solves for a phi that realizes the requested concurrence; (psi, theta)
    pairs that cannot reach it are rejected. Near C = 1 the acceptance
    region collapses onto the Bell circle, so high targets use the exact
    Schmidt form instead: local rotations applied to
    cos(xi)|00> + sin(xi)|11> with sin(2 xi) = C. Used to parameterize
    final-state equivalence classes when shooting to a concurrence target.
    """
    if not 0.0 <= c_target <= 1.0:
        raise ValueError(f"concurrence target must be in [0, 1], got {c_target}")
    if c_target > 0.9:
        return _schmidt_states(c_target, n, rng)
    out = np.empty((n, 4))
    filled = 0
    while filled < n:
        psi = _sample_psi(rng, 1)[0]
        theta = math.acos(1.0 - 2.0 * rng.random())
        sp, st = math.sin(psi), math.sin(theta)
        # C(phi) = 2 sp st |cos(psi) sin(phi) - sp cos(theta) cos(phi)|
        #        = 2 sp st R |sin(phi - phi0)|
        amp_r = math.hypot(math.cos(psi), sp * math.cos(theta))
        peak = 2.0 * sp * st * amp_r
        if peak < c_target or peak < 1e-12:
            continue
        phi0 = math.atan2(sp * math.cos(theta), math.cos(psi))
        phi = phi0 + math.asin(c_target / peak)
        q = ErgodicAngles(psi, theta, phi % (2.0 * math.pi)).to_state()
        out[filled] = q
        filled += 1
    return out


def _schmidt_states(c_target, n, rng):
    xi = 0.5 * math.asin(c_target)
    out = np.empty((n, 4))
    for k in range(n):
        s = xi if rng.random() < 0.5 else math.pi / 2.0 - xi
        core = np.array([math.cos(s), 0.0, 0.0, math.sin(s)])
        u, v = rng.uniform(0.0, 2.0 * math.pi, 2)
        ru = np.array([[math.cos(u), -math.sin(u)], [math.sin(u), math.cos(u)]])
        rv = np.array([[math.cos(v), -math.sin(v)], [math.sin(v), math.cos(v)]])
        out[k] = np.kron(ru, rv) @ core
    return out
