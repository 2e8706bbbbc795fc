"""Weak-coupling analytics for the average squared concurrence.

The quadratic (free) part of the stochastic action gives linear dynamics
whose fundamental solution is the free propagator: the a-channel decays at
rate Gamma, the (c, alpha) block rotates at unit frequency while decaying
at Gamma + 1/(2 tau), and the gamma-channel decays at Gamma + 1/tau. The
propagator vanishes for non-positive time differences (Ito convention) and
tends to the identity from above.

Contracting four propagators against the initial state gives the linear
approximation of <C^2>; adding the five-vertex corrections built from the
interaction catalog gives the closed-form weak-coupling expression
evaluated by closed_form_c2. The closed form is accurate for weak noise
and weak measurement at short times, and decays to zero at long times, so
it cannot reproduce the finite steady-state entanglement seen in
simulation.

The interaction vertices themselves ship as a plain-text data file so the
transcription can be audited line by line; catalog_residual_report
quantifies how the transcribed vertices compare against the independently
re-derived drift/diffusion of the SDE engine.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

import numpy as np

from .errors import CatalogError
from .sde import diffusion, drift

CATALOG_RESOURCE = "vertex_catalog.txt"


@dataclass(frozen=True)
class PropagatorKernel:
    """Free propagator over a time difference delta_t."""

    delta_t: float
    tau: float
    gamma: float
    matrix: np.ndarray  # (4, 4)


def free_propagator(delta_t, params):
    """Free propagator G(delta_t); zero matrix for delta_t <= 0."""
    tau, gamma = params.tau, params.gamma
    m = np.zeros((4, 4))
    if delta_t > 0.0:
        ct, st = math.cos(delta_t), math.sin(delta_t)
        block = math.exp(-(gamma + 0.5 / tau) * delta_t)
        m[0, 0] = math.exp(-gamma * delta_t)
        m[1, 1] = block * ct
        m[1, 2] = block * st
        m[2, 1] = -block * st
        m[2, 2] = block * ct
        m[3, 3] = math.exp(-(gamma + 1.0 / tau) * delta_t)
    return PropagatorKernel(float(delta_t), tau, gamma, m)


def linear_c2(t, params):
    """Linear-order average squared concurrence: sin^4(t) e^{-2t(2 Gamma + 1/tau)}."""
    t = np.asarray(t, dtype=float)
    out = np.sin(t) ** 4 * np.exp(-2.0 * t * (2.0 * params.gamma + 1.0 / params.tau))
    return out if out.ndim else float(out)


def closed_form_c2(t, params):
    """Five-vertex closed form for the average squared concurrence.

    First term is linear_c2; the bracketed correction carries the
    five-vertex diagrams. Vanishes at t = 0 with zero slope, and decays to
    zero as t -> infinity for any positive noise strength.
    """
    t = np.asarray(t, dtype=float)
    tau, gamma = params.tau, params.gamma
    decay = np.exp(-2.0 * t * (2.0 * gamma + 1.0 / tau))
    bracket = (
        64.0 * gamma * tau ** 4 * np.sinh(t / tau) / (4.0 * tau ** 2 + 1.0)
        - 32.0 * gamma * tau ** 3 * np.sin(2.0 * t) / (4.0 * tau ** 2 + 1.0)
        - 4.0 * gamma * tau * np.sin(4.0 * t)
        + 2.0 * t * (8.0 * gamma * tau - 5.0) * np.cos(2.0 * t)
        + 9.0 * t
        + np.sin(2.0 * t)
        - np.sin(4.0 * t)
        + 3.0 * t * np.cos(4.0 * t)
    )
    out = np.sin(t) ** 4 * decay + decay * bracket / (8.0 * tau)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VertexTerm:
    """One interaction vertex: monomial exponents and its coupling.

    exponents = (n_a, n_c, n_alpha, n_gamma, m_a, m_c, m_alpha, m_gamma);
    the coupling is coeff * Gamma^gamma_pow * (1/tau)^inv_tau_pow. Vertices
    without state legs (sum n_j = 0) are the delta(t)-localized boundary
    sources and are excluded from the bulk integrand.
    """

    exponents: tuple
    coeff: float
    gamma_pow: int
    inv_tau_pow: int

    @property
    def n_degree(self):
        return sum(self.exponents[:4])

    @property
    def m_degree(self):
        return sum(self.exponents[4:])

    @property
    def is_boundary(self):
        return self.n_degree == 0

    def coupling(self, tau, gamma):
        return self.coeff * gamma ** self.gamma_pow * (1.0 / tau) ** self.inv_tau_pow

    def serialize(self):
        frac = Fraction(self.coeff).limit_denominator(10 ** 9)
        expo = " ".join(str(e) for e in self.exponents)
        return f"{expo} {frac.numerator}/{frac.denominator} {self.gamma_pow} {self.inv_tau_pow}"


def load_vertex_catalog(path=None):
    """Load the vertex catalog (127 terms); raises CatalogError if malformed."""
    if path is None:
        text = resources.files("entlab.data").joinpath(CATALOG_RESOURCE).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    terms = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 11:
            raise CatalogError(f"line {ln}: expected 11 fields, got {len(fields)}")
        try:
            expo = tuple(int(x) for x in fields[:8])
            coeff = Fraction(fields[8])
            gpow = int(fields[9])
            tpow = int(fields[10])
        except (ValueError, ZeroDivisionError) as exc:
            raise CatalogError(f"line {ln}: {exc}") from None
        if any(e < 0 for e in expo):
            raise CatalogError(f"line {ln}: negative exponent")
        terms.append(VertexTerm(expo, float(coeff), gpow, tpow))
    if not terms:
        raise CatalogError("catalog file contains no terms")
    return terms


def serialize_catalog(terms):
    """Render a catalog back to the data-file format (header omitted)."""
    return "\n".join(t.serialize() for t in terms) + "\n"


def catalog_integrand(terms, q, p, tau, gamma):
    """Evaluate the bulk interaction integrand at (q, p); boundary terms skipped."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    tot = 0.0
    for t in terms:
        if t.is_boundary:
            continue
        e = t.exponents
        mono = (q[0] ** e[0] * q[1] ** e[1] * q[2] ** e[2] * q[3] ** e[3]
                * p[0] ** e[4] * p[1] ** e[5] * p[2] ** e[6] * p[3] ** e[7])
        tot += t.coupling(tau, gamma) * mono
    return tot


def reference_integrand(q, p, params):
    """Interaction integrand from the re-derived SDE drift/diffusion.

    -p . (f - f_linear) + (1/2) p . D D^T . p evaluated on the unit sphere;
    f_linear is the bilinear (free-action) part of the drift.
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    tau, gamma = params.tau, params.gamma
    f = drift(q, params)
    a, c, al, g = q
    f_lin = np.array([
        -gamma * a,
        al - (gamma + 0.5 / tau) * c,
        -c - (gamma + 0.5 / tau) * al,
        -(gamma + 1.0 / tau) * g,
    ])
    d = diffusion(q, params)
    return float(-p @ (f - f_lin) + 0.5 * p @ (d @ d.T) @ p)


@dataclass(frozen=True)
class ResidualReport:
    """Catalog-vs-derivation residual statistics over random samples."""

    n_samples: int
    max_abs: float
    rms: float
    tau: float
    gamma: float


def catalog_residual_report(n_samples, params, rng, terms=None, p_scale=1.0):
    """Compare the transcribed catalog against the re-derived integrand.

    Samples normalized states and Gaussian momenta, and reports max/RMS of
    catalog - reference. The statistics are reported, not asserted: the
    printed noise-sector couplings carry an extra 1/tau relative to the
    re-derivation, so away from tau = 1 (or gamma = 0) a finite floor
    proportional to Gamma |1/tau - 1| remains.
    """
    if terms is None:
        terms = load_vertex_catalog()
    res = np.empty(n_samples)
    for i in range(n_samples):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        p = p_scale * rng.standard_normal(4)
        res[i] = (catalog_integrand(terms, q, p, params.tau, params.gamma)
                  - reference_integrand(q, p, params))
    return ResidualReport(n_samples, float(np.max(np.abs(res))),
                          float(np.sqrt(np.mean(res ** 2))), params.tau, params.gamma)
