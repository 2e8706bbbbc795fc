"""entlab: simulation laboratory for the entanglement dynamics of two
coupled qubits under continuous Gaussian monitoring and local unitary noise.

Subpackages / modules
---------------------
state      state vectors, concurrence, uniform (ergodic) reference measure
kraus      exact discrete-time measurement + unitary engine (ground truth)
sde        Ito SDE reformulation, Euler-Maruyama integrator
extremal   optimal-trajectory machinery (stochastic Hamiltonian, shooting)
diagram    free propagator, weak-coupling closed form for <C^2>, vertex catalog
ensemble   Monte Carlo averages, post-selection, steady states, sweeps
cli        command-line front end (`entlab` executable)
"""
__version__ = "0.1.0"

from .params import SimParams  # noqa: F401
from .state import concurrence, concurrence_sq, normalize  # noqa: F401
