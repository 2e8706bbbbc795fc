"""Simulation parameters shared by the stochastic engines."""
from dataclasses import dataclass, replace

from .errors import ConfigError

# Defaults used throughout unless a run overrides them: dt = 0.02 and
# 400 trajectories per ensemble.
DEFAULT_DT = 0.02
DEFAULT_N_TRAJ = 400


@dataclass(frozen=True)
class SimParams:
    """Parameters of one stochastic run.

    tau     -- measurement characteristic time (large tau = weak measurement)
    gamma   -- local unitary noise strength (0 switches the noise off)
    dt      -- integration step
    t_final -- time horizon
    n_traj  -- ensemble size
    seed    -- 64-bit base seed; trajectory k uses the (seed, k) stream
    """

    tau: float
    gamma: float
    dt: float = DEFAULT_DT
    t_final: float = 10.0
    n_traj: int = DEFAULT_N_TRAJ
    seed: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.dt:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.t_final < 0:
            raise ConfigError(f"t_final must be >= 0, got {self.t_final}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def n_steps(self):
        """Number of steps covering [0, t_final] (t_final rounded to the grid)."""
        return int(round(self.t_final / self.dt))

    def with_(self, **kw):
        """Return a copy with some fields replaced."""
        return replace(self, **kw)
