"""Exception hierarchy for entlab."""


class EntlabError(Exception):
    """Base class for all entlab errors."""


class ZeroNormError(EntlabError):
    """A state vector collapsed to (numerically) zero norm."""


class TrajectoryAbortError(EntlabError):
    """A stochastic trajectory hit an unrecoverable numerical condition.

    Carries the step index at which the abort happened.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"trajectory aborted at step {step}")


class DivergedTrajectoryError(EntlabError):
    """An extremal phase-space integration blew up or stalled."""


class NoSolutionError(EntlabError):
    """Shooting failed to satisfy the boundary condition.

    ``best_residual`` records the smallest boundary mismatch seen.
    """

    def __init__(self, best_residual, message=None):
        self.best_residual = best_residual
        super().__init__(message or f"no shooting solution (best residual {best_residual:.3e})")


class ConfigError(EntlabError):
    """Invalid run configuration (bad value, unknown key, missing file)."""


class CatalogError(EntlabError):
    """The vertex catalog data file is malformed."""


class EmptyBinError(EntlabError):
    """A post-selection bin contains no trajectories.

    ``occupancy`` holds a (bin_edges, counts) histogram of the selection
    variable so the caller can see where the trajectories actually landed.
    """

    def __init__(self, occupancy, message=None):
        self.occupancy = occupancy
        super().__init__(message or "post-selection bin is empty")
