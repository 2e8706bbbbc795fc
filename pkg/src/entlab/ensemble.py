"""Monte Carlo ensemble machinery: averages, post-selection, steady states,
and parameter sweeps.

Trajectories are embarrassingly parallel; each one draws from its own
counter-based stream keyed by (seed, trajectory index) and results are
reduced in trajectory order, so ensemble statistics are bit-identical for
any thread count.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyBinError, EntlabError
from .kraus import trajectory_c2
from .params import SimParams
from .sde import trajectory_c2_sde
from .state import normalize

DEFAULT_Q0 = np.full(4, 0.5)  # unentangled symmetric preparation
BACKENDS = ("kraus", "sde")

# steady-state window defaults: the transient has died out well before t = 15
DEFAULT_BURN_IN = 15.0
DEFAULT_WINDOW = 15.0


@dataclass(frozen=True)
class EnsembleResult:
    """Per-time ensemble mean of C^2 with standard errors.

    stderr is None for single-trajectory ensembles. c2_matrix (n_traj x
    n_times) is kept only when requested, for post-selection.
    """

    times: np.ndarray
    mean_c2: np.ndarray
    stderr: np.ndarray | None
    n_traj: int
    params: SimParams
    backend: str
    q0: np.ndarray
    n_aborted: int = 0
    c2_matrix: np.ndarray | None = field(default=None, repr=False)
    selection: tuple | None = None  # (lo, hi) bin of final C^2 if post-selected


def _c2_fn(backend):
    if backend == "kraus":
        return trajectory_c2
    if backend == "sde":
        return trajectory_c2_sde
    raise EntlabError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def run_ensemble(q0, params, backend="kraus", keep_trajectories=False,
                 threads=1, max_abort_fraction=0.01):
    """Simulate params.n_traj independent trajectories and average C^2.

    Aborted trajectories (numerical collapse) are excluded from the
    statistics and counted; the run fails if more than max_abort_fraction
    of the ensemble aborts.
    """
    q0 = normalize(DEFAULT_Q0 if q0 is None else q0)
    fn = _c2_fn(backend)
    n = params.n_traj
    n_steps = params.n_steps
    c2 = np.full((n, n_steps + 1), np.nan)
    aborted = np.zeros(n, dtype=bool)

    def work(k):
        series, abort = fn(q0, params, k)
        if abort >= 0:
            aborted[k] = True
        else:
            c2[k] = series

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n)))
    else:
        for k in range(n):
            work(k)

    n_bad = int(aborted.sum())
    if n_bad > max_abort_fraction * n:
        raise EntlabError(f"{n_bad}/{n} trajectories aborted "
                          f"(limit {max_abort_fraction:.0%})")
    good = c2[~aborted]
    times = params.dt * np.arange(n_steps + 1)
    mean = good.mean(axis=0)
    stderr = good.std(axis=0, ddof=1) / math.sqrt(good.shape[0]) if good.shape[0] > 1 else None
    return EnsembleResult(times, mean, stderr, good.shape[0], params, backend, q0,
                          n_aborted=n_bad,
                          c2_matrix=good if keep_trajectories else None)


def post_select(result, lo, hi):
    """Condition an ensemble on final C^2 in [lo, hi].

    Requires a result built with keep_trajectories=True. An empty bin
    raises EmptyBinError carrying a decile histogram of the final C^2.
    """
    if result.c2_matrix is None:
        raise EntlabError("post_select needs an ensemble with keep_trajectories=True")
    final = result.c2_matrix[:, -1]
    sel = (final >= lo) & (final <= hi)
    if not np.any(sel):
        hist = np.histogram(final, bins=10, range=(0.0, 1.0))
        raise EmptyBinError((hist[1], hist[0]),
                            f"no trajectories with final C^2 in [{lo}, {hi}]")
    sub = result.c2_matrix[sel]
    mean = sub.mean(axis=0)
    stderr = (sub.std(axis=0, ddof=1) / math.sqrt(sub.shape[0])
              if sub.shape[0] > 1 else None)
    return replace(result, mean_c2=mean, stderr=stderr, n_traj=int(sel.sum()),
                   c2_matrix=sub, selection=(lo, hi))


def decile_bins(result):
    """Decile edges of the final C^2 distribution (for default post-selection)."""
    if result.c2_matrix is None:
        raise EntlabError("decile_bins needs an ensemble with keep_trajectories=True")
    return np.quantile(result.c2_matrix[:, -1], np.linspace(0.0, 1.0, 11))


@dataclass(frozen=True)
class SteadyStateEstimate:
    mean_c: float
    err_c: float
    mean_c2: float
    err_c2: float
    burn_in: float
    window: float
    nonstationary: bool   # window halves disagree beyond 3 sigma


def block_bootstrap_stderr(window_matrix, rng, block_len=None, n_boot=200):
    """Bootstrap stderr of the time-and-ensemble mean of an (n_traj, n_t) window.

    Trajectories are resampled with replacement; within each resampled
    trajectory a circular time-block shift is applied, so temporal
    autocorrelation inside the window is preserved rather than assumed away.
    """
    m = np.asarray(window_matrix, float)
    n, nt = m.shape
    if block_len is None:
        block_len = max(1, nt // 10)
    reps = np.empty(n_boot)
    for b in range(n_boot):
        rows = rng.integers(0, n, n)
        shifts = rng.integers(0, nt, n)
        acc = 0.0
        for r, s in zip(rows, shifts):
            acc += np.roll(m[r], int(s)).mean()
        reps[b] = acc / n
    return float(np.std(reps, ddof=1))


def steady_state_estimate(params, backend="kraus", burn_in=DEFAULT_BURN_IN,
                          window=DEFAULT_WINDOW, q0=None, threads=1):
    """Time-and-ensemble average of C and C^2 over [burn_in, burn_in+window].

    The run must cover the window (t_final >= burn_in + window). Error bars
    come from a block bootstrap over trajectories and circular time blocks;
    a nonstationarity flag is raised when the two window halves disagree by
    more than 3 combined sigma.
    """
    if params.t_final + 1e-12 < burn_in + window:
        raise EntlabError(f"t_final={params.t_final} shorter than "
                          f"burn_in+window={burn_in + window}")
    res = run_ensemble(q0, params, backend=backend, keep_trajectories=True,
                       threads=threads)
    sel = (res.times >= burn_in) & (res.times <= burn_in + window)
    win_c2 = res.c2_matrix[:, sel]
    win_c = np.sqrt(win_c2)
    rng = np.random.default_rng(params.seed ^ 0x5EED)
    err_c2 = block_bootstrap_stderr(win_c2, rng)
    err_c = block_bootstrap_stderr(win_c, rng)
    # paired half-window comparison: each trajectory contributes one
    # first-half minus second-half difference, so between-trajectory spread
    # cancels and the 3-sigma test is properly calibrated
    half = win_c2.shape[1] // 2
    d = win_c2[:, :half].mean(axis=1) - win_c2[:, half:].mean(axis=1)
    if d.size > 1 and d.std(ddof=1) > 0:
        nonstat = abs(d.mean()) > 3.0 * d.std(ddof=1) / math.sqrt(d.size)
    else:
        nonstat = False
    return SteadyStateEstimate(float(win_c.mean()), err_c, float(win_c2.mean()),
                               err_c2, burn_in, window, nonstat)


@dataclass(frozen=True)
class SweepResult:
    """Steady-state entanglement across a noise-strength grid at fixed tau."""

    tau: float
    gammas: np.ndarray
    mean_c: np.ndarray
    err_c: np.ndarray
    mean_c2: np.ndarray
    err_c2: np.ndarray
    burn_in: float
    window: float
    nonstationary: np.ndarray  # per-point flags


def sweep_gamma(tau, gamma_grid, params, backend="kraus", burn_in=DEFAULT_BURN_IN,
                window=DEFAULT_WINDOW, q0=None, threads=1):
    """steady_state_estimate at each noise strength of the grid."""
    gamma_grid = np.asarray(gamma_grid, float)
    if gamma_grid.size == 0:
        raise EntlabError("empty gamma grid")
    rows = []
    for g in gamma_grid:
        p = params.with_(tau=tau, gamma=float(g))
        rows.append(steady_state_estimate(p, backend=backend, burn_in=burn_in,
                                          window=window, q0=q0, threads=threads))
    return SweepResult(
        tau=tau, gammas=gamma_grid,
        mean_c=np.array([r.mean_c for r in rows]),
        err_c=np.array([r.err_c for r in rows]),
        mean_c2=np.array([r.mean_c2 for r in rows]),
        err_c2=np.array([r.err_c2 for r in rows]),
        burn_in=burn_in, window=window,
        nonstationary=np.array([r.nonstationary for r in rows]),
    )


def is_nonmonotonic(values, errors):
    """3-sigma interior-maximum test used on sweep results.

    True when the grid maximum lies strictly inside, exceeds the first
    point by more than 3 combined sigma, and the last point sits below the
    maximum.
    """
    values = np.asarray(values, float)
    errors = np.asarray(errors, float)
    k = int(np.argmax(values))
    if k == 0 or k == values.size - 1:
        return False
    lift = values[k] - values[0]
    sig = math.sqrt(errors[k] ** 2 + errors[0] ** 2)
    return lift > 3.0 * sig and values[-1] < values[k]


@dataclass(frozen=True)
class DeviationReport:
    """Ensemble mean against the weak-coupling closed form, per time."""

    times: np.ndarray
    abs_dev: np.ndarray        # |mean - closed form|
    z_scores: np.ndarray       # abs_dev / stderr
    max_abs_dev: float
    max_z: float
    linear_max_abs_dev: float  # same run against the linear approximation


def compare_to_closed_form(result, params=None):
    """Per-time deviation of an EnsembleResult from the closed-form curve."""
    from .diagram import closed_form_c2, linear_c2
    params = params or result.params
    cf = closed_form_c2(result.times, params)
    lin = linear_c2(result.times, params)
    dev = np.abs(result.mean_c2 - cf)
    if result.stderr is None:
        raise EntlabError("deviation report needs ensemble standard errors")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(result.stderr > 0, dev / result.stderr, np.inf)
    z[dev == 0.0] = 0.0
    return DeviationReport(result.times, dev, z, float(dev.max()), float(z.max()),
                           float(np.abs(result.mean_c2 - lin).max()))
