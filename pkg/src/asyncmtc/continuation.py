"""Penalty continuation and readout of activity, delay and channel estimates.

The group-LASSO penalty is grown geometrically, each solve warm-started from
the previous one, until the thresholded solution has at most one nonzero
shift per device.  That solution is then read out per device.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .dictionary import ExtendedDictionary
from .solver import SolverOptions, SolverState, bcd_solve

logger = logging.getLogger(__name__)


@dataclass
class ContinuationOptions:
    """Penalty schedule and sparsity threshold.

    With ``rho_initial=None`` the first penalty is picked from the data.  If
    the noise variance is known it is ``rho_noise_factor * sqrt(p sigma^2 L M)``,
    a multiple of the typical matched-filter norm of pure noise.  Otherwise
    it is ``rho_scale * rho_max``, where ``rho_max`` is the smallest penalty
    at which the all-zero solution is optimal.
    """

    rho_initial: float | None = None
    rho_noise_factor: float = 5.0
    rho_scale: float = 0.003
    growth: float = 1.5
    zeta: float = 0.1
    max_outer_rounds: int = 30
    debias: bool = False

    def __post_init__(self):
        if self.growth <= 1:
            raise ValueError("growth factor must exceed 1")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if self.rho_initial is not None and self.rho_initial <= 0:
            raise ValueError("rho_initial must be positive")
        if self.rho_scale <= 0 or self.rho_noise_factor <= 0:
            raise ValueError("rho_scale and rho_noise_factor must be positive")
        if self.max_outer_rounds < 1:
            raise ValueError("max_outer_rounds must be >= 1")


@dataclass
class DetectionResult:
    activity: np.ndarray  # (N,) bool
    delays: np.ndarray  # (N,) int, -1 where inactive
    channels: np.ndarray  # (N, M) complex, zero where inactive
    indicators: np.ndarray  # (N, max_delay + 1) bool
    rho_final: float = float("nan")
    rounds_used: int = 0
    rho_path: list[float] = field(default_factory=list)
    forced_feasible: bool = False
    solver_converged: bool = True
    state: SolverState | None = field(default=None, repr=False)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.activity)


def rho_max(y: np.ndarray, dictionary: ExtendedDictionary, p: float) -> float:
    """Smallest penalty for which every block update returns zero from X = 0."""
    corr = dictionary.correlate_all(y)
    return math.sqrt(p) * float(np.linalg.norm(corr, axis=2).max(initial=0.0))


def initial_rho(
    y: np.ndarray,
    dictionary: ExtendedDictionary,
    p: float,
    copts: ContinuationOptions,
    noise_var: float | None = None,
) -> float:
    if copts.rho_initial is not None:
        return copts.rho_initial
    if noise_var:
        m = y.shape[1]
        return copts.rho_noise_factor * math.sqrt(p * noise_var * dictionary.preamble_len * m)
    scale = rho_max(y, dictionary, p)
    # Y == 0: any positive penalty gives the all-zero solution
    return copts.rho_scale * scale if scale > 0 else 1.0


def estimate_gains(blocks: np.ndarray) -> np.ndarray:
    """Fallback large-scale gains: the strongest per-antenna block power of each device."""
    m = blocks.shape[2]
    return (np.linalg.norm(blocks, axis=2) ** 2).max(axis=1) / m


def threshold_blocks(blocks: np.ndarray, gains: np.ndarray, zeta: float) -> np.ndarray:
    """Zero every block whose per-antenna power falls below ``zeta`` times its device gain."""
    if not 0 < zeta < 1:
        raise ValueError("zeta must lie in (0, 1)")
    m = blocks.shape[2]
    power = np.linalg.norm(blocks, axis=2) ** 2 / m
    keep = power >= zeta * np.asarray(gains, dtype=float)[:, None]
    return np.where(keep[:, :, None], blocks, 0)


def check_group_constraint(blocks: np.ndarray) -> bool:
    """True iff every device has at most one nonzero shift block."""
    nonzero = np.any(blocks != 0, axis=2)
    return bool(np.all(nonzero.sum(axis=1) <= 1))


def force_feasible(blocks: np.ndarray) -> np.ndarray:
    """Keep only the largest-norm block of each device (ties go to the smaller shift)."""
    norms = np.linalg.norm(blocks, axis=2)
    best = np.argmax(norms, axis=1)
    out = np.zeros_like(blocks)
    rows = np.arange(blocks.shape[0])
    out[rows, best] = blocks[rows, best]
    return out


def read_out(blocks: np.ndarray) -> DetectionResult:
    if not check_group_constraint(blocks):
        raise ValueError("blocks violate the one-shift-per-device constraint")
    indicators = np.any(blocks != 0, axis=2)
    activity = indicators.any(axis=1)
    delays = np.where(activity, np.argmax(indicators, axis=1), -1)
    channels = np.zeros((blocks.shape[0], blocks.shape[2]), dtype=complex)
    act = np.flatnonzero(activity)
    channels[act] = blocks[act, delays[act]]
    return DetectionResult(activity, delays, channels, indicators)


def debias_channels(
    result: DetectionResult, y: np.ndarray, dictionary: ExtendedDictionary, p: float
) -> np.ndarray:
    """Least-squares channel refit on the detected (device, shift) columns."""
    act = result.active_set
    channels = np.zeros_like(result.channels)
    if act.size == 0:
        return channels
    cols = np.stack([dictionary.column(n, int(result.delays[n])) for n in act], axis=1)
    sol, *_ = np.linalg.lstsq(math.sqrt(p) * cols, y, rcond=None)
    channels[act] = sol
    return channels


def solve_with_continuation(
    y: np.ndarray,
    dictionary: ExtendedDictionary,
    p: float,
    copts: ContinuationOptions | None = None,
    sopts: SolverOptions | None = None,
    gains: np.ndarray | None = None,
    noise_var: float | None = None,
) -> DetectionResult:
    """Detect active devices, their delays and channels from ``y``.

    ``gains`` are the per-device large-scale gains used by the sparsity
    threshold; when omitted they are estimated from the solution itself.
    ``noise_var`` only affects the choice of the first penalty.
    """
    copts = copts or ContinuationOptions()
    sopts = sopts or SolverOptions()
    rho = initial_rho(y, dictionary, p, copts, noise_var)

    state = None
    path: list[float] = []
    converged = True
    kept = None
    for _ in range(copts.max_outer_rounds):
        state = bcd_solve(y, dictionary, rho, p, sopts, warm_start=state)
        path.append(rho)
        converged &= state.converged
        g = estimate_gains(state.blocks) if gains is None else gains
        kept = threshold_blocks(state.blocks, g, copts.zeta)
        if check_group_constraint(kept):
            forced = False
            break
        rho *= copts.growth
    else:
        logger.warning("constraint still violated after %d rounds; forcing feasibility",
                       copts.max_outer_rounds)
        kept = force_feasible(kept)
        forced = True

    result = read_out(kept)
    result.rho_final = path[-1]
    result.rounds_used = len(path)
    result.rho_path = path
    result.forced_feasible = forced
    result.solver_converged = converged
    result.state = state
    if copts.debias:
        result.channels = debias_channels(result, y, dictionary, p)
    return result
