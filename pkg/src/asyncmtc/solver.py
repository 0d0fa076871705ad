"""Group-LASSO solver: cyclic block coordinate descent with closed-form blocks.

Problem solved for a fixed penalty ``rho``::

    minimize_X  0.5 * ||Y - sqrt(p) A_ext X||_F^2 + rho * sum_{n,tau} ||x_{n,tau}||_2

Every block update is the exact minimizer of the objective restricted to one
row of ``X``; the residual ``Y - sqrt(p) A_ext X`` is maintained in place so
an update costs O(L M).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from ._kernels import bcd_sweep
from .dictionary import ExtendedDictionary, matched_filter

logger = logging.getLogger(__name__)

RESIDUAL_CHECK_TOL = 1e-9


def block_shrink(c: np.ndarray, rho: float, p: float, L: int) -> np.ndarray:
    """Minimizer of the one-block problem given its matched-filter output ``c``.

    Returns ``gamma * c`` with ``gamma = 1/(L sqrt p) - rho/(L p ||c||)`` when
    ``||c|| > rho / sqrt(p)`` and the zero vector otherwise.
    """
    sqrt_p = math.sqrt(p)
    cnorm = float(np.linalg.norm(c))
    if cnorm > rho / sqrt_p:
        gamma = 1.0 / (L * sqrt_p) - rho / (L * p * cnorm)
        return gamma * c
    return np.zeros_like(c, dtype=complex)


def block_update(a_n: np.ndarray, tau: int, y_tilde: np.ndarray, rho: float, p: float) -> np.ndarray:
    """Exact minimizer over one block of ``0.5||Y~ - sqrt(p) a_ext x^T||^2 + rho||x||``.

    ``y_tilde`` is the (L + max_delay) x M residual with every other block's
    contribution removed; ``a_n`` is the device's length-L preamble.
    """
    if rho <= 0 or p <= 0:
        raise ValueError("rho and p must be positive")
    c = matched_filter(a_n, tau, y_tilde)
    return block_shrink(c, rho, p, len(a_n))


def residual_of(y: np.ndarray, dictionary: ExtendedDictionary, blocks: np.ndarray, p: float) -> np.ndarray:
    return y - math.sqrt(p) * dictionary.synthesize(blocks)


def objective(blocks: np.ndarray, y: np.ndarray, dictionary: ExtendedDictionary, p: float, rho: float) -> float:
    """Group-LASSO objective for blocks of shape (N, max_delay + 1, M)."""
    r = residual_of(y, dictionary, blocks, p)
    return 0.5 * float(np.vdot(r, r).real) + rho * float(np.linalg.norm(blocks, axis=2).sum())


@dataclass
class SolverOptions:
    """BCD stopping rule and diagnostics.

    ``track_updates`` records the objective after every single block update;
    ``debug`` re-derives the residual from scratch after every sweep and
    raises if the maintained copy has drifted.
    """

    rel_tol: float = 1e-4
    max_sweeps: int = 500
    refresh_every: int = 50
    track_updates: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass
class SolverState:
    blocks: np.ndarray  # (N, max_delay + 1, M)
    residual: np.ndarray  # (L + max_delay, M)
    rho: float
    objective_trace: list[float] = field(default_factory=list)  # index 0 is the starting point
    update_trace: list[np.ndarray] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def block_norms(self) -> np.ndarray:
        return np.linalg.norm(self.blocks, axis=2)

    def support(self) -> np.ndarray:
        return np.any(self.blocks != 0, axis=2)


def _current_objective(residual: np.ndarray, blocks: np.ndarray, rho: float) -> float:
    return 0.5 * float(np.vdot(residual, residual).real) + rho * float(np.linalg.norm(blocks, axis=2).sum())


def bcd_solve(
    y: np.ndarray,
    dictionary: ExtendedDictionary,
    rho: float,
    p: float,
    opts: SolverOptions | None = None,
    warm_start: SolverState | np.ndarray | None = None,
) -> SolverState:
    """Run cyclic BCD sweeps until the relative objective decrease drops to ``rel_tol``.

    Blocks are visited device-major, shift-minor.  A warm start (a previous
    state or a block array) is copied, never modified.  If ``max_sweeps`` is
    hit first the returned state has ``converged = False``.
    """
    opts = opts or SolverOptions()
    if rho <= 0:
        raise ValueError("rho must be positive")
    if p <= 0:
        raise ValueError("p must be positive")
    y = np.ascontiguousarray(y, dtype=complex)
    if y.shape[0] != dictionary.num_rows:
        raise ValueError(f"Y has {y.shape[0]} rows, dictionary expects {dictionary.num_rows}")
    shape = (dictionary.num_devices, dictionary.num_shifts, y.shape[1])

    if warm_start is None:
        blocks = np.zeros(shape, dtype=complex)
        residual = y.copy()
    else:
        init = warm_start.blocks if isinstance(warm_start, SolverState) else warm_start
        if init.shape != shape:
            raise ValueError(f"warm start has shape {init.shape}, expected {shape}")
        blocks = np.array(init, dtype=complex, order="C")
        residual = np.ascontiguousarray(residual_of(y, dictionary, blocks, p))

    sqrt_p = math.sqrt(p)
    n_blocks = shape[0] * shape[1]
    y_scale = float(np.linalg.norm(y))
    state = SolverState(blocks, residual, float(rho))
    prev = _current_objective(residual, blocks, rho)
    state.objective_trace.append(prev)
    scratch = np.empty(n_blocks if opts.track_updates else 0)

    for t in range(1, opts.max_sweeps + 1):
        bcd_sweep(dictionary.preambles, blocks, residual, sqrt_p, float(rho),
                  opts.track_updates, scratch, prev)
        if opts.track_updates:
            state.update_trace.append(scratch.copy())
        if opts.debug or t % opts.refresh_every == 0:
            fresh = residual_of(y, dictionary, blocks, p)
            drift = float(np.linalg.norm(fresh - residual))
            if opts.debug and drift > RESIDUAL_CHECK_TOL * max(y_scale, np.finfo(float).tiny):
                raise AssertionError(f"residual drift {drift:.3e} after sweep {t}")
            residual[...] = fresh
        cur = _current_objective(residual, blocks, rho)
        state.objective_trace.append(cur)
        state.sweeps = t
        if prev == 0.0 or (prev - cur) / prev <= opts.rel_tol:
            state.converged = True
            break
        prev = cur

    if not state.converged:
        logger.warning("BCD stopped at max_sweeps=%d without meeting rel_tol=%g",
                       opts.max_sweeps, opts.rel_tol)
    return state
