"""Reference computations used to cross-check the production paths.

Everything here works on the dense extended dictionary and shares no code
with the BCD kernel.  Only tests and ``selftest`` use it.
"""
from __future__ import annotations

import math

import numpy as np


def dense_objective(a_ext: np.ndarray, y: np.ndarray, x: np.ndarray, p: float, rho: float) -> float:
    """Objective with X stacked as a ((max_delay+1) N, M) matrix."""
    r = y - math.sqrt(p) * (a_ext @ x)
    return 0.5 * float(np.sum(np.abs(r) ** 2)) + rho * float(np.sum(np.linalg.norm(x, axis=1)))


def group_prox(v: np.ndarray, t: float) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    scale = np.maximum(0.0, 1.0 - t / np.where(norms > 0, norms, 1.0))
    return v * scale


def proximal_gradient(
    a_ext: np.ndarray,
    y: np.ndarray,
    p: float,
    rho: float,
    tol: float = 1e-13,
    max_iter: int = 200_000,
) -> tuple[np.ndarray, float]:
    """Accelerated proximal gradient with adaptive restart.

    Stops once the fixed-point residual ``||X - prox(X - step*grad)||`` is below
    ``tol`` relative to ``||X||``.  Returns the row-stacked solution and its
    objective value.
    """
    sqrt_p = math.sqrt(p)
    lip = p * np.linalg.norm(a_ext, 2) ** 2
    step = 1.0 / lip
    x = np.zeros((a_ext.shape[1], y.shape[1]), dtype=complex)
    z = x.copy()
    theta = 1.0
    f_prev = dense_objective(a_ext, y, x, p, rho)
    for _ in range(max_iter):
        grad = -sqrt_p * (a_ext.conj().T @ (y - sqrt_p * (a_ext @ z)))
        x_new = group_prox(z - step * grad, step * rho)
        f_new = dense_objective(a_ext, y, x_new, p, rho)
        moved = float(np.linalg.norm(x_new - x))
        if f_new > f_prev:
            # function-value restart: drop the momentum
            theta = 1.0
            z = x_new
        else:
            theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta**2))
            z = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            theta = theta_new
        x, f_prev = x_new, f_new
        if moved <= tol * max(float(np.linalg.norm(x)), 1e-300):
            break
    return x, dense_objective(a_ext, y, x, p, rho)


def stack_blocks(blocks: np.ndarray) -> np.ndarray:
    """(N, max_delay + 1, M) blocks to the row-stacked extended matrix."""
    n, t, m = blocks.shape
    return blocks.reshape(n * t, m)


def received_by_slots(preambles: np.ndarray, delays, active, channels, p: float, max_delay: int) -> np.ndarray:
    """Noiseless received frame assembled one time slot at a time."""
    n_dev, L = preambles.shape
    out = np.zeros((L + max_delay, channels.shape[1]), dtype=complex)
    for j in range(L + max_delay):
        for n in range(n_dev):
            if not active[n]:
                continue
            l = j - delays[n]
            if 0 <= l < L:
                out[j] += channels[n] * math.sqrt(p) * preambles[n, l]
    return out
