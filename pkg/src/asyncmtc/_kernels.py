"""Compiled inner loop of the block coordinate descent sweep."""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _window_energy(r, start, length):
    s = 0.0
    for l in range(start, start + length):
        for m in range(r.shape[1]):
            v = r[l, m]
            s += v.real * v.real + v.imag * v.imag
    return s


@numba.njit(cache=True)
def bcd_sweep(preambles, blocks, residual, sqrt_p, rho, record, update_trace, start_obj):
    """One cyclic pass over all (device, shift) blocks, updating in place.

    ``residual`` must equal ``Y - sqrt_p * A_ext @ X_ext`` on entry and is kept
    consistent on exit.  When ``record`` is set, the objective after every
    single block update is written to ``update_trace`` (tracked incrementally
    from ``start_obj`` by the change in the touched residual window).
    Returns the number of blocks whose value changed.
    """
    n_dev, L = preambles.shape
    n_shift = blocks.shape[1]
    M = blocks.shape[2]
    p = sqrt_p * sqrt_p
    thresh = rho / sqrt_p
    c = np.empty(M, dtype=np.complex128)
    diff = np.empty(M, dtype=np.complex128)
    obj = start_obj
    changed = 0
    k = 0
    for n in range(n_dev):
        a = preambles[n]
        for tau in range(n_shift):
            # c = a_ext^H (residual + sqrt_p a_ext x_old^T): Steps 2.2 and 2.4 fused
            for m in range(M):
                c[m] = sqrt_p * L * blocks[n, tau, m]
            for l in range(L):
                ac = a[l].conjugate()
                row = tau + l
                for m in range(M):
                    c[m] += ac * residual[row, m]
            cnorm2 = 0.0
            old2 = 0.0
            for m in range(M):
                cnorm2 += c[m].real * c[m].real + c[m].imag * c[m].imag
                x = blocks[n, tau, m]
                old2 += x.real * x.real + x.imag * x.imag
            cnorm = math.sqrt(cnorm2)
            if cnorm > thresh:
                gamma = 1.0 / (L * sqrt_p) - rho / (L * p * cnorm)
            else:
                gamma = 0.0
            nonzero = False
            new2 = 0.0
            for m in range(M):
                new = gamma * c[m]
                diff[m] = blocks[n, tau, m] - new
                if diff[m] != 0:
                    nonzero = True
                blocks[n, tau, m] = new
                new2 += new.real * new.real + new.imag * new.imag
            if nonzero:
                changed += 1
                before = 0.0
                if record:
                    before = _window_energy(residual, tau, L)
                for l in range(L):
                    s = sqrt_p * a[l]
                    row = tau + l
                    for m in range(M):
                        residual[row, m] += s * diff[m]
                if record:
                    after = _window_energy(residual, tau, L)
                    obj += 0.5 * (after - before) + rho * (math.sqrt(new2) - math.sqrt(old2))
            if record:
                update_trace[k] = obj
            k += 1
    return changed
