"""Shifted preambles and the implicit extended dictionary.

The extended dictionary has one column per (device, shift) pair, ordered
device-major and shift-minor.  It is never stored densely on the hot path;
each column is a preamble placed in an L-row window of the
(L + max_delay)-row frame, so products against it only touch that window.
Device and shift indices are 0-based throughout.
"""
from __future__ import annotations

import numpy as np

UNIT_MODULUS_TOL = 1e-12


def effective_preamble(a: np.ndarray, tau: int, max_delay: int) -> np.ndarray:
    """Zero-pad ``a`` with ``tau`` leading and ``max_delay - tau`` trailing zeros."""
    a = np.asarray(a)
    if not 0 <= tau <= max_delay:
        raise ValueError(f"shift {tau} outside [0, {max_delay}]")
    out = np.zeros(a.size + max_delay, dtype=np.result_type(a, complex))
    out[tau:tau + a.size] = a
    return out


def matched_filter(a: np.ndarray, tau: int, r: np.ndarray) -> np.ndarray:
    """Correlate ``a`` shifted by ``tau`` against every column of ``r``.

    Equals ``effective_preamble(a, tau, .).conj() @ r`` but reads only the
    L rows the shifted preamble occupies.
    """
    a = np.asarray(a)
    if tau < 0 or tau + a.size > r.shape[0]:
        raise ValueError(f"shift {tau} does not fit a {r.shape[0]}-row frame")
    return a.conj() @ r[tau:tau + a.size]


class ExtendedDictionary:
    """All shifted preambles of a preamble book, stored implicitly.

    Parameters
    ----------
    preambles : array_like, shape (N, L)
        Unit-modulus preamble symbols, one row per device.
    max_delay : int
        Largest admissible integer delay in symbols.
    """

    def __init__(self, preambles, max_delay: int):
        seq = np.asarray(getattr(preambles, "sequences", preambles), dtype=complex)
        if seq.ndim != 2:
            raise ValueError("preambles must be an (N, L) array")
        if max_delay < 0:
            raise ValueError("max_delay must be >= 0")
        if not np.all(np.abs(np.abs(seq) - 1.0) <= UNIT_MODULUS_TOL):
            # the closed-form block update relies on every column having norm^2 == L
            raise ValueError("preamble symbols must have unit modulus")
        self.preambles = np.ascontiguousarray(seq)
        self.preambles.flags.writeable = False
        self.max_delay = int(max_delay)

    @property
    def num_devices(self) -> int:
        return self.preambles.shape[0]

    @property
    def preamble_len(self) -> int:
        return self.preambles.shape[1]

    @property
    def num_shifts(self) -> int:
        return self.max_delay + 1

    @property
    def num_rows(self) -> int:
        return self.preamble_len + self.max_delay

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_rows, self.num_shifts * self.num_devices

    def column_index(self, n: int, tau: int) -> int:
        if not (0 <= n < self.num_devices and 0 <= tau <= self.max_delay):
            raise IndexError(f"block ({n}, {tau}) out of range")
        return n * self.num_shifts + tau

    def block_of(self, j: int) -> tuple[int, int]:
        if not 0 <= j < self.shape[1]:
            raise IndexError(f"column {j} out of range")
        return divmod(j, self.num_shifts)

    def column(self, n: int, tau: int) -> np.ndarray:
        self.column_index(n, tau)
        return effective_preamble(self.preambles[n], tau, self.max_delay)

    def dense(self) -> np.ndarray:
        """Materialize the full (L + max_delay) x (max_delay + 1) N matrix."""
        out = np.zeros(self.shape, dtype=complex)
        L = self.preamble_len
        for tau in range(self.num_shifts):
            out[tau:tau + L, tau::self.num_shifts] = self.preambles.T
        return out

    def matched_filter(self, n: int, tau: int, r: np.ndarray) -> np.ndarray:
        return matched_filter(self.preambles[n], tau, r)

    def correlate_all(self, r: np.ndarray) -> np.ndarray:
        """Matched-filter outputs for every block, shape (N, max_delay + 1, M)."""
        L = self.preamble_len
        conj = self.preambles.conj()
        return np.stack([conj @ r[tau:tau + L] for tau in range(self.num_shifts)], axis=1)

    def synthesize(self, blocks: np.ndarray) -> np.ndarray:
        """Compute ``A_ext @ X_ext`` for blocks of shape (N, max_delay + 1, M)."""
        L = self.preamble_len
        out = np.zeros((self.num_rows, blocks.shape[2]), dtype=complex)
        for tau in range(self.num_shifts):
            out[tau:tau + L] += self.preambles.T @ blocks[:, tau, :]
        return out
