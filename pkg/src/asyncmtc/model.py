"""Scenario generation: preambles, device activity, delays, channels and Y.

All randomness is drawn from :class:`numpy.random.Generator` objects.  A
single integer seed is expanded into independent streams with
:func:`make_streams`, so the preamble book, the ground truth and the noise of
one realization can be regenerated separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .dictionary import effective_preamble

PATH_LOSS_MODELS = ("cellular", "unit")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power(psd_dbm_hz: float = -169.0, bandwidth_hz: float = 10e6) -> float:
    """Noise power per sample in watts for a flat PSD over ``bandwidth_hz``."""
    return dbm_to_watt(psd_dbm_hz + 10.0 * math.log10(bandwidth_hz))


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters.

    Defaults reproduce the reference scenario: 100 devices in a 250 m cell,
    10 active, delays up to 5 symbols, 23 dBm transmit power and
    -169 dBm/Hz noise over 10 MHz.
    """

    num_devices: int = 100
    num_antennas: int = 128
    preamble_len: int = 20
    max_delay: int = 5
    tx_power: float = dbm_to_watt(23.0)
    noise_var: float = noise_power(-169.0, 10e6)
    num_active: int = 10
    cell_radius: float = 250.0
    min_distance: float = 5.0
    path_loss_model: str = "cellular"
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_devices < 1 or self.num_antennas < 1 or self.preamble_len < 1:
            raise ValueError("num_devices, num_antennas and preamble_len must be >= 1")
        if self.max_delay < 0:
            raise ValueError("max_delay must be >= 0")
        if not 0 <= self.num_active <= self.num_devices:
            raise ValueError("num_active must lie in [0, num_devices]")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")
        if not 0 < self.min_distance < self.cell_radius:
            raise ValueError("need 0 < min_distance < cell_radius")
        if self.path_loss_model not in PATH_LOSS_MODELS:
            raise ValueError(f"unknown path_loss_model {self.path_loss_model!r}")

    @property
    def num_slots(self) -> int:
        return self.preamble_len + self.max_delay

    @property
    def num_shifts(self) -> int:
        return self.max_delay + 1


@dataclass(frozen=True)
class PreambleBook:
    sequences: np.ndarray  # (N, L) complex, unit modulus

    def __post_init__(self):
        seq = np.asarray(self.sequences)
        if seq.ndim != 2:
            raise ValueError("sequences must be a 2-D (N, L) array")
        if not np.allclose(np.abs(seq), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("preamble symbols must have unit modulus")

    @property
    def num_devices(self) -> int:
        return self.sequences.shape[0]

    @property
    def length(self) -> int:
        return self.sequences.shape[1]


@dataclass
class GroundTruth:
    activity: np.ndarray  # (N,) bool
    delays: np.ndarray  # (N,) int in [0, max_delay]
    path_loss: np.ndarray  # (N,) linear gains
    channels: np.ndarray  # (N, M) complex
    distances: np.ndarray = field(default=None, repr=False)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.activity)

    def indicators(self, max_delay: int) -> np.ndarray:
        """The (N, max_delay + 1) activity-and-delay indicator matrix."""
        beta = np.zeros((self.activity.size, max_delay + 1), dtype=bool)
        act = self.active_set
        beta[act, self.delays[act]] = True
        return beta


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Split one seed into the named, independent streams used by a realization.

    The spawn order is fixed (preambles, truth, noise) and must not change,
    otherwise stored experiment seeds stop reproducing their rows.
    """
    children = np.random.SeedSequence(seed).spawn(3)
    return {
        name: np.random.default_rng(child)
        for name, child in zip(("preambles", "truth", "noise"), children)
    }


def path_loss(distance) -> np.ndarray | float:
    """Linear channel gain for a 128.1 + 37.6 log10(d_km) dB path loss."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    gain = 10.0 ** (-(128.1 + 37.6 * np.log10(d / 1000.0)) / 10.0)
    return float(gain) if gain.ndim == 0 else gain


def generate_preambles(config: SystemConfig, rng: np.random.Generator) -> PreambleBook:
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(config.num_devices, config.preamble_len))
    return PreambleBook(np.exp(1j * phases))


def sample_distances(config: SystemConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    # uniform over the annulus area between min_distance and cell_radius
    r0, r1 = config.min_distance, config.cell_radius
    u = rng.uniform(size=size)
    return np.sqrt(r0**2 + u * (r1**2 - r0**2))


def generate_ground_truth(config: SystemConfig, rng: np.random.Generator) -> GroundTruth:
    n, m = config.num_devices, config.num_antennas
    activity = np.zeros(n, dtype=bool)
    activity[rng.choice(n, size=config.num_active, replace=False)] = True
    delays = rng.integers(0, config.max_delay + 1, size=n)
    distances = sample_distances(config, rng, n)
    if config.path_loss_model == "unit":
        gains = np.ones(n)
    else:
        gains = path_loss(distances)
    w = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    channels = np.sqrt(gains / 2.0)[:, None] * w
    return GroundTruth(activity, delays, gains, channels, distances)


def noiseless_signal(pre: PreambleBook, truth: GroundTruth, config: SystemConfig) -> np.ndarray:
    y = np.zeros((config.num_slots, config.num_antennas), dtype=complex)
    sqrt_p = math.sqrt(config.tx_power)
    for k in truth.active_set:
        a_bar = effective_preamble(pre.sequences[k], int(truth.delays[k]), config.max_delay)
        y += sqrt_p * np.outer(a_bar, truth.channels[k])
    return y


def complex_noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_received_signal(
    pre: PreambleBook,
    truth: GroundTruth,
    config: SystemConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received (L + max_delay) x M matrix: shifted preambles times channels plus AWGN."""
    if pre.num_devices != truth.activity.size or pre.num_devices != config.num_devices:
        raise ValueError("preamble book, ground truth and config disagree on N")
    if pre.length != config.preamble_len:
        raise ValueError("preamble length does not match config")
    if truth.channels.shape[1] != config.num_antennas:
        raise ValueError("channel dimension does not match config")
    y = noiseless_signal(pre, truth, config)
    if config.noise_var > 0:
        y += complex_noise(rng, y.shape, config.noise_var)
    return y


@dataclass
class Realization:
    config: SystemConfig
    preambles: PreambleBook
    truth: GroundTruth
    received: np.ndarray


def realize(config: SystemConfig, seed: int | None = None) -> Realization:
    """Draw one complete scenario instance from ``seed`` (default ``config.rng_seed``)."""
    streams = make_streams(config.rng_seed if seed is None else seed)
    pre = generate_preambles(config, streams["preambles"])
    truth = generate_ground_truth(config, streams["truth"])
    y = simulate_received_signal(pre, truth, config, streams["noise"])
    return Realization(config, pre, truth, y)
