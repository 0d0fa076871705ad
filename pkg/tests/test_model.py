import dataclasses

import numpy as np
import pytest

from asyncmtc.dictionary import effective_preamble
from asyncmtc.model import (
    SystemConfig,
    complex_noise,
    dbm_to_watt,
    generate_ground_truth,
    generate_preambles,
    make_streams,
    noise_power,
    path_loss,
    realize,
    simulate_received_signal,
)
from asyncmtc.oracles import received_by_slots


def small(**kw):
    base = dict(num_devices=6, num_antennas=3, preamble_len=5, max_delay=2, num_active=2)
    base.update(kw)
    return SystemConfig(**base)


def test_physical_defaults():
    cfg = SystemConfig()
    # 23 dBm and -169 dBm/Hz over 10 MHz
    assert cfg.tx_power == pytest.approx(0.199526231496887960, rel=1e-14)
    assert cfg.noise_var == pytest.approx(1.2589254117941672e-13, rel=1e-12)
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert noise_power(-174.0, 1.0) == pytest.approx(10 ** -20.4)


@pytest.mark.parametrize("kw", [
    dict(num_active=7), dict(max_delay=-1), dict(tx_power=0.0), dict(noise_var=-1.0),
    dict(preamble_len=0), dict(path_loss_model="free-space"),
])
def test_config_rejects_invalid(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_path_loss_values():
    assert path_loss(1000.0) == pytest.approx(1.54881661891248134e-13, rel=1e-12)
    assert path_loss(250.0) == pytest.approx(2.84279516019671346e-11, rel=1e-12)
    d = np.array([5.0, 50.0, 100.0, 250.0])
    assert np.all(np.diff(path_loss(d)) < 0)
    with pytest.raises(ValueError):
        path_loss(0.0)


def test_preambles_unit_modulus_and_deterministic():
    cfg = small(num_devices=1, num_active=1, preamble_len=3)
    a = generate_preambles(cfg, make_streams(9)["preambles"])
    assert a.sequences.shape == (1, 3)
    np.testing.assert_allclose(np.abs(a.sequences), 1.0, atol=1e-12)
    b = generate_preambles(cfg, make_streams(9)["preambles"])
    np.testing.assert_array_equal(a.sequences, b.sequences)

    big = generate_preambles(SystemConfig(), make_streams(0)["preambles"])
    assert big.sequences.shape == (100, 20)


@pytest.mark.parametrize("k", [0, 6])
def test_ground_truth_extremes(k):
    truth = generate_ground_truth(small(num_active=k), make_streams(1)["truth"])
    assert truth.activity.sum() == k
    assert truth.active_set.size == k


def test_ground_truth_reference_sizes():
    cfg = SystemConfig()
    for seed in range(5):
        truth = generate_ground_truth(cfg, make_streams(seed)["truth"])
        assert truth.active_set.size == 10
        assert truth.delays.min() >= 0 and truth.delays.max() <= 5
        assert np.all((truth.distances >= 5.0) & (truth.distances <= 250.0))
        np.testing.assert_allclose(truth.path_loss, path_loss(truth.distances))


def test_unit_path_loss_option():
    truth = generate_ground_truth(small(path_loss_model="unit"), make_streams(3)["truth"])
    np.testing.assert_array_equal(truth.path_loss, 1.0)


def test_channel_variance_follows_gain():
    cfg = SystemConfig(num_devices=4, num_antennas=50_000, num_active=1)
    truth = generate_ground_truth(cfg, make_streams(4)["truth"])
    emp = np.mean(np.abs(truth.channels) ** 2, axis=1)
    np.testing.assert_allclose(emp / truth.path_loss, 1.0, rtol=0.03)


def test_indicators():
    truth = generate_ground_truth(small(), make_streams(2)["truth"])
    beta = truth.indicators(2)
    assert beta.sum() == 2
    for n in truth.active_set:
        assert beta[n, truth.delays[n]]


def test_zero_signal_zero_noise():
    cfg = small(num_active=0, noise_var=0.0)
    real = realize(cfg, 5)
    assert real.received.shape == (cfg.preamble_len + cfg.max_delay, cfg.num_antennas)
    assert not np.any(real.received)


def test_single_device_structure():
    cfg = small(num_active=1, noise_var=0.0, max_delay=4)
    real = realize(cfg, 11)
    (n,) = real.truth.active_set
    tau = int(real.truth.delays[n])
    expected = np.sqrt(cfg.tx_power) * np.outer(
        effective_preamble(real.preambles.sequences[n], tau, cfg.max_delay), real.truth.channels[n])
    assert np.max(np.abs(real.received - expected)) <= 1e-12
    assert np.linalg.matrix_rank(real.received) == 1
    assert not np.any(real.received[:tau])
    assert not np.any(real.received[tau + cfg.preamble_len:])


@pytest.mark.parametrize("seed", range(8))
def test_matrix_form_matches_per_slot_sum(seed):
    cfg = small(num_active=2, noise_var=0.0, path_loss_model="unit")
    real = realize(cfg, seed)
    t = real.truth
    slots = received_by_slots(real.preambles.sequences, t.delays, t.activity, t.channels,
                              cfg.tx_power, cfg.max_delay)
    np.testing.assert_allclose(real.received, slots, rtol=0, atol=1e-12)


def test_noise_variance():
    rng = np.random.default_rng(0)
    z = complex_noise(rng, (400, 500), 2.5)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.5, rel=0.03)
    assert abs(np.mean(z)) < 0.02


def test_noise_enters_received_signal():
    cfg = small(num_active=0, noise_var=0.7, num_antennas=20_000)
    y = realize(cfg, 0).received
    assert np.mean(np.abs(y) ** 2) == pytest.approx(0.7, rel=0.03)


def test_dimension_mismatch_rejected():
    cfg = small()
    real = realize(cfg, 0)
    with pytest.raises(ValueError):
        simulate_received_signal(real.preambles, real.truth, dataclasses.replace(cfg, num_antennas=4),
                                 np.random.default_rng(0))


def test_realize_replayable():
    a, b = realize(small(), 42), realize(small(), 42)
    np.testing.assert_array_equal(a.received, b.received)
    c = realize(small(), 43)
    assert not np.array_equal(a.received, c.received)
