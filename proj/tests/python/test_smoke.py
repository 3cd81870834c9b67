import math

import numpy as np
import pytest

import optolink as ol


def test_prbs_and_modulation():
    bits = ol.generate_prbs(10, seed=0x2A5)
    assert bits.shape == (1024,)
    assert int(bits.sum()) == 512
    field = ol.modulate(bits)
    assert field.shape == (1024 * 32,)
    assert np.mean(np.abs(field) ** 2) == pytest.approx(1e-3, rel=1e-12)
    assert np.all(field.imag == 0)


def test_fiber_and_taps():
    n_taps, broadening, _ = ol.recommend_taps(10e9, 100e3, 2 * math.pi * 10e9, 50e-12)
    assert n_taps == 4
    assert broadening == pytest.approx(131.9e-12, rel=1e-3)
    t = (np.arange(4096) - 2048) / 320e9
    pulse = np.exp(-(t**2) / (2 * (30e-12) ** 2)).astype(complex)
    out = ol.propagate(pulse, 320e9, 60e3, alpha_db_per_km=0.0)
    assert np.sum(np.abs(out) ** 2) == pytest.approx(np.sum(np.abs(pulse) ** 2), rel=1e-10)


def test_device_and_receiver():
    phases = ol.phases_from_currents([10.0, 20.0, 0.0])
    assert phases == pytest.approx([0.0, 1.0, 4.0, 0.0])
    field = ol.modulate(ol.generate_prbs(7))
    out, el = ol.apply_device(field, 320e9, [1.0, 2.0, 3.0])
    assert out.shape == field.shape
    assert el > 0
    assert ol.noise_variance(10.0) == pytest.approx(0.0189 * 10 + 0.2263)
    samples, offset = ol.detect(field, 320e9, 10e9, -10.0, seed=3)
    assert samples.shape == (128 * 4,)
    assert 0 <= offset < 8


def test_metrics():
    rng = np.random.default_rng(1)
    x = rng.normal(size=512)
    assert ol.align(list(x), list(np.roll(x, 17))) == 17
    labels = np.array([0, 1] * 500, dtype=np.uint8)
    values = labels + rng.normal(scale=0.05, size=labels.size)
    ber, _, _ = ol.ber_count(values, labels)
    assert ber == 0.0
    assert ol.separation_loss(values, labels) < 0
    assert ol.ber_model(0.0, 1.0, 0.1, 0.1, 0.5) == pytest.approx(0.5 * math.erfc(0.5 / (0.1 * math.sqrt(2))))


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        ol.generate_prbs(10, seed=0)
    with pytest.raises(ol.DegenerateSignalError):
        ol.align([1.0] * 8, [1.0] * 8)


def test_pso_with_python_objective():
    rec = ol.train_pso(lambda x, seed: (x[0] - 1.5) ** 2 + (x[1] + 0.5) ** 2, [-5, -5], [5, 5], particles=10,
                       iterations=30)
    losses = rec["best_loss"]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-3


def test_link_simulator_and_gain():
    sim = ol.LinkSimulator(10.0, 0.0)
    prx = sim.prx_for_snr(11.2)
    assert sim.snr_db(prx) == pytest.approx(11.2, abs=1e-6)
    p = sim.measure_ber(-10.0, acquisitions=5)
    assert p["n_acquisitions"] == 5
    gain, status = ol.gain_report([-20, -10], [1e-1, 1e-5], [-17, -7], [1e-1, 1e-5], 1.0, 1e-3)
    assert status == "ok"
    assert gain == pytest.approx(2.0)


def test_run_scenario_writes_files(tmp_path):
    cfg = """
[scenario]
mode = fiber_only
length_km = 25
prx_dbm = -16:-12:2
acquisitions = 4
"""
    r = ol.run_scenario(cfg, str(tmp_path))
    run = tmp_path / r["hash"]
    assert (run / "ber_curve.csv").read_text().startswith("prx_dbm,ber_mean,ber_std,n_acquisitions")
    assert (run / "metadata.json").exists()
    assert len(r["points"]) == 3
    again = ol.run_scenario(cfg, str(tmp_path), resume=True)
    assert again["resumed"]
    assert [p["ber_mean"] for p in again["points"]] == [p["ber_mean"] for p in r["points"]]
