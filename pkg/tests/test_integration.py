"""End-to-end behavior on the synthetic prototype task.

The real datasets are exercised (when present) by the acceptance suite; these
tests prove the full train / ideal-spike / circuit pipeline holds together at
desk scale.
"""

import numpy as np
import pytest

from conftest import small_fc_net
from phasornet.circuit import (
    build_circuit,
    calibrate_threshold,
    decode_output,
    decode_over_time,
    run,
)
from phasornet.phasor_net import forward, predict
from phasornet.spikemap import raster_phases, unroll
from phasornet.training import encode_batch, evaluate, train


@pytest.fixture(scope="module")
def circuit_setup(trained_net, synth_split):
    _, test = synth_split
    circuit = build_circuit(trained_net)
    images = [test.images[i] for i in range(8)]
    thr, _ = calibrate_threshold(trained_net, circuit, images[:3])
    return trained_net, circuit, images, thr


class TestTraining:
    def test_training_beats_chance(self, trained_net, synth_split):
        _, test = synth_split
        err = evaluate(trained_net, test)
        assert err < 0.25

    def test_fresh_net_is_near_chance(self, synth_split):
        _, test = synth_split
        err = evaluate(small_fc_net(seed=99), test)
        assert err > 0.6

    def test_loss_decreases(self, synth_split):
        trainset, test = synth_split
        net = small_fc_net(seed=21)
        history, _ = train(net, trainset, test_set=None, epochs=4,
                           batch_size=32, seed=21)
        losses = [h["loss"] for h in history]
        assert losses[-1] < losses[0]

    def test_best_so_far_error_improves(self, synth_split):
        trainset, test = synth_split
        net = small_fc_net(seed=22)
        history, _ = train(net, trainset, test_set=test, epochs=5,
                           batch_size=32, seed=22)
        errs = [h["test_err"] for h in history]
        assert min(errs) < errs[0]

    def test_phase_shifts_do_not_hurt(self, synth_split, trained_net):
        trainset, test = synth_split
        shifted = small_fc_net(seed=7)
        shifted.phase_shifts = np.random.default_rng(3).uniform(
            0, 2 * np.pi, 64)
        train(shifted, trainset, test_set=None, epochs=25, batch_size=32,
              lr=0.005, seed=7)
        plain_err = evaluate(trained_net, test)
        shifted_err = evaluate(shifted, test)
        assert abs(shifted_err - plain_err) < 0.15


class TestIdealSpikes:
    def test_round_trip_matches_phasor_prediction(self, trained_net, synth_split):
        """Phase -> spike time -> phase must not change a single prediction."""
        _, test = synth_split
        net = trained_net
        x = encode_batch(net, test.images[:50])
        n_match = 0
        for i in range(50):
            trace = forward(net, x[i])
            raster = unroll(net, x[i], period=10.0, n_cycles=5)
            phases = raster_phases(raster, len(net.layers), net.n_outputs, cycle=4)
            units = np.where(np.isnan(phases), 0.0, np.exp(1j * phases))
            n_match += predict(units.astype(np.complex128)) == predict(trace.output)
        assert n_match == 50


class TestCircuit:
    def test_agreement_at_least_80_percent(self, circuit_setup):
        net, circuit, images, thr = circuit_setup
        agree = 0
        for image in images:
            result = run(circuit, [(image, 15)], v_threshold=thr)
            got = decode_output(result.raster, 10, len(net.layers), now=150.0)
            x = encode_batch(net, np.asarray(image)[None])[0]
            want = predict(forward(net, x).output)
            agree += got == want
        assert agree / len(images) >= 0.8

    def test_agreement_survives_finer_dt(self, circuit_setup):
        from phasornet.circuit import CircuitParams

        net, circuit, images, thr = circuit_setup
        fine = build_circuit(net, CircuitParams(dt=0.0125))

        def agreement(circ):
            n = 0
            for image in images[:4]:
                result = run(circ, [(image, 15)], v_threshold=thr)
                got = decode_output(result.raster, 10, len(net.layers), now=150.0)
                x = encode_batch(net, np.asarray(image)[None])[0]
                n += got == predict(forward(net, x).output)
            return n

        assert agreement(fine) >= agreement(circuit)

    def test_settles_within_ten_cycles(self, circuit_setup):
        net, circuit, images, thr = circuit_setup
        locked = 0
        for image in images:
            result = run(circuit, [(image, 15)], v_threshold=thr)
            times = np.arange(10, 16) * 10.0
            decoded = decode_over_time(result.raster, 10, len(net.layers), times)
            locked += decoded[-1] >= 0 and np.all(decoded == decoded[-1])
        assert locked / len(images) >= 0.8
