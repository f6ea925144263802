import numpy as np
import pytest

from conftest import small_fc_net
from phasornet.errors import DataFormatError
from phasornet.model_io import MAGIC, load_model, save_model
from phasornet.optim import Adam
from phasornet.phasor_net import LayerSpec, PhasorNetwork, encode_input, forward


def conv_net(seed=0, dtype=np.complex64):
    specs = [
        LayerSpec("conv3x3", in_channels=1, out_channels=3),
        LayerSpec("conv3x3", in_channels=3, out_channels=2),
        LayerSpec("dense", fan_in=2 * 4 * 4, fan_out=5),
    ]
    return PhasorNetwork.create((1, 8, 8), specs, seed=seed, dtype=dtype)


class TestRoundTrip:
    def test_dense_round_trip_exact(self, tmp_path):
        net = small_fc_net(seed=11)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        back = load_model(path)
        assert back.input_shape == net.input_shape
        assert back.dtype == net.dtype
        assert back.phase_shift_seed == net.phase_shift_seed
        np.testing.assert_array_equal(back.phase_shifts, net.phase_shifts)
        for wa, wb in zip(net.weights, back.weights):
            np.testing.assert_array_equal(wa, wb)
        for ba, bb in zip(net.biases, back.biases):
            np.testing.assert_array_equal(ba, bb)

    def test_conv_round_trip_exact(self, tmp_path):
        net = conv_net(seed=2)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        back = load_model(path)
        assert [s.kind for s in back.layers] == [s.kind for s in net.layers]
        for wa, wb in zip(net.weights, back.weights):
            assert wa.shape == wb.shape
            np.testing.assert_array_equal(wa, wb)

    def test_complex128_round_trip(self, tmp_path):
        net = small_fc_net(seed=3, dtype=np.complex128)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        back = load_model(path)
        assert back.dtype == np.complex128
        np.testing.assert_array_equal(back.weights[0], net.weights[0])

    def test_save_load_save_is_byte_identical(self, tmp_path):
        net = small_fc_net(seed=4)
        p1, p2 = tmp_path / "a.phzn", tmp_path / "b.phzn"
        save_model(net, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_same_predictions_after_reload(self, tmp_path):
        net = small_fc_net(seed=5)
        rng = np.random.default_rng(0)
        x = encode_input(rng.uniform(size=(8, 64)).astype(np.float32)).astype(net.dtype)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        back = load_model(path)
        np.testing.assert_array_equal(forward(net, x).output, forward(back, x).output)


class TestOptimizerState:
    def test_resume_matches_uninterrupted_run(self, tmp_path):
        net = small_fc_net(seed=6, dtype=np.complex128)
        rng = np.random.default_rng(1)
        params = net.parameters()
        grads = [rng.normal(size=p.shape) + 1j * rng.normal(size=p.shape)
                 for p in params]

        ref = small_fc_net(seed=6, dtype=np.complex128)
        opt_ref = Adam(ref.parameters())
        for _ in range(6):
            opt_ref.step(ref.parameters(), grads)

        opt = Adam(params)
        for _ in range(3):
            opt.step(params, grads)
        path = tmp_path / "ckpt.phzn"
        save_model(net, path, optimizer=opt)

        net2, state = load_model(path, with_optimizer=True)
        opt2 = Adam(net2.parameters())
        opt2.load_state(state["t"], state["m"], state["v"])
        for _ in range(3):
            opt2.step(net2.parameters(), grads)

        for a, b in zip(ref.parameters(), net2.parameters()):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_no_state_returns_none(self, tmp_path):
        net = small_fc_net(seed=7)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        _, state = load_model(path, with_optimizer=True)
        assert state is None


class TestFormatErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.phzn"
        path.write_bytes(b"XXXX" + bytes(64))
        with pytest.raises(DataFormatError, match="magic"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        net = small_fc_net(seed=8)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = np.uint32(99).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="version 99"):
            load_model(path)

    def test_truncated_payload(self, tmp_path):
        net = small_fc_net(seed=9)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        path.write_bytes(path.read_bytes()[:-17])
        with pytest.raises(DataFormatError, match="ended inside"):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        net = small_fc_net(seed=10)
        path = tmp_path / "m.phzn"
        save_model(net, path)
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(DataFormatError, match="trailing"):
            load_model(path)

    def test_magic_constant(self):
        assert MAGIC == b"PHZN"
