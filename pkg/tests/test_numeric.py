import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from literale import numeric as nx
from literale.errors import ConfigurationError, DimensionError
from literale.numeric import (
    AdamConfig,
    CheckpointError,
    ParameterStore,
    adam_step,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)

from helpers import FD_TOL, numeric_grad, rel_error

RNG = np.random.default_rng(7)


def check_primitive(forward, backward_fn, *inputs):
    """Compare ``backward_fn(upstream, *inputs)`` with central differences of ``<forward, upstream>``."""
    out = forward(*inputs)
    upstream = RNG.normal(size=np.shape(out))
    grads = backward_fn(upstream, *inputs)
    for x, g in zip(inputs, grads):
        num = numeric_grad(lambda: float(np.sum(forward(*inputs) * upstream)), x)
        assert rel_error(g, num) <= FD_TOL


class TestPrimitives:
    def test_relu_example(self):
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_array_equal(nx.relu_forward(x), [0, 0, 2])
        np.testing.assert_array_equal(nx.relu_backward(np.ones(3), x), [0, 0, 1])

    def test_affine_identity(self):
        x = RNG.normal(size=(3, 4))
        np.testing.assert_array_equal(nx.affine_forward(np.eye(4), x), x)

    def test_affine_shape_mismatch(self):
        with pytest.raises(DimensionError):
            nx.affine_forward(np.eye(3), np.ones((2, 4)))

    def test_affine_fd(self):
        check_primitive(nx.affine_forward, lambda d, W, x: nx.affine_backward(d, W, x), RNG.normal(size=(5, 3)), RNG.normal(size=(4, 5)))

    def test_concat_fd(self):
        a, b = RNG.normal(size=(3, 2)), RNG.normal(size=(3, 4))
        check_primitive(nx.concat_forward, lambda d, a, b: nx.concat_backward(d, a.shape[-1]), a, b)

    def test_tanh_fd(self):
        check_primitive(nx.tanh_forward, lambda d, x: (nx.tanh_backward(d, np.tanh(x)),), RNG.normal(size=(3, 4)))

    def test_relu_fd(self):
        x = RNG.normal(size=(3, 4))
        x[np.abs(x) < 1e-3] = 0.5  # keep away from the kink
        check_primitive(nx.relu_forward, lambda d, x: (nx.relu_backward(d, x),), x)

    def test_sigmoid_fd(self):
        check_primitive(nx.sigmoid_forward, lambda d, x: (nx.sigmoid_backward(d, nx.sigmoid_forward(x)),), RNG.normal(size=(6,)))

    def test_softmax_fd(self):
        check_primitive(nx.softmax_forward, lambda d, x: (nx.softmax_backward(d, nx.softmax_forward(x)),), RNG.normal(size=(3, 5)))

    def test_mul_fd(self):
        check_primitive(nx.elementwise_mul_forward, nx.elementwise_mul_backward, RNG.normal(size=(2, 3)), RNG.normal(size=(2, 3)))

    def test_row_sum_fd(self):
        check_primitive(nx.row_sum_forward, lambda d, x: (nx.row_sum_backward(d, x.shape),), RNG.normal(size=(4, 3)))

    def test_lookup_fd(self):
        idx = np.array([2, 0, 2])
        table = RNG.normal(size=(4, 3))
        out = nx.lookup_rows_forward(table, idx)
        up = RNG.normal(size=out.shape)
        g = nx.lookup_rows_backward(up, idx, 4)
        num = numeric_grad(lambda: float(np.sum(nx.lookup_rows_forward(table, idx) * up)), table)
        assert rel_error(g, num) <= FD_TOL
        # repeated rows accumulate
        np.testing.assert_allclose(g[2], up[0] + up[2])

    def test_conv2d_fd(self):
        x, f = RNG.normal(size=(2, 1, 4, 5)), RNG.normal(size=(3, 1, 3, 3))
        check_primitive(nx.conv2d_forward, lambda d, x, f: nx.conv2d_backward(d, x, f)[::-1], x, f)

    def test_conv2d_matches_loops(self):
        x, f = RNG.normal(size=(1, 1, 4, 5)), RNG.normal(size=(2, 1, 3, 3))
        out = nx.conv2d_forward(x, f)
        for c in range(2):
            for i in range(2):
                for j in range(3):
                    assert out[0, c, i, j] == pytest.approx(np.sum(x[0, 0, i : i + 3, j : j + 3] * f[c, 0]), rel=1e-12)

    @settings(max_examples=30)
    @given(arrays(np.float64, (3, 6), elements=st.floats(-50, 50)))
    def test_softmax_simplex(self, x):
        z = nx.softmax_forward(x)
        assert np.all((z >= 0) & (z <= 1))
        np.testing.assert_allclose(z.sum(axis=-1), 1.0, rtol=1e-12)

    def test_sigmoid_extremes(self):
        s = nx.sigmoid_forward(np.array([-800.0, 0.0, 800.0]))
        np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])


class TestDropout:
    def test_eval_is_identity(self):
        x = RNG.normal(size=(4, 4))
        out, mask = nx.dropout_forward(x, 0.5, train=False)
        assert mask is None
        np.testing.assert_array_equal(out, x)

    def test_expectation(self):
        x = np.ones((200, 500))
        out, mask = nx.dropout_forward(x, 0.3, True, np.random.default_rng(0))
        assert out.mean() == pytest.approx(1.0, abs=0.01)
        assert set(np.unique(out)) <= {0.0, 1.0 / 0.7}
        np.testing.assert_array_equal(nx.dropout_backward(np.ones_like(x), mask), out)

    def test_bad_rate(self):
        with pytest.raises(ConfigurationError):
            nx.dropout_forward(np.ones(3), 1.0, True, np.random.default_rng(0))


class TestAdam:
    # expected trajectories come from oracles.adam_scalar (50-digit arithmetic)
    def _scalar(self, theta, lr=0.001):
        store = ParameterStore()
        store.add("theta", np.array([theta]))
        return store, AdamConfig(learning_rate=lr)

    def test_first_step(self):
        store, cfg = self._scalar(0.0)
        store["theta"].grad[:] = 1.0
        adam_step(store, cfg)
        assert store.value("theta")[0] == pytest.approx(-0.00099999999, rel=1e-12)

    def test_two_steps(self):
        store, cfg = self._scalar(0.5)
        for g, expected in ((1.0, 0.49900000001), (-0.25, 0.4985305318452346)):
            store["theta"].grad[:] = g
            adam_step(store, cfg)
            assert store.value("theta")[0] == pytest.approx(expected, rel=1e-12)
        assert store.step_count == 2

    def test_zero_grad_only_decays_moments(self):
        store, cfg = self._scalar(0.5)
        store["theta"].grad[:] = 1.0
        adam_step(store, cfg)
        before = store.value("theta").copy()
        m, v = store["theta"].adam_m.copy(), store["theta"].adam_v.copy()
        store.zero_grads()
        adam_step(store, cfg)
        np.testing.assert_array_equal(store.value("theta"), before)
        np.testing.assert_allclose(store["theta"].adam_m, 0.9 * m)
        np.testing.assert_allclose(store["theta"].adam_v, 0.999 * v)

    def test_zero_lr(self):
        store, cfg = self._scalar(0.3, lr=0.0)
        store["theta"].grad[:] = 2.0
        adam_step(store, cfg)
        assert store.value("theta")[0] == 0.3

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            AdamConfig(learning_rate=-1.0)
        with pytest.raises(ConfigurationError):
            AdamConfig(beta1=1.0)


class TestInit:
    def test_determinism(self):
        a = init_parameters({"E": (5, 3), "W": (4, 2)}, seed=3)
        b = init_parameters({"E": (5, 3), "W": (4, 2)}, seed=3)
        assert a.equals(b)
        c = init_parameters({"E": (5, 3), "W": (4, 2)}, seed=4)
        assert not a.equals(c)

    def test_bound(self):
        p = init_parameters({"W": (4, 3)}, seed=0).value("W")
        assert p.size == 12
        assert np.all(np.abs(p) <= np.sqrt(6 / 7))

    def test_conv_fan(self):
        # fan_in = 1*3*3, fan_out = 2*3*3
        assert nx.glorot_bound((2, 1, 3, 3)) == pytest.approx(np.sqrt(6 / 27))

    def test_bad_shape(self):
        with pytest.raises(ConfigurationError):
            init_parameters({"W": (0, 3)}, seed=0)

    def test_zero_grads(self):
        s = init_parameters({"W": (2, 2)}, seed=0)
        s["W"].grad += 3.0
        s.zero_grads()
        assert not s["W"].grad.any()


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        store = init_parameters({"E": (5, 3), "conv.filters": (2, 1, 3, 3)}, seed=1)
        store["E"].grad += 1.0
        adam_step(store, AdamConfig())
        path = tmp_path / "m.ckpt"
        save_checkpoint(store, path)
        back = load_checkpoint(path)
        assert back.equals(store)
        assert back.step_count == 1

    def test_bitwise_stable(self, tmp_path):
        store = init_parameters({"E": (5, 3)}, seed=1)
        save_checkpoint(store, tmp_path / "a")
        save_checkpoint(load_checkpoint(tmp_path / "a"), tmp_path / "b")
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "x")

    def test_truncated(self, tmp_path):
        save_checkpoint(init_parameters({"E": (5, 3)}, seed=1), tmp_path / "a")
        data = (tmp_path / "a").read_bytes()
        (tmp_path / "b").write_bytes(data[:-8])
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "b")
