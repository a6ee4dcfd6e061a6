import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from literale.errors import ConfigurationError, DimensionError
from literale.fusion import (
    FUSION_KINDS,
    FusionConfig,
    fuse_backward,
    fuse_forward,
    fuse_gate,
    fuse_linear,
    fuse_mlp,
    fuse_nonlinear,
)

from helpers import FD_TOL, numeric_grad, rel_error

RNG = np.random.default_rng(5)
H, D = 4, 3


def identity_block(H, D):
    return np.vstack([np.eye(H), np.zeros((D, H))])


class TestLinear:
    def test_identity(self):
        e, l = RNG.normal(size=H), RNG.normal(size=D)
        np.testing.assert_array_equal(fuse_linear(e, l, identity_block(H, D)), e)

    def test_all_ones(self):
        np.testing.assert_array_equal(fuse_linear([1, 2], [3], np.ones((3, 2))), [6, 6])

    def test_zero_literals(self):
        e, W = RNG.normal(size=H), RNG.normal(size=(H + D, H))
        np.testing.assert_allclose(fuse_linear(e, np.zeros(D), W), e @ W[:H], rtol=1e-14)

    def test_wrong_rows(self):
        with pytest.raises(DimensionError):
            fuse_linear(np.ones(H), np.ones(D), np.ones((H + D + 1, H)))


class TestNonlinear:
    def test_tanh_zero_weights(self):
        out = fuse_nonlinear(RNG.normal(size=H), RNG.normal(size=D), np.zeros((H + D, H)), h="tanh")
        np.testing.assert_array_equal(out, np.zeros(H))

    @given(arrays(np.float64, (H + D, H), elements=st.floats(-5, 5)), arrays(np.float64, H + D, elements=st.floats(-5, 5)))
    def test_relu_nonnegative(self, W, x):
        assert np.all(fuse_nonlinear(x[:H], x[H:], W, h="relu") >= 0)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            fuse_nonlinear(np.ones(H), np.ones(D), np.ones((H + D, H)), h="gelu")


class TestMLP:
    def test_zero_first_layer(self):
        out = fuse_mlp(RNG.normal(size=H), RNG.normal(size=D), np.zeros((H + D, 6)), RNG.normal(size=(6, H)))
        np.testing.assert_array_equal(out, np.zeros(H))

    @pytest.mark.parametrize("Z", [1, 3, 10])
    def test_output_width(self, Z):
        out = fuse_mlp(RNG.normal(size=(5, H)), RNG.normal(size=(5, D)), RNG.normal(size=(H + D, Z)), RNG.normal(size=(Z, H)))
        assert out.shape == (5, H)

    def test_hidden_default(self):
        assert FusionConfig("mlp").weight_shapes(H, D) == {"W1": (H + D, H), "W2": (H, H)}
        assert FusionConfig("mlp", hidden_dim=7).weight_shapes(H, D)["W2"] == (7, H)


class TestGate:
    @given(arrays(np.float64, (H + D, H), elements=st.floats(-5, 5)), arrays(np.float64, D, elements=st.floats(-5, 5)))
    def test_ones_fixed_point(self, W, l):
        np.testing.assert_allclose(fuse_gate(np.ones(H), l, W), np.ones(H), rtol=1e-14)

    def test_gate_convex(self):
        e, l, W = RNG.normal(size=H), RNG.normal(size=D), RNG.normal(size=(H + D, H))
        _, (_, _, z) = fuse_forward("gate", e, l, {"W": W})
        assert np.all((z > 0) & (z < 1))
        assert z.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("kind", [k for k in FUSION_KINDS if k != "none"])
def test_fusion_gradients(kind):
    cfg = FusionConfig(kind)
    e, l = RNG.normal(size=(5, H)), RNG.uniform(size=(5, D))
    weights = {k: RNG.normal(size=s) for k, s in cfg.weight_shapes(H, D).items()}
    up = RNG.normal(size=(5, H))

    def loss():
        return float(np.sum(fuse_forward(kind, e, l, weights)[0] * up))

    out, cache = fuse_forward(kind, e, l, weights)
    de, wgrads = fuse_backward(kind, up, cache, weights, H)
    assert rel_error(de, numeric_grad(loss, e)) <= FD_TOL
    for name, w in weights.items():
        assert rel_error(wgrads[name], numeric_grad(loss, w)) <= FD_TOL


def test_forward_matches_direct():
    e, l = RNG.normal(size=(3, H)), RNG.uniform(size=(3, D))
    W, W1, W2 = RNG.normal(size=(H + D, H)), RNG.normal(size=(H + D, 5)), RNG.normal(size=(5, H))
    np.testing.assert_array_equal(fuse_forward("linear", e, l, {"W": W})[0], fuse_linear(e, l, W))
    np.testing.assert_array_equal(fuse_forward("tanh", e, l, {"W": W})[0], fuse_nonlinear(e, l, W, "tanh"))
    np.testing.assert_array_equal(fuse_forward("relu", e, l, {"W": W})[0], fuse_nonlinear(e, l, W, "relu"))
    np.testing.assert_array_equal(fuse_forward("mlp", e, l, {"W1": W1, "W2": W2})[0], fuse_mlp(e, l, W1, W2))
    np.testing.assert_array_equal(fuse_forward("gate", e, l, {"W": W})[0], fuse_gate(e, l, W))


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        FusionConfig("attention")


@settings(max_examples=20)
@given(st.sampled_from(FUSION_KINDS), st.integers(1, 12), st.integers(0, 6))
def test_parameter_count_matches_shapes(kind, h, d):
    cfg = FusionConfig(kind)
    assert cfg.parameter_count(h, d) == sum(a * b for a, b in cfg.weight_shapes(h, d).values())
    if kind in ("linear", "tanh", "relu", "gate"):
        assert cfg.parameter_count(h, d) == (h + d) * h
