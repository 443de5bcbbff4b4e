import numpy as np
import pytest

from eri_dual.nn import Parameter
from eri_dual.tensor import Tensor
from eri_dual.temporal import (
    TCN,
    TemporalEncoder,
    TemporalTransformer,
    causal_dilated_conv,
    receptive_field,
    sinusoidal_table,
)


def brute_force_conv(x, kernel, dilation):
    """y[p] = sum_i kernel[i] @ x[p - dilation*i], x outside [0, T) is zero."""
    t_len = x.shape[0]
    y = np.zeros((t_len, kernel.shape[2]))
    for p in range(t_len):
        for i in range(kernel.shape[0]):
            t = p - dilation * i
            if 0 <= t < t_len:
                y[p] += x[t] @ kernel[i]
    return y


def conv(x, kernel, dilation, bias=None):
    b = None if bias is None else Tensor(bias)
    return causal_dilated_conv(Tensor(x[None]), Tensor(kernel), b, dilation).data[0]


class TestCausalConv:
    def test_identity_tap(self, rng):
        x = rng.normal(size=(10, 1))
        k = np.array([1.0, 0.0, 0.0]).reshape(3, 1, 1)
        for d in (1, 2, 5):
            np.testing.assert_array_equal(conv(x, k, d), x)

    def test_pure_delay(self, rng):
        x = rng.normal(size=(8, 1))
        y = conv(x, np.array([0.0, 1.0, 0.0]).reshape(3, 1, 1), 2)
        assert y[0, 0] == 0.0 and y[1, 0] == 0.0
        np.testing.assert_array_equal(y[2:], x[:-2])

    @pytest.mark.parametrize("t_len", [1, 2, 5, 16])
    @pytest.mark.parametrize("dilation", [1, 2, 3])
    def test_matches_brute_force(self, t_len, dilation, rng):
        x = rng.normal(size=(t_len, 4))
        k = rng.normal(size=(3, 4, 5))
        assert np.max(np.abs(conv(x, k, dilation) - brute_force_conv(x, k, dilation))) <= 1e-12

    def test_length_preserved(self, rng):
        assert conv(rng.normal(size=(7, 2)), rng.normal(size=(3, 2, 3)), 4).shape == (7, 3)


def test_receptive_field_formula():
    assert receptive_field(3, [1, 2, 4, 8, 16]) == 63
    assert receptive_field(2, [1, 1]) == 3


def _influence(model, x, p, lag):
    base = model(Tensor(x)).data[0, p]
    x2 = x.copy()
    x2[0, p - lag] += 1.0
    return np.max(np.abs(model(Tensor(x2)).data[0, p] - base))


class TestTCN:
    def test_shape_any_length(self, rng):
        tcn = TCN(32, 128, 3, 5, rng)
        for t_len in (1, 7, 32):
            assert tcn(Tensor(rng.normal(size=(2, t_len, 32)))).shape == (2, t_len, 128)

    def test_receptive_field_probe(self, rng):
        tcn = TCN(4, 16, 3, 5, rng)
        assert tcn.receptive_field == 63
        x = rng.normal(size=(1, 80, 4))
        assert _influence(tcn, x, 75, 62) > 0
        assert _influence(tcn, x, 75, 63) == 0
        assert _influence(tcn, x, 79, 70) == 0

    @pytest.mark.parametrize("dilations", [[1, 3], [2, 2, 5]])
    def test_receptive_field_law_other_schedules(self, dilations, rng):
        tcn = TCN(3, 8, 3, len(dilations), rng)
        tcn.dilations = dilations
        for c, d in zip(tcn.convs, dilations):
            c.dilation = d
        span = sum(d * 2 for d in dilations)
        x = rng.normal(size=(1, span + 6, 3))
        p = span + 4
        assert _influence(tcn, x, p, span) > 0
        assert _influence(tcn, x, p, span + 1) == 0

    def test_future_never_leaks(self, rng):
        tcn = TCN(4, 16, 3, 5, rng)
        x = rng.normal(size=(1, 32, 4))
        base = tcn(Tensor(x)).data
        for _ in range(20):
            t = rng.integers(1, 32)
            x2 = x.copy()
            x2[0, t:] += rng.normal(size=(32 - t, 4))
            np.testing.assert_array_equal(tcn(Tensor(x2)).data[0, :t], base[0, :t])

    def test_zero_input_zero_bias(self, rng):
        tcn = TCN(4, 16, 3, 5, rng)
        for _, p in tcn.named_parameters():
            if p.ndim == 1:
                p.data[:] = 0.0
        assert not tcn(Tensor(np.zeros((1, 12, 4)))).data.any()

    def test_residual_option(self, rng):
        tcn = TCN(4, 8, 3, 2, rng, residual=True)
        assert tcn(Tensor(rng.normal(size=(1, 5, 4)))).shape == (1, 5, 8)


class TestTemporalTransformer:
    def test_shape(self, rng):
        tt = TemporalTransformer(16, 2, 4, 32, rng)
        assert tt(Tensor(rng.normal(size=(2, 10, 16)))).shape == (2, 10, 16)

    def test_equivariance_without_position(self, rng):
        tt = TemporalTransformer(16, 1, 4, 32, rng)
        tt.pos_embed.data[:] = 0.0
        x = rng.normal(size=(1, 12, 16))
        perm = rng.permutation(12)
        y = tt(Tensor(x)).data
        yp = tt(Tensor(x[:, perm])).data
        assert np.max(np.abs(yp - y[:, perm])) <= 1e-10

    def test_attention_rows(self, rng):
        tt = TemporalTransformer(16, 2, 4, 32, rng)
        tt(Tensor(rng.normal(size=(2, 10, 16))))
        for block in tt.encoder.blocks:
            np.testing.assert_allclose(block.attn.last_weights.sum(axis=-1), 1.0, atol=1e-12)

    def test_unmasked(self, rng):
        tt = TemporalTransformer(16, 1, 4, 32, rng)
        x = rng.normal(size=(1, 6, 16))
        x2 = x.copy()
        x2[0, 5] += 1.0
        assert np.any(tt(Tensor(x)).data[0, 0] != tt(Tensor(x2)).data[0, 0])

    def test_too_long(self, rng):
        tt = TemporalTransformer(16, 1, 4, 8, rng)
        with pytest.raises(ValueError, match="exceeds"):
            tt(Tensor(np.zeros((1, 9, 16))))

    def test_sinusoidal_mode(self, rng):
        tt = TemporalTransformer(16, 1, 4, 32, rng, pos="sinusoidal")
        assert not any(isinstance(p, Parameter) and n == "pos_embed" for n, p in tt.named_parameters())
        assert tt(Tensor(rng.normal(size=(1, 5, 16)))).shape == (1, 5, 16)
        table = sinusoidal_table(4, 6)
        np.testing.assert_allclose(table[0], [0, 1, 0, 1, 0, 1])


def test_encoder_length_preserved(rng):
    enc = TemporalEncoder(24, 16, 3, 5, 2, 4, 64, rng)
    for t_len in (1, 4, 32):
        assert enc(Tensor(rng.normal(size=(2, t_len, 24)))).shape == (2, t_len, 16)
