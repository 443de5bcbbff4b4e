import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eri_dual.fusion import EMOTIONS
from eri_dual.metrics import EvalReport, UndefinedCorrelation, evaluate, mse_loss, pearson
from eri_dual.tensor import Tensor


def two_pass_pearson(y, p):
    n = len(y)
    my = sum(y) / n
    mp = sum(p) / n
    cov = sum((a - my) * (b - mp) for a, b in zip(y, p))
    vy = sum((a - my) ** 2 for a in y)
    vp = sum((b - mp) ** 2 for b in p)
    return cov / math.sqrt(vy * vp)


def loop_mse(y, p):
    total = 0.0
    for i in range(len(y)):
        for j in range(len(y[i])):
            total += (y[i][j] - p[i][j]) ** 2
    return total / len(y)


class TestPearson:
    def test_self_and_anti(self, rng):
        y = rng.uniform(size=50)
        assert abs(pearson(y, y) - 1.0) <= 1e-15
        assert abs(pearson(y, 1.0 - y) + 1.0) <= 1e-15

    def test_affine_invariance(self, rng):
        y, p = rng.uniform(size=(2, 30))
        assert pearson(y, 3.0 * p + 2.0) == pytest.approx(pearson(y, p), abs=1e-12)
        assert pearson(y, -p) == pytest.approx(-pearson(y, p), abs=1e-12)

    def test_oracle(self, rng):
        for _ in range(50):
            n = rng.integers(2, 40)
            y, p = rng.normal(size=(2, n))
            assert abs(pearson(y, p) - two_pass_pearson(list(y), list(p))) <= 1e-12

    def test_constant_labels(self):
        with pytest.raises(UndefinedCorrelation, match="labels"):
            pearson(np.ones(5), np.arange(5.0))

    def test_constant_predictions(self):
        with pytest.raises(UndefinedCorrelation, match="predictions"):
            pearson(np.arange(5.0), np.full(5, 0.3))

    def test_tiny_deviations_do_not_underflow(self):
        y = np.array([0.0, 1e-300, 3e-300])
        assert pearson(y, 2.0 * y) == pytest.approx(1.0, abs=1e-15)

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, 12, elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, 12, elements=st.floats(-1e3, 1e3)))
    def test_bounded(self, y, p):
        try:
            r = pearson(y, p)
        except UndefinedCorrelation:
            return
        assert -1.0 <= r <= 1.0


class TestMse:
    def test_oracle(self, rng):
        y, p = rng.uniform(size=(2, 6, 7))
        assert abs(mse_loss(y, Tensor(p)).item() - loop_mse(y.tolist(), p.tolist())) <= 1e-12

    def test_zero_iff_equal(self, rng):
        y = rng.uniform(size=(4, 7))
        assert mse_loss(y, Tensor(y)).item() == 0.0

    def test_gradient(self, rng):
        y, p = rng.uniform(size=(2, 3, 7))
        pt = Tensor(p, requires_grad=True)
        mse_loss(y, pt).backward()
        np.testing.assert_allclose(pt.grad, 2 * (p - y) / 3, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(np.zeros((2, 7)), Tensor(np.zeros((2, 6))))


class TestEvaluate:
    def test_perfect(self, rng):
        y = rng.uniform(size=(10, 7))
        r = evaluate(y, y)
        assert r.rho_bar == pytest.approx(1.0, abs=1e-15) and r.mse == 0.0 and r.n_samples == 10

    def test_mean_of_columns(self, rng):
        y, p = rng.uniform(size=(2, 20, 7))
        r = evaluate(p, y)
        assert r.rho_bar == pytest.approx(np.mean([pearson(y[:, i], p[:, i]) for i in range(7)]), abs=1e-15)

    def test_names_constant_emotion(self, rng):
        y = rng.uniform(size=(6, 7))
        p = rng.uniform(size=(6, 7))
        p[:, 3] = 0.5
        with pytest.raises(UndefinedCorrelation) as err:
            evaluate(p, y)
        assert err.value.emotion == EMOTIONS[3]
        assert "disgust" in str(err.value)

    def test_report_text_roundtrip(self, rng):
        y, p = rng.uniform(size=(2, 12, 7))
        r = evaluate(p, y)
        back = EvalReport.from_text(r.to_text())
        assert back.n_samples == r.n_samples
        np.testing.assert_allclose(back.rho_per_emotion, r.rho_per_emotion, rtol=1e-11)
        assert back.rho_bar == pytest.approx(r.rho_bar, rel=1e-11)
