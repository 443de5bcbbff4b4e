import numpy as np
import pytest

from eri_dual import fusion
from eri_dual.config import for_profile
from eri_dual.fusion import AUDIO_ONLY, BOTH, VIDEO_ONLY, FusionHead, IntensityHead
from eri_dual.gradcheck import reduced_config
from eri_dual.models import build_model
from eri_dual.tensor import Tensor


class TestAlign:
    def test_identity_when_lengths_match(self, rng):
        x = Tensor(rng.normal(size=(2, 5, 3)))
        assert fusion.align_audio(x, 5) is x

    def test_linear_ramp_resampled_exactly(self):
        ramp = np.linspace(0, 1, 4)[None, :, None]
        out = fusion.align_audio(Tensor(ramp), 10).data[0, :, 0]
        np.testing.assert_allclose(out, np.linspace(0, 1, 10), atol=1e-15)

    def test_rows_are_convex(self):
        a = fusion.interp_matrix(7, 32)
        assert np.all(a >= 0)
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-15)
        assert a[0, 0] == 1.0 and a[-1, -1] == 1.0

    def test_single_step_broadcasts(self):
        out = fusion.align_audio(Tensor(np.array([[[2.0, 3.0]]])), 4).data
        np.testing.assert_array_equal(out[0], np.tile([2.0, 3.0], (4, 1)))


class TestBranchSampling:
    def test_probabilities(self):
        assert fusion.branch_probabilities(0.9, 0.5) == pytest.approx((0.9, 0.05, 0.05))
        with pytest.raises(ValueError):
            fusion.branch_probabilities(1.1, 0.5)

    def test_keyed_draws_reproducible(self):
        a = fusion.sample_branches(0.5, 0.5, 3, 7, range(50))
        b = fusion.sample_branches(0.5, 0.5, 3, 7, range(50))
        np.testing.assert_array_equal(a, b)
        assert fusion.sample_branch(0.5, 0.5, 3, 7, 17) == a[17]

    def test_extremes(self):
        assert set(fusion.sample_branches(1.0, 0.5, 0, 0, range(200))) == {BOTH}
        assert set(fusion.sample_branches(0.0, 1.0, 0, 0, range(200))) == {VIDEO_ONLY}
        assert set(fusion.sample_branches(0.0, 0.0, 0, 0, range(200))) == {AUDIO_ONLY}

    def test_frequencies(self):
        draws = fusion.sample_branches(0.6, 0.25, 11, 0, range(20000))
        freq = np.bincount(draws, minlength=3) / draws.size
        np.testing.assert_allclose(freq, [0.6, 0.1, 0.3], atol=0.015)


class TestModalityDropout:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.fa = rng.normal(size=(3, 4, 2))
        self.fv = rng.normal(size=(3, 4, 5))

    def test_layout_audio_first(self):
        out = fusion.modality_dropout(Tensor(self.fa), Tensor(self.fv)).data
        np.testing.assert_array_equal(out[..., :2], self.fa)
        np.testing.assert_array_equal(out[..., 2:], self.fv)

    def test_zeroing_per_clip(self):
        out = fusion.modality_dropout(Tensor(self.fa), Tensor(self.fv),
                                      np.array([BOTH, VIDEO_ONLY, AUDIO_ONLY])).data
        np.testing.assert_array_equal(out[0], np.concatenate([self.fa[0], self.fv[0]], axis=-1))
        assert np.all(out[1, :, :2] == 0) and not np.signbit(out[1, :, :2]).any()
        np.testing.assert_array_equal(out[1, :, 2:], self.fv[1])
        np.testing.assert_array_equal(out[2, :, :2], self.fa[2])
        assert np.all(out[2, :, 2:] == 0) and not np.signbit(out[2, :, 2:]).any()

    def test_dropped_slots_get_no_gradient(self):
        fa, fv = Tensor(self.fa, requires_grad=True), Tensor(self.fv, requires_grad=True)
        fusion.modality_dropout(fa, fv, np.array([VIDEO_ONLY, AUDIO_ONLY, BOTH])).sum().backward()
        np.testing.assert_array_equal(fa.grad[0], 0.0)
        np.testing.assert_array_equal(fv.grad[1], 0.0)
        np.testing.assert_array_equal(fa.grad[2], 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fusion.modality_dropout(Tensor(self.fa), Tensor(self.fv[:, :3]))


class TestFusionHead:
    def test_zero_projection_gives_bias(self, rng):
        head = FusionHead(4, 6, 8, rng)
        head.proj.weight.data[:] = 0.0
        f = Tensor(rng.normal(size=(2, 5, 10)))
        out = head.project(f).data
        np.testing.assert_array_equal(out, np.broadcast_to(head.proj.bias.data, out.shape))

    def test_scale_invariance_of_normed_projection(self, rng):
        head = FusionHead(4, 6, 8, rng)
        f = rng.normal(size=(2, 5, 10))
        a = head.project(Tensor(f)).data
        b = head.project(Tensor(7.0 * f)).data
        # scaling changes only the eps term inside the normaliser
        assert np.max(np.abs(a - b)) <= 1e-4

    def test_eval_is_both_branch(self, rng):
        head = FusionHead(4, 6, 8, rng)
        fa, fv = Tensor(rng.normal(size=(3, 2, 4))), Tensor(rng.normal(size=(3, 5, 6)))
        np.testing.assert_array_equal(head(fa, fv).data, head(fa, fv, np.zeros(3, dtype=int)).data)


class TestIntensityHead:
    def test_output_in_open_interval(self, rng):
        head = IntensityHead(8, rng)
        out = head(Tensor(100 * rng.normal(size=(4, 6, 8)))).data
        assert out.shape == (4, 7)
        assert np.all((out > 0) & (out < 1))

    def test_zero_logits_give_half(self, rng):
        head = IntensityHead(8, rng)
        head.out.weight.data[:] = 0.0
        head.out.bias.data[:] = 0.0
        np.testing.assert_array_equal(head(Tensor(rng.normal(size=(2, 3, 8)))).data, 0.5)

    def test_equal_frames_ignore_pool_weights(self, rng):
        head = IntensityHead(8, rng)
        v = rng.normal(size=8)
        out = head(Tensor(np.tile(v, (1, 6, 1)))).data[0]
        direct = 1 / (1 + np.exp(-(v @ head.out.weight.data + head.out.bias.data)))
        np.testing.assert_allclose(out, direct, atol=1e-14)


class TestFusionModel:
    def setup_method(self):
        self.cfg = reduced_config(0).replace(stage="fusion")
        self.model = build_model(self.cfg)
        rng = np.random.default_rng(8)
        self.clips = Tensor(rng.uniform(size=(2, 4, 3, 16, 16)))
        self.mfcc = Tensor(rng.normal(size=(2, 3, 1024)))

    def test_output_shape(self):
        assert self.model(self.clips, self.mfcc).shape == (2, 7)

    def test_video_branch_independent_of_audio(self):
        a = self.model.video(self.clips).data
        self.model(self.clips, Tensor(self.mfcc.data * 3))
        np.testing.assert_array_equal(self.model.video(self.clips).data, a)

    def test_frozen_branches_receive_zero_grad(self):
        self.model.video.freeze()
        self.model.audio.freeze()
        self.model.zero_grad()
        self.model(self.clips, self.mfcc).sum().backward()
        for name, p in self.model.named_parameters():
            if name.startswith(("video.", "audio.")):
                assert not p.grad.any(), name
            elif name == "fusion.proj.weight":
                assert p.grad.any()

    def test_audio_only_branch_ignores_video(self):
        other = Tensor(self.clips.data[::-1].copy())
        br = np.full(2, AUDIO_ONLY)
        np.testing.assert_array_equal(self.model(self.clips, self.mfcc, br).data,
                                      self.model(other, self.mfcc, br).data)


def test_desk_feature_widths():
    cfg = for_profile("desk", stage="fusion")
    model = build_model(cfg)
    assert model.fusion.proj.weight.shape == (2 * cfg.d_attn, cfg.d_fused)
