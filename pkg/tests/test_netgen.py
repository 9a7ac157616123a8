import numpy as np
import pytest
import torch

from bgmatte import checkpoint as ckpt
from bgmatte.errors import CheckpointError, DomainError, ParameterError, ShapeError
from bgmatte.imagecore import Image, render_trimap_channel
from bgmatte.netgen import (
    TOTAL_STRIDE,
    Generator,
    GeneratorConfig,
    InputVolume,
    assemble_input,
    build_generator,
    forward_generator,
    load_generator,
    load_rgb_stem_weights,
    save_generator,
    stack_channels,
)

from helpers import make_sample

SMALL = GeneratorConfig(base_width=4)


def small_generator(seed=0):
    torch.manual_seed(seed)
    return build_generator(SMALL)


def random_volume(rng, h=32, w=32):
    return InputVolume(rng.uniform(0.0, 1.0, (7, h, w)))


class TestGeneratorConfig:
    def test_defaults_valid(self):
        cfg = GeneratorConfig()
        assert cfg.base_width == 8
        assert cfg.dilation_rates == (2, 4)

    def test_full_scale_profile(self):
        cfg = GeneratorConfig.full_scale()
        assert cfg.base_width == 64
        assert cfg.stage_depths == (3, 4, 6, 3)

    def test_rejects_non_7_channel_input(self):
        with pytest.raises(ParameterError):
            GeneratorConfig(input_channels=4)

    def test_rejects_bad_widths_and_depths(self):
        with pytest.raises(ParameterError):
            GeneratorConfig(base_width=0)
        with pytest.raises(ParameterError):
            GeneratorConfig(stage_depths=(1, 1, 1))
        with pytest.raises(ParameterError):
            GeneratorConfig(dilation_rates=(0, 4))
        with pytest.raises(ParameterError):
            GeneratorConfig(aspp_rates=())


class TestInputVolume:
    def test_channel_slices(self):
        rng = np.random.default_rng(0)
        raw = rng.uniform(0, 1, (7, 8, 8))
        volume = InputVolume(raw)
        assert np.array_equal(volume.composite, raw[0:3])
        assert np.array_equal(volume.background, raw[3:6])
        assert np.array_equal(volume.trimap_channel, raw[6])

    def test_rejects_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            InputVolume(np.zeros((6, 8, 8)))

    def test_rejects_non_finite(self):
        bad = np.zeros((7, 8, 8))
        bad[2, 3, 3] = np.nan
        with pytest.raises(DomainError):
            InputVolume(bad)

    def test_rejects_out_of_range(self):
        bad = np.zeros((7, 8, 8))
        bad[0, 0, 0] = 1.5
        with pytest.raises(DomainError):
            InputVolume(bad)

    def test_stack_channels_layout(self):
        rng = np.random.default_rng(1)
        comp = rng.uniform(0, 1, (8, 8, 3))
        bg = rng.uniform(0, 1, (8, 8, 3))
        tri = rng.uniform(0, 1, (8, 8))
        stacked = stack_channels(comp, bg, tri)
        assert stacked.shape == (7, 8, 8)
        assert np.array_equal(stacked[0:3], comp.transpose(2, 0, 1))
        assert np.array_equal(stacked[3:6], bg.transpose(2, 0, 1))
        assert np.array_equal(stacked[6], tri)

    def test_assemble_input_uses_distorted_background(self):
        rng = np.random.default_rng(2)
        sample = make_sample(rng)
        distorted = Image(np.clip(sample.background_clean.pixels + 0.1, 0.0, 1.0))
        sample = type(sample)(
            foreground=sample.foreground,
            background_clean=sample.background_clean,
            background_distorted=distorted,
            alpha_gt=sample.alpha_gt,
            trimap=sample.trimap,
            composite=sample.composite,
        )
        volume = assemble_input(sample)
        assert np.array_equal(volume.composite, sample.composite.pixels.transpose(2, 0, 1))
        assert np.array_equal(volume.background, distorted.pixels.transpose(2, 0, 1))
        assert not np.array_equal(volume.background, sample.background_clean.pixels.transpose(2, 0, 1))
        assert np.array_equal(volume.trimap_channel, render_trimap_channel(sample.trimap))


class TestForwardShapes:
    def test_output_matches_input_dims(self):
        gen = small_generator().eval()
        for size in (32, 64, 96):
            out = gen(torch.rand(1, 7, size, size))
            assert out.shape == (1, 1, size, size)

    def test_rectangular_and_batched(self):
        gen = small_generator().eval()
        out = gen(torch.rand(2, 7, 32, 64))
        assert out.shape == (2, 1, 32, 64)

    def test_outputs_strictly_inside_unit_interval(self):
        gen = small_generator().eval()
        out = gen(torch.rand(1, 7, 64, 64))
        assert out.min().item() > 0.0
        assert out.max().item() < 1.0

    def test_dilated_stages_keep_resolution(self):
        # Stages 3 and 4 trade stride for dilation, so their maps must stay
        # at the stage-2 resolution while the channel width keeps doubling.
        gen = small_generator().eval()
        with torch.no_grad():
            feats = gen.encoder_features(torch.rand(1, 7, 64, 64))
        w = SMALL.base_width
        assert feats["stem"].shape == (1, w, 32, 32)
        assert feats["stage1"].shape == (1, w, 16, 16)
        assert feats["stage2"].shape == (1, 2 * w, 8, 8)
        assert feats["stage3"].shape == (1, 4 * w, 8, 8)
        assert feats["stage4"].shape == (1, 8 * w, 8, 8)
        assert feats["pyramid"].shape == (1, 4 * w, 8, 8)

    def test_rejects_indivisible_dims(self):
        gen = small_generator().eval()
        with pytest.raises(ShapeError):
            gen(torch.rand(1, 7, 60, 60))
        assert 60 % TOTAL_STRIDE != 0

    def test_rejects_wrong_rank_or_channels(self):
        gen = small_generator().eval()
        with pytest.raises(ShapeError):
            gen(torch.rand(7, 32, 32))
        with pytest.raises(ShapeError):
            gen(torch.rand(1, 6, 32, 32))


class TestInference:
    def test_forward_generator_deterministic(self):
        gen = small_generator()
        volume = random_volume(np.random.default_rng(3))
        a = forward_generator(gen, volume)
        b = forward_generator(gen, volume)
        assert np.array_equal(a.values, b.values)
        assert a.values.shape == (32, 32)

    def test_forward_generator_restores_training_flag(self):
        gen = small_generator()
        gen.train()
        forward_generator(gen, random_volume(np.random.default_rng(4)))
        assert gen.training
        gen.eval()
        forward_generator(gen, random_volume(np.random.default_rng(4)))
        assert not gen.training

    def test_single_pixel_perturbation_changes_output(self):
        gen = small_generator()
        base = np.full((7, 32, 32), 0.5)
        bumped = base.copy()
        bumped[0, 10, 10] = 0.55
        out_a = forward_generator(gen, InputVolume(base))
        out_b = forward_generator(gen, InputVolume(bumped))
        assert not np.array_equal(out_a.values, out_b.values)

    def test_dilation_rates_are_wired_in(self):
        # Same seed gives identical weights (dilation never changes parameter
        # shapes), so any output difference is the dilation wiring itself.
        torch.manual_seed(5)
        gen_dilated = build_generator(GeneratorConfig(base_width=4, dilation_rates=(2, 4)))
        torch.manual_seed(5)
        gen_plain = build_generator(GeneratorConfig(base_width=4, dilation_rates=(1, 1)))
        state_a = gen_dilated.state_dict()
        state_b = gen_plain.state_dict()
        assert all(torch.equal(state_a[k], state_b[k]) for k in state_a)

        # Batch-statistic normalization keeps activations at unit scale, so
        # the stage-3/4 sampling difference survives to the output.
        yy, xx = np.mgrid[0:32, 0:32] / 31.0
        ramp = np.broadcast_to((yy + xx) / 2.0, (7, 32, 32)).copy()
        x = torch.from_numpy(ramp).to(torch.float32).unsqueeze(0)
        with torch.no_grad():
            out_a = gen_dilated.train()(x)
            out_b = gen_plain.train()(x)
        assert (out_a - out_b).abs().max().item() > 1e-3


class TestParameterGradients:
    def test_autograd_matches_finite_differences(self):
        torch.manual_seed(6)
        gen = build_generator(SMALL).double().eval()
        rng = np.random.default_rng(6)
        x = torch.tensor(rng.uniform(0, 1, (1, 7, 16, 16)))

        gen.zero_grad()
        gen(x).sum().backward()

        candidates = []
        for name, param in gen.named_parameters():
            if param.grad is None:
                continue
            flat = param.grad.reshape(-1)
            order = torch.argsort(flat.abs(), descending=True)
            for idx in order[:2].tolist():
                if abs(flat[idx].item()) > 1e-6:
                    candidates.append((name, idx, flat[idx].item()))
        assert len(candidates) >= 20

        step = 1e-5
        params = dict(gen.named_parameters())
        for name, idx, grad_val in candidates:
            flat = params[name].data.reshape(-1)
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + step
                up = gen(x).sum().item()
                flat[idx] = orig - step
                down = gen(x).sum().item()
                flat[idx] = orig
            fd = (up - down) / (2 * step)
            assert fd == pytest.approx(grad_val, rel=1e-3, abs=1e-8)


class TestPretrainedStem:
    def test_pretrained_init_zeroes_extra_channels(self):
        torch.manual_seed(7)
        gen = build_generator(GeneratorConfig(base_width=4, pretrained_init=True))
        weight = gen.stem_conv.weight.detach()
        assert torch.all(weight[:, 3:] == 0)
        assert weight[:, 0:3].abs().max() > 0

    def test_load_rgb_stem_weights(self):
        gen = small_generator(seed=8)
        rng = np.random.default_rng(8)
        kernel = rng.normal(0, 0.1, (4, 3, 7, 7))
        load_rgb_stem_weights(gen, kernel)
        weight = gen.stem_conv.weight.detach().numpy()
        assert np.array_equal(weight[:, 0:3], kernel.astype(np.float32))
        assert np.all(weight[:, 3:] == 0)

    def test_load_rgb_stem_weights_rejects_bad_shape(self):
        gen = small_generator(seed=9)
        with pytest.raises(ShapeError):
            load_rgb_stem_weights(gen, np.zeros((4, 3, 5, 5)))


class TestCheckpointRoundtrip:
    def test_save_load_preserves_outputs(self, tmp_path):
        gen = small_generator(seed=10)
        volume = random_volume(np.random.default_rng(10))
        before = forward_generator(gen, volume)
        path = tmp_path / "gen.ckpt"
        save_generator(path, gen)
        loaded = load_generator(path)
        assert loaded.cfg == gen.cfg
        assert not loaded.training
        after = forward_generator(loaded, volume)
        assert np.array_equal(before.values, after.values)

    def test_load_rejects_other_kinds(self, tmp_path):
        path = tmp_path / "other.ckpt"
        ckpt.save_checkpoint(path, {"kind": "mystery"}, {})
        with pytest.raises(CheckpointError):
            load_generator(path)
