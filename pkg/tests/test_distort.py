import math

import numpy as np
import pytest

from bgmatte.distort import (
    DIAMETER_RANGE,
    DistortionConfig,
    HexPatchSpec,
    apply_patch_blur,
    derived_rng,
    distort_background,
    hex_mask,
    sample_hex_patch,
)
from bgmatte.errors import DomainError, ParameterError
from bgmatte.imagecore import Image

from oracles import gaussian_blur_oracle, integer_shift_oracle


def checkerboard(h, w, cell=8):
    yy, xx = np.mgrid[0:h, 0:w]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return Image(np.repeat(board[:, :, None], 3, axis=2))


def interior_spec(diameter=150.0, sigma=4.0, translation=(10.0, 0.0), rotation=0.0):
    return HexPatchSpec(
        center=(300.0, 300.0),
        diameter=diameter,
        rotation=rotation,
        blur_sigma=sigma,
        translation=translation,
    )


class TestSampleHexPatch:
    def test_diameters_stay_in_range(self):
        rng = np.random.default_rng(0)
        diameters = [sample_hex_patch(rng, (600, 600)).diameter for _ in range(2000)]
        assert min(diameters) >= DIAMETER_RANGE[0]
        assert max(diameters) <= DIAMETER_RANGE[1]

    def test_fixed_seed_repeats(self):
        a = sample_hex_patch(np.random.default_rng(42), (600, 600))
        b = sample_hex_patch(np.random.default_rng(42), (600, 600))
        assert a == b

    def test_centers_cover_all_quadrants(self):
        rng = np.random.default_rng(1)
        counts = np.zeros((2, 2), dtype=int)
        for _ in range(2000):
            x, y = sample_hex_patch(rng, (600, 600)).center
            counts[int(y >= 300), int(x >= 300)] += 1
        assert (counts > 0).all()

    def test_specs_validate_on_their_image(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            sample_hex_patch(rng, (240, 320)).validate((240, 320))

    def test_rotation_from_linear_grid(self):
        rng = np.random.default_rng(3)
        grid = np.linspace(0.0, math.pi / 3.0, 64, endpoint=False)
        for _ in range(200):
            rotation = sample_hex_patch(rng, (100, 100)).rotation
            assert rotation in grid


class TestHexPatchSpecValidation:
    def test_diameter_out_of_range(self):
        with pytest.raises(DomainError):
            interior_spec(diameter=100.0).validate((600, 600))
        with pytest.raises(DomainError):
            interior_spec(diameter=400.0).validate((600, 600))

    def test_center_out_of_bounds(self):
        spec = HexPatchSpec(center=(700.0, 300.0), diameter=150.0, rotation=0.0, blur_sigma=2.0, translation=(0.0, 0.0))
        with pytest.raises(DomainError):
            spec.validate((600, 600))


class TestHexMask:
    def test_interior_area_matches_regular_hexagon(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            d = rng.uniform(*DIAMETER_RANGE)
            rotation = rng.uniform(0.0, math.pi / 3.0)
            spec = HexPatchSpec((300.0, 300.0), d, rotation, 2.0, (0.0, 0.0))
            area = hex_mask(spec, (600, 600)).sum()
            expected = 3.0 * math.sqrt(3.0) / 8.0 * d * d
            assert 0.95 <= area / expected <= 1.05

    def test_corner_center_clips_area(self):
        d = 150.0
        interior = hex_mask(HexPatchSpec((300.0, 300.0), d, 0.0, 2.0, (0.0, 0.0)), (600, 600)).sum()
        corner = hex_mask(HexPatchSpec((0.0, 0.0), d, 0.0, 2.0, (0.0, 0.0)), (600, 600)).sum()
        assert corner < interior

    def test_rotation_six_fold_symmetry(self):
        base = hex_mask(interior_spec(rotation=0.0), (600, 600))
        turned = hex_mask(interior_spec(rotation=math.pi / 3.0), (600, 600))
        assert np.array_equal(base, turned)
        partial = hex_mask(interior_spec(rotation=0.2), (600, 600))
        turned_partial = hex_mask(interior_spec(rotation=0.2 + math.pi / 3.0), (600, 600))
        assert np.array_equal(partial, turned_partial)


class TestApplyPatchBlur:
    def test_zero_blur_zero_shift_is_identity(self):
        rng = np.random.default_rng(5)
        bg = Image(rng.uniform(0, 1, (200, 200, 3)))
        spec = HexPatchSpec((100.0, 100.0), 120.0, 0.0, 0.0, (0.0, 0.0))
        out = apply_patch_blur(bg, spec)
        assert np.array_equal(out.pixels, bg.pixels)

    def test_constant_background_unchanged(self):
        bg = Image(np.full((600, 600, 3), 0.37))
        out = apply_patch_blur(bg, interior_spec(sigma=5.0, translation=(12.0, -7.0)))
        assert np.abs(out.pixels - bg.pixels).max() <= 1e-12

    def test_checkerboard_matches_blur_shift_oracle(self):
        bg = checkerboard(600, 600)
        spec = interior_spec(sigma=4.0, translation=(10.0, 0.0))
        out = apply_patch_blur(bg, spec)
        mask = hex_mask(spec, (600, 600))
        outside = ~mask
        assert np.array_equal(out.pixels[outside], bg.pixels[outside])
        assert np.abs(out.pixels[mask] - bg.pixels[mask]).mean() > 0
        expected = integer_shift_oracle(gaussian_blur_oracle(bg.pixels, 4.0), dx=10, dy=0)
        assert np.abs(out.pixels[mask] - expected[mask]).max() <= 1e-12

    def test_output_in_unit_range(self):
        rng = np.random.default_rng(6)
        bg = Image(rng.uniform(0, 1, (250, 250, 3)))
        for _ in range(5):
            spec = sample_hex_patch(rng, (250, 250))
            out = apply_patch_blur(bg, spec)
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


class TestDistortBackground:
    def test_m_fraction_zero_is_identity(self):
        rng = np.random.default_rng(7)
        bg = Image(rng.uniform(0, 1, (64, 64, 3)))
        cfg = DistortionConfig(mode="M", m_distort_fraction=0.0)
        out = distort_background(bg, cfg, np.random.default_rng(8))
        assert np.array_equal(out.pixels, bg.pixels)

    def test_m_exterior_bit_identical(self):
        rng = np.random.default_rng(9)
        bg = Image(rng.uniform(0, 1, (160, 160, 3)))
        cfg = DistortionConfig(mode="M", m_distort_fraction=1.0)
        out = distort_background(bg, cfg, np.random.default_rng(10))
        # Replay the draws to recover the patch independently of the output.
        replay = np.random.default_rng(10)
        replay.uniform()
        spec = sample_hex_patch(replay, (160, 160), cfg.patch_sigma_range, cfg.translation_range)
        inside = hex_mask(spec, (160, 160))
        assert np.any(out.pixels[inside] != bg.pixels[inside])
        assert np.array_equal(out.pixels[~inside], bg.pixels[~inside])

    def test_h_mode_changes_nonconstant_image(self):
        bg = checkerboard(96, 96)
        cfg = DistortionConfig(mode="H")
        out = distort_background(bg, cfg, np.random.default_rng(11))
        assert not np.array_equal(out.pixels, bg.pixels)

    def test_m_fraction_half_binomial_count(self):
        cfg = DistortionConfig(mode="M", m_distort_fraction=0.5)
        rng = np.random.default_rng(12)
        image_rng = np.random.default_rng(13)
        distorted = 0
        for _ in range(1000):
            bg = Image(image_rng.uniform(0, 1, (16, 16, 3)))
            out = distort_background(bg, cfg, rng)
            distorted += int(not np.array_equal(out.pixels, bg.pixels))
        assert 420 <= distorted <= 580

    def test_fixed_seed_bitwise_determinism(self):
        rng = np.random.default_rng(14)
        bg = Image(rng.uniform(0, 1, (128, 128, 3)))
        for mode in ("M", "H"):
            cfg = DistortionConfig(mode=mode)
            a = distort_background(bg, cfg, derived_rng(99, 3))
            b = distort_background(bg, cfg, derived_rng(99, 3))
            assert np.array_equal(a.pixels, b.pixels)

    def test_outputs_in_unit_range(self):
        rng = np.random.default_rng(15)
        bg = Image(rng.uniform(0, 1, (150, 150, 3)))
        for mode in ("M", "H"):
            out = distort_background(bg, DistortionConfig(mode=mode), np.random.default_rng(16))
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    def test_derived_rng_streams_differ_by_index(self):
        a = derived_rng(5, 0).uniform(size=4)
        b = derived_rng(5, 1).uniform(size=4)
        c = derived_rng(5, 0).uniform(size=4)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, c)


class TestDistortionConfigValidation:
    def test_bad_mode(self):
        with pytest.raises(ParameterError):
            DistortionConfig(mode="X")

    def test_bad_fraction(self):
        with pytest.raises(ParameterError):
            DistortionConfig(m_distort_fraction=1.5)

    def test_inverted_range(self):
        with pytest.raises(ParameterError):
            DistortionConfig(patch_sigma_range=(5.0, 2.0))
