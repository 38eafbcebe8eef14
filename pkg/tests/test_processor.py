"""
Tests for image primitives and pretext example generation.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from sspb.processor import (
    ChannelOrder,
    Image,
    PreprocessParams,
    PretextParams,
    PretextTask,
    SynthConfig,
    build_pretext_dataset,
    corrupt_swap,
    deprocess,
    gen_corruption_example,
    gen_missing_patch_example,
    gen_rotation_example,
    generate_synthetic,
    load_png,
    load_pretext_dataset,
    mask_patch,
    preprocess,
    rotate_image,
    save_png,
    swap_patches,
    uncorrupt,
    write_pretext_dataset,
)
from sspb.processor.imaging import SwapRecord, default_mask_side, default_swap_patch
from sspb.utils.error_handler import NumericError, ParameterError, ShapeError, UsageError


GOLDEN_DIR = Path(__file__).parent / "golden"


def pixel_digest(img):
    return hashlib.sha256(np.ascontiguousarray(img.pixels, dtype='<f8').tobytes()).hexdigest()


def pretext_digest(dataset):
    """Per-example fingerprints of a generated dataset."""
    rows = []
    for example in dataset.examples:
        target = example.target
        rows.append({
            'seed': None if example.seed is None else int(example.seed),
            'input': pixel_digest(example.input),
            'target': float(target) if example.task is PretextTask.ROTATION else pixel_digest(target),
        })
    return rows


@pytest.fixture
def rng():
    return np.random.default_rng(99)


@pytest.fixture
def random_image(rng):
    return Image(rng.integers(0, 256, size=(16, 16, 3)).astype(np.float64))


@pytest.fixture
def large_image(rng):
    return Image(rng.integers(0, 256, size=(64, 64, 3)).astype(np.float64))


class TestImage:
    """Test image validation."""

    def test_pixels_are_read_only(self, random_image):
        with pytest.raises(ValueError):
            random_image.pixels[0, 0, 0] = 1.0

    def test_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            Image(np.zeros((4, 4, 4)))

    def test_non_finite_pixels(self):
        pixels = np.zeros((4, 4, 3))
        pixels[1, 1, 1] = np.nan
        with pytest.raises(NumericError):
            Image(pixels)

    def test_canonical(self, random_image):
        assert random_image.is_canonical()
        assert not preprocess(random_image).is_canonical()

    def test_png_round_trip(self, random_image, tmp_path):
        save_png(random_image, tmp_path / 'img.png')
        assert load_png(tmp_path / 'img.png').same_pixels(random_image)


class TestRotation:
    """Test rotation about the image centre."""

    def test_zero_angle_is_identity(self, random_image):
        assert rotate_image(random_image, 0).same_pixels(random_image)

    def test_ninety_degrees_matches_permutation(self, random_image):
        rotated = rotate_image(random_image, 90)
        expected = np.rot90(random_image.pixels, k=1, axes=(0, 1))
        assert np.abs(rotated.pixels - expected).max() <= 1e-4

    def test_half_turn_twice(self, random_image):
        twice = rotate_image(rotate_image(random_image, 180), 180)
        assert np.abs(twice.pixels - random_image.pixels).max() <= 1.0

    @pytest.mark.parametrize("angle", [13.0, 45.0, 137.5, 359.0])
    def test_centre_dot_is_fixed(self, angle):
        pixels = np.zeros((15, 15, 3))
        pixels[7, 7] = 255.0
        rotated = rotate_image(Image(pixels), angle)
        np.testing.assert_allclose(rotated.pixels[7, 7], [255.0, 255.0, 255.0])

    @pytest.mark.parametrize("angle", [-1.0, 360.0, 720.0])
    def test_angle_out_of_range(self, random_image, angle):
        with pytest.raises(ParameterError):
            rotate_image(random_image, angle)


class TestMaskPatch:
    """Test square masking."""

    def test_full_mask(self, random_image):
        masked = mask_patch(random_image, (0, 0), 16)
        assert not masked.pixels.any()

    def test_masking_black_region_is_identity(self, random_image):
        once = mask_patch(random_image, (2, 3), 5)
        assert mask_patch(once, (2, 3), 5).same_pixels(once)

    def test_exact_region(self):
        masked = mask_patch(Image(np.full((4, 4, 3), 255.0)), (1, 1), 2)
        black = np.all(masked.pixels == 0.0, axis=-1)
        expected = np.zeros((4, 4), dtype=bool)
        expected[1:3, 1:3] = True
        np.testing.assert_array_equal(black, expected)

    def test_out_of_bounds(self, random_image):
        with pytest.raises(ParameterError):
            mask_patch(random_image, (10, 10), 8)


class TestCorruption:
    """Test patch swapping and its inverse."""

    def test_zero_swaps(self, random_image, rng):
        corrupted, record = corrupt_swap(random_image, 0, 4, rng)
        assert corrupted.same_pixels(random_image)
        assert len(record) == 0

    def test_single_swap_by_hand(self):
        pixels = np.arange(48, dtype=np.float64).reshape(4, 4, 3)
        swapped = swap_patches(Image(pixels), (0, 0), (2, 2), 2)
        expected = pixels.copy()
        expected[0:2, 0:2], expected[2:4, 2:4] = pixels[2:4, 2:4], pixels[0:2, 0:2]
        np.testing.assert_array_equal(swapped.pixels, expected)

    def test_overlapping_swap_rejected(self, random_image):
        with pytest.raises(ParameterError):
            swap_patches(random_image, (0, 0), (1, 1), 4)

    @pytest.mark.parametrize("seed", range(50))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        image = Image(rng.integers(0, 256, size=(64, 64, 3)).astype(np.float64))
        corrupted, record = corrupt_swap(image, 100, 30, rng)
        assert len(record) == 100
        assert uncorrupt(corrupted, record).same_pixels(image)

    def test_empty_record(self, random_image):
        assert uncorrupt(random_image, SwapRecord(16, 16)).same_pixels(random_image)

    def test_single_swap_is_involution(self, large_image, rng):
        corrupted, record = corrupt_swap(large_image, 1, 10, rng)
        assert uncorrupt(uncorrupt(corrupted, record), record).same_pixels(corrupted)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pixel_multiset_preserved(self, large_image, seed):
        corrupted, _ = corrupt_swap(large_image, 20, 12, np.random.default_rng(seed))
        np.testing.assert_array_equal(
            np.sort(corrupted.pixels, axis=None), np.sort(large_image.pixels, axis=None)
        )

    def test_infeasible_patch(self, random_image, rng):
        with pytest.raises(ParameterError):
            corrupt_swap(random_image, 1, 9, rng)

    def test_record_dimension_mismatch(self, random_image, large_image, rng):
        _, record = corrupt_swap(large_image, 1, 4, rng)
        with pytest.raises(ParameterError):
            uncorrupt(random_image, record)


class TestPreprocessing:
    """Test channel flip and zero-centring."""

    def test_definition_arithmetic(self):
        img = Image(np.tile([10.0, 20.0, 30.0], (2, 2, 1)))
        out = preprocess(img, PreprocessParams((1.0, 2.0, 3.0)))
        assert out.channel_order is ChannelOrder.BGR
        np.testing.assert_allclose(out.pixels[0, 0], [29.0, 18.0, 7.0])

    def test_inverse_arithmetic(self):
        img = Image(np.tile([29.0, 18.0, 7.0], (2, 2, 1)), ChannelOrder.BGR)
        out = deprocess(img, PreprocessParams((1.0, 2.0, 3.0)))
        assert out.channel_order is ChannelOrder.RGB
        np.testing.assert_allclose(out.pixels[0, 0], [10.0, 20.0, 30.0])

    def test_zero_means_flip_channels(self, random_image):
        out = preprocess(random_image, PreprocessParams((0.0, 0.0, 0.0)))
        np.testing.assert_array_equal(out.pixels, random_image.pixels[..., ::-1])

    def test_round_trip(self, rng):
        for _ in range(100):
            height, width = (int(v) for v in rng.integers(1, 48, size=2))
            img = Image(rng.integers(0, 256, size=(height, width, 3)).astype(np.float64))
            restored = deprocess(preprocess(img))
            np.testing.assert_allclose(restored.pixels, img.pixels, atol=1e-5)

    def test_double_preprocess(self, random_image):
        with pytest.raises(UsageError):
            preprocess(preprocess(random_image))

    def test_deprocess_rgb(self, random_image):
        with pytest.raises(UsageError):
            deprocess(random_image)

    def test_clamp(self):
        img = Image(np.full((2, 2, 3), 500.0), ChannelOrder.BGR)
        assert deprocess(img, clamp=True).pixels.max() == 255.0

    def test_dataset_means(self):
        img = Image(np.tile([10.0, 20.0, 30.0], (2, 2, 1)))
        assert PreprocessParams.from_images([img]).means == (30.0, 20.0, 10.0)


class TestPretextGenerators:
    """Test single pretext examples."""

    def test_rotation_forced_zero(self, random_image, rng):
        example = gen_rotation_example(random_image, rng, angle=0.0)
        assert example.input.same_pixels(random_image)
        assert example.target == 0.0

    def test_rotation_forced_half_turn(self, random_image, rng):
        assert gen_rotation_example(random_image, rng, angle=180.0).target == 0.5

    def test_rotation_is_seeded(self, random_image):
        first = gen_rotation_example(random_image, np.random.default_rng(42))
        second = gen_rotation_example(random_image, np.random.default_rng(42))
        assert first.target == second.target
        assert first.input.same_pixels(second.input)

    @pytest.mark.parametrize("task", list(PretextTask))
    def test_matches_golden_file(self, task):
        images = [e.image for e in generate_synthetic(SynthConfig(n=4, side=32, seed=21))]
        dataset = build_pretext_dataset(images, task, PretextParams(swap_count=5), seed=13)
        digest = pretext_digest(dataset)
        path = GOLDEN_DIR / f"pretext_{task.value}.json"
        if not path.exists():
            GOLDEN_DIR.mkdir(exist_ok=True)
            path.write_text(json.dumps(digest, indent=2) + '\n', encoding='utf-8')
            pytest.skip(f"wrote {path.name}; commit it to freeze the generator output")
        assert digest == json.loads(path.read_text(encoding='utf-8'))

    def test_full_mask_example(self, random_image, rng):
        example = gen_missing_patch_example(random_image, rng, 16)
        assert not example.input.pixels.any()
        assert example.target.same_pixels(random_image)

    def test_mask_too_large(self, random_image, rng):
        with pytest.raises(ParameterError):
            gen_missing_patch_example(random_image, rng, 17)

    def test_corruption_without_swaps(self, random_image, rng):
        example = gen_corruption_example(random_image, rng, n_swaps=0, patch_side=4)
        assert example.input.same_pixels(example.target)

    def test_default_patch_sizes(self):
        assert default_mask_side(224) == 75
        assert default_swap_patch(224) == 30


class TestPretextDataset:
    """Test dataset construction."""

    @pytest.fixture
    def images(self, rng):
        return [Image(rng.integers(0, 256, size=(16, 16, 3)).astype(np.float64)) for _ in range(10)]

    @pytest.mark.parametrize("task", list(PretextTask))
    def test_one_example_per_image(self, images, task):
        dataset = build_pretext_dataset(images, task, PretextParams(swap_count=3), seed=5)
        assert len(dataset) == 10
        assert dataset.task is task
        for example in dataset.examples:
            if task.image_target:
                assert example.input.dimensions == example.target.dimensions

    def test_image_targets_preserve_order(self, images):
        dataset = build_pretext_dataset(images, PretextTask.INPAINT, seed=5)
        for example, image in zip(dataset.examples, images):
            assert example.target.same_pixels(image)

    def test_deterministic(self, images):
        first = build_pretext_dataset(images, PretextTask.CORRUPT, PretextParams(swap_count=5), seed=3)
        second = build_pretext_dataset(images, PretextTask.CORRUPT, PretextParams(swap_count=5), seed=3)
        for a, b in zip(first.examples, second.examples):
            assert a.input.same_pixels(b.input)

    def test_workers_do_not_change_output(self, images):
        serial = build_pretext_dataset(images, PretextTask.ROTATION, seed=8)
        parallel = build_pretext_dataset(images, PretextTask.ROTATION, seed=8, workers=4)
        assert [e.target for e in serial] == [e.target for e in parallel]

    def test_example_depends_only_on_its_index(self, images, rng):
        changed = list(images)
        changed[4] = Image(rng.integers(0, 256, size=(16, 16, 3)).astype(np.float64))
        original = build_pretext_dataset(images, PretextTask.INPAINT, seed=11)
        modified = build_pretext_dataset(changed, PretextTask.INPAINT, seed=11)
        for i in range(10):
            if i != 4:
                assert original[i].input.same_pixels(modified[i].input)
        assert not original[4].input.same_pixels(modified[4].input)

    def test_empty_image_list(self):
        with pytest.raises(UsageError):
            build_pretext_dataset([], PretextTask.ROTATION)

    def test_rotation_arrays(self, images):
        inputs, targets = build_pretext_dataset(images, PretextTask.ROTATION).arrays()
        assert inputs.shape == (10, 16, 16, 3)
        assert targets.shape == (10, 1)
        assert inputs.dtype == np.float32

    def test_write_and_load(self, images, tmp_path):
        dataset = build_pretext_dataset(images, PretextTask.ROTATION, seed=2)
        manifest = write_pretext_dataset(dataset, tmp_path)
        assert manifest.name == 'pretext_manifest.csv'
        loaded = load_pretext_dataset(tmp_path)
        assert loaded.task is PretextTask.ROTATION
        assert [e.target for e in loaded] == [e.target for e in dataset]

    @pytest.mark.slow
    def test_rotation_labels_are_uniform(self):
        tiny = [Image(np.zeros((4, 4, 3)))] * 10_000
        dataset = build_pretext_dataset(tiny, PretextTask.ROTATION, seed=0)
        counts = np.histogram([e.target for e in dataset], bins=10, range=(0.0, 1.0))[0]
        assert all(abs(count - 1000) <= 150 for count in counts)
