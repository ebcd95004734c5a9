import numpy as np
import pytest

from sketchrefine import images, inference, morphology


@pytest.fixture(scope="module")
def edit_bundle(tiny_checkpoints):
    return inference.load_bundle(
        tiny_checkpoints / "refiner.pt", tiny_checkpoints / "renderer.pt")


@pytest.fixture(scope="module")
def synth_bundle(tiny_checkpoints):
    return inference.load_bundle(tiny_checkpoints / "synth.pt")


def stroke_sketch(size=64, seed=0):
    rng = np.random.default_rng(seed)
    s = np.zeros((size, size))
    for _ in range(4):
        y = int(rng.integers(4, size - 4))
        x0, x1 = sorted(rng.integers(2, size - 2, size=2))
        s[y, x0:x1 + 1] = 1.0
    return s


def random_photo(size=64, seed=1):
    # byte-quantized so PNG round trips are exact
    rng = np.random.default_rng(seed)
    return images.signed_from_bytes(rng.integers(0, 256, size=(size, size, 3)))


class TestLoadBundle:
    def test_bundle_metadata(self, edit_bundle):
        assert edit_bundle.resolution == 64
        assert edit_bundle.mode == "edit"
        assert edit_bundle.max_radius == 4.0
        assert edit_bundle.renderer is not None
        assert not edit_bundle.refiner.training
        assert all(not p.requires_grad for p in edit_bundle.refiner.parameters())

    def test_dilation_radius_scales_with_level(self, edit_bundle):
        assert inference.dilation_radius(edit_bundle, 0.0) == 0.0
        assert inference.dilation_radius(edit_bundle, 0.5) == 2.0
        assert inference.dilation_radius(edit_bundle, 1.0) == 4.0


class TestRefine:
    def test_level_zero_drawable_equals_masked_sketch(self, edit_bundle):
        sketch = stroke_sketch()
        mask = morphology.generate_mask(64, 64, np.random.default_rng(2))
        region = inference.drawable_input(edit_bundle, sketch, mask, 0.0)
        assert np.array_equal(region, sketch * mask)

    def test_level_one_uses_max_radius(self, edit_bundle):
        sketch = stroke_sketch()
        mask = images.all_ones_mask(64, 64)
        region = inference.drawable_input(edit_bundle, sketch, mask, 1.0)
        assert np.array_equal(region, morphology.dilate(sketch, 4.0))

    def test_deterministic(self, edit_bundle):
        sketch = stroke_sketch(seed=3)
        a = inference.refine(edit_bundle, sketch, 0.5)
        b = inference.refine(edit_bundle, sketch, 0.5)
        assert np.array_equal(a, b)

    def test_output_shape_and_range(self, edit_bundle):
        out = inference.refine(edit_bundle, stroke_sketch(), 1.0)
        assert out.shape == (64, 64)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_works_on_synth_bundle(self, synth_bundle):
        out = inference.refine(synth_bundle, stroke_sketch(), 0.7)
        assert out.shape == (64, 64)

    def test_resolution_mismatch_rejected(self, edit_bundle):
        with pytest.raises(inference.InferenceError):
            inference.refine(edit_bundle, np.zeros((32, 32)), 0.5)


class TestEdit:
    def test_all_outputs_produced(self, edit_bundle):
        photo = random_photo()
        mask = morphology.generate_mask(64, 64, np.random.default_rng(4))
        result = inference.edit(edit_bundle, photo, mask, stroke_sketch(), 0.5)
        assert set(result) == {"refined_sketch", "generated_photo", "final_photo"}
        assert result["generated_photo"].shape == (64, 64, 3)

    def test_zero_mask_final_equals_input(self, edit_bundle):
        photo = random_photo(seed=5)
        result = inference.edit(edit_bundle, photo, np.zeros((64, 64)),
                                stroke_sketch(), 1.0)
        assert np.array_equal(
            images.quantize_signed(result["final_photo"]),
            images.quantize_signed(photo),
        )

    def test_known_region_preserved_exactly(self, edit_bundle):
        for seed in range(5):
            photo = random_photo(seed=seed + 10)
            mask = morphology.generate_mask(64, 64, np.random.default_rng(seed))
            result = inference.edit(edit_bundle, photo, mask, stroke_sketch(seed=seed), 0.8)
            out_q = images.quantize_signed(result["final_photo"])
            in_q = images.quantize_signed(photo)
            outside = mask == 0
            assert np.array_equal(out_q[outside], in_q[outside])

    def test_refined_sketch_only_skips_renderer(self, tiny_checkpoints):
        bundle = inference.load_bundle(tiny_checkpoints / "refiner.pt")  # no renderer
        result = inference.edit(
            bundle, random_photo(), morphology.generate_mask(64, 64, np.random.default_rng(1)),
            stroke_sketch(), 0.5, outputs=("refined_sketch",))
        assert set(result) == {"refined_sketch"}

    def test_final_photo_without_renderer_rejected(self, tiny_checkpoints):
        bundle = inference.load_bundle(tiny_checkpoints / "refiner.pt")
        with pytest.raises(inference.InferenceError):
            inference.edit(bundle, random_photo(),
                           morphology.generate_mask(64, 64, np.random.default_rng(1)),
                           stroke_sketch(), 0.5)

    def test_missing_photo_or_mask_rejected(self, edit_bundle):
        with pytest.raises(inference.InferenceError):
            inference.edit(edit_bundle, None, np.zeros((64, 64)), stroke_sketch(), 0.5)
        with pytest.raises(inference.InferenceError):
            inference.edit(edit_bundle, random_photo(), None, stroke_sketch(), 0.5)

    def test_edit_requires_edit_mode(self, synth_bundle):
        with pytest.raises(inference.InferenceError):
            inference.edit(synth_bundle, random_photo(), np.zeros((64, 64)),
                           stroke_sketch(), 0.5)


class TestSynth:
    def test_outputs(self, synth_bundle):
        result = inference.synth(synth_bundle, stroke_sketch(), 1.0)
        assert set(result) == {"refined_sketch", "generated_photo"}
        assert result["generated_photo"].shape == (64, 64, 3)

    def test_requires_synth_mode(self, edit_bundle):
        with pytest.raises(inference.InferenceError):
            inference.synth(edit_bundle, stroke_sketch(), 1.0)


class TestComposite:
    def test_zero_mask_identity(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-1, 1, (8, 8, 3))
        b = rng.uniform(-1, 1, (8, 8, 3))
        assert np.array_equal(inference.composite_known(a, b, np.zeros((8, 8))), b)

    def test_full_mask_takes_rendered(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(-1, 1, (8, 8, 3))
        b = rng.uniform(-1, 1, (8, 8, 3))
        assert np.array_equal(inference.composite_known(a, b, np.ones((8, 8))), a)
