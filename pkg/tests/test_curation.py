"""Cell cropping, style assembly and the dilate-and-blur augmentation."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from scipy import ndimage

from core.types import AnnotatedSample, LabelStyle, SegmentationMask
from curation.cells import CropSpec, crop_to_spec, curate_cell_crops, instance_masks
from curation.styles import assemble_style_dataset, dilate_blur_augment, dynamic_augmentation

# (row_min, row_max, col_min, col_max) of five square cells in a 200x200 frame
CELLS = [
    (50, 59, 50, 59),      # fits
    (5, 14, 100, 109),     # margin leaves the top edge
    (150, 165, 150, 165),  # fits, touches nothing
    (100, 110, 185, 195),  # margin leaves the right edge
    (100, 120, 30, 45),    # fits
]


@pytest.fixture
def frame():
    rng = np.random.default_rng(0)
    image = rng.uniform(0.1, 0.3, (200, 200)).astype(np.float32)
    labels = np.zeros((200, 200), dtype=np.int64)
    for k, (r0, r1, c0, c1) in enumerate(CELLS, start=1):
        labels[r0:r1 + 1, c0:c1 + 1] = k
        image[r0:r1 + 1, c0:c1 + 1] = 0.8
    return image, labels


def test_crop_spec_bounds():
    spec = CropSpec((50, 59, 50, 59), margin=20)
    assert spec.extended == (30, 79, 30, 79)
    assert spec.fits((80, 80)) and not spec.fits((79, 80))
    with pytest.raises(ValueError):
        spec.crop(np.zeros((60, 60)))


def test_curate_accepts_exactly_the_fitting_cells(frame):
    image, labels = frame
    samples = curate_cell_crops([image], [labels], margin=20, target=128)
    assert [s.sample_id for s in samples] == ["f000_c000", "f000_c002", "f000_c004"]
    for s in samples:
        assert s.image.shape == (1, 128, 128)
        mask, style = s.annotations[0]
        assert mask.grid.shape == (128, 128) and style.id == 0
        assert mask.area > 0
        assert s.metadata["margin"] == 20
    assert samples[0].metadata["bbox"] == [50, 59, 50, 59]


def test_curate_keeps_only_extra_components_touching_the_cell(frame):
    image, labels = frame
    coarse = ndimage.binary_dilation(labels > 0, iterations=2).astype(np.uint8)
    coarse[32:36, 32:36] = 1   # stray blob inside cell 1's crop window
    samples = curate_cell_crops([image], [labels], extra_annotations={"rater": [coarse]},
                                style_assignment={"rater": 1}, num_styles=2)
    first = samples[0]
    (fine, s0), (wide, s1) = first.annotations
    assert (s0.id, s1.id) == (0, 1)
    assert wide.area > fine.area
    assert wide.grid[:16, :16].sum() == 0


def test_curate_requires_style_for_every_annotator(frame):
    image, labels = frame
    with pytest.raises(ValueError):
        curate_cell_crops([image], [labels], extra_annotations={"rater": [labels > 0]})


def test_crop_to_spec_kinds():
    spec = CropSpec((10, 19, 10, 19), margin=5, target_size=32)
    mask = np.zeros((40, 40), dtype=np.uint8)
    mask[10:20, 10:20] = 1
    out = crop_to_spec(mask, spec, "mask")
    assert out.shape == (32, 32) and set(np.unique(out)) == {0, 1}
    assert crop_to_spec(np.ones((40, 40), np.float32), spec, "image").shape == (1, 32, 32)
    with pytest.raises(ValueError):
        crop_to_spec(mask, spec, "video")


def test_instance_masks_eight_connected():
    mask = np.zeros((6, 6), dtype=np.uint8)
    mask[1, 1] = mask[2, 2] = 1     # diagonal neighbours: one cell
    mask[4, 4] = 1
    parts = instance_masks(mask)
    assert len(parts) == 2 and parts[0].sum() == 2


def test_assemble_style_dataset():
    rng = np.random.default_rng(3)
    image = rng.uniform(0, 1, (3, 16, 16)).astype(np.float32)
    m = (rng.uniform(size=(16, 16)) > 0.5).astype(np.uint8)
    raw = {"a": (image, [("fine", m), ("coarse", m)]), "b": (image, [("coarse", m)])}
    samples = assemble_style_dataset(raw, {"fine": 0, "coarse": 2})
    assert [s.sample_id for s in samples] == ["a", "b"]
    assert samples[0].annotations[1][1] == LabelStyle(2, 3)
    # images may lack a style entirely
    assert samples[1].styles == [2]
    resized = assemble_style_dataset(raw, {"fine": 0, "coarse": 1}, target_size=32)
    assert resized[0].shape == (32, 32)
    with pytest.raises(ValueError):
        assemble_style_dataset(raw, {"fine": 0})


def test_dilate_blur_is_monotone():
    rng = np.random.default_rng(11)
    for _ in range(100):
        mask = ndimage.gaussian_filter(rng.uniform(size=(32, 32)), 2) > 0.52
        sigma = float(rng.uniform(0, 3))
        out = dilate_blur_augment(mask.astype(np.uint8), int(rng.integers(0, 6)), sigma)
        assert np.all(out >= mask)
        # every radius step keeps the previous result inside the next
        previous = mask.astype(np.uint8)
        for radius in range(7):
            grown = dilate_blur_augment(mask.astype(np.uint8), radius, sigma)
            assert np.all(grown >= previous) and grown.sum() >= previous.sum()
            previous = grown


def test_dilate_blur_edge_cases():
    empty = np.zeros((8, 8), dtype=np.uint8)
    assert dilate_blur_augment(empty).sum() == 0
    with pytest.raises(ValueError):
        dilate_blur_augment(np.full((4, 4), 2))
    with pytest.raises(ValueError):
        dilate_blur_augment(empty, -1, 1.0)

    square = np.zeros((32, 32), dtype=np.uint8)
    square[11:21, 11:21] = 1
    assert dilate_blur_augment(square, 3, 1.0).sum() > 100
    np.testing.assert_array_equal(dilate_blur_augment(square, 0, 0.0), square)
    np.testing.assert_array_equal(dilate_blur_augment(square, 0, 1e-3), square)


def test_dynamic_augmentation_replaces_coarse_annotations():
    fine = np.zeros((24, 24), dtype=np.uint8)
    fine[8:16, 8:16] = 1
    coarse = np.ones((24, 24), dtype=np.uint8)
    s = AnnotatedSample(np.zeros((1, 24, 24)),
                        ((SegmentationMask(fine), LabelStyle(0, 2)),
                         (SegmentationMask(coarse), LabelStyle(1, 2))), "x")
    no_fine = AnnotatedSample(np.zeros((1, 24, 24)),
                              ((SegmentationMask(coarse), LabelStyle(1, 2)),), "y")
    out = dynamic_augmentation([s, no_fine], np.random.default_rng(0), 3, 1.0)
    (m0, l0), (m1, l1) = out[0].annotations
    np.testing.assert_array_equal(m0.grid, fine)
    np.testing.assert_array_equal(m1.grid, dilate_blur_augment(fine, 3, 1.0))
    assert l1.id == 1
    assert out[1] is no_fine
