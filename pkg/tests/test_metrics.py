"""IoU, GED, entropy, AUROC, error strata, area bias and mixture sampling."""

import itertools
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
import torch
from scipy import ndimage

from core.types import AnnotatedSample, LabelStyle, SegmentationMask
from metrics import (
    AreaBias, ErrorStrata, PredictiveSampleSet, area_bias, auroc_pixelwise,
    error_entropy_strata, ged, ged_terms, iou, pixel_entropy, sample_full_distribution,
)
from metrics.sample_sets import check_style_probs, resolve_style_probs
from models.base_model import ModelSettings
from models.cssn import CSSN


def _brute_distance(u, v):
    u = {i for i, x in enumerate(np.ravel(u)) if x}
    v = {i for i, x in enumerate(np.ravel(v)) if x}
    union = len(u | v)
    return 0.0 if union == 0 else 1.0 - len(u & v) / union


def _brute_ged(ps, aa):
    def mean_d(xs, ys):
        return sum(_brute_distance(x, y) for x in xs for y in ys) / (len(xs) * len(ys))
    return 2 * mean_d(ps, aa) - mean_d(ps, ps) - mean_d(aa, aa)


def _brute_auroc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


# -- IoU ----------------------------------------------------------------------

def test_iou_cases():
    a = np.array([[1, 1], [0, 0]])
    assert iou(a, a) == 1.0
    assert iou(a, 1 - a) == 0.0
    assert iou(a, np.array([[1, 0], [1, 0]])) == pytest.approx(1 / 3)
    assert iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    assert iou(SegmentationMask(a), a) == 1.0
    with pytest.raises(ValueError):
        iou(a, np.zeros((3, 2)))


def test_jaccard_distance_triangle_inequality():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, y, z = (rng.uniform(size=(4, 4)) > 0.5 for _ in range(3))
        assert iou(x, y) == iou(y, x)
        assert 1 - iou(x, z) <= (1 - iou(x, y)) + (1 - iou(y, z)) + 1e-12


# -- GED ----------------------------------------------------------------------

def test_ged_small_cases():
    m = np.zeros((4, 4), dtype=np.uint8)
    m[:2, :2] = 1
    assert ged([m], [m]) == 0.0
    m2 = m.copy()
    m2[:2, 2:] = 1          # IoU(m, m2) = 4 / 8
    assert ged([m], [m2]) == pytest.approx(1.0)
    assert ged([np.zeros((4, 4))], [np.zeros((4, 4))]) == 0.0
    with pytest.raises(ValueError):
        ged([], [m])
    with pytest.raises(ValueError):
        ged([m], [np.zeros((3, 3))])


def test_ged_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(50):
        ps = [rng.uniform(size=(4, 4)) > rng.uniform(0.2, 0.9) for _ in range(rng.integers(1, 5))]
        aa = [rng.uniform(size=(4, 4)) > rng.uniform(0.2, 0.9) for _ in range(rng.integers(1, 5))]
        if rng.uniform() < 0.2:
            aa[0] = np.zeros((4, 4), dtype=bool)
        assert ged(ps, aa) == pytest.approx(_brute_ged(ps, aa), abs=1e-12)
        assert ged(ps, aa) == pytest.approx(ged(aa, ps), abs=1e-12)
        assert ged(ps, ps) == pytest.approx(0.0, abs=1e-12)


def test_ged_accepts_sample_sets_and_reports_terms():
    stack = np.zeros((3, 4, 4), dtype=np.uint8)
    stack[0, 0, 0] = stack[1, :2, :2] = 1
    samples = PredictiveSampleSet(stack, "stub", 0)
    cross, ws, wa = ged_terms(samples, [stack[0]])
    assert wa == 0.0
    assert cross == pytest.approx((0 + 0.75 + 1) / 3)
    assert ged(samples, [stack[0]]) == pytest.approx(2 * cross - ws)


# -- entropy and AUROC ------------------------------------------------------

def test_pixel_entropy_values():
    assert abs(pixel_entropy(0.5) - math.log(2)) < 1e-12
    np.testing.assert_array_equal(pixel_entropy([0.0, 1.0]), [0.0, 0.0])
    assert pixel_entropy(0.9) == pytest.approx(0.3251, abs=1e-4)
    p = np.random.default_rng(2).uniform(size=100)
    np.testing.assert_allclose(pixel_entropy(p), pixel_entropy(1 - p), atol=1e-12)
    with pytest.raises(ValueError):
        pixel_entropy([0.5, 1.2])


def test_auroc_simple_cases():
    gt = np.array([[1, 0], [0, 1]])
    assert auroc_pixelwise([gt.astype(float)], [gt]) == 1.0
    assert auroc_pixelwise([np.full((2, 2), 0.3)], [gt]) == 0.5
    with pytest.raises(ValueError):
        auroc_pixelwise([np.full((2, 2), 0.3)], [np.zeros((2, 2))])
    with pytest.raises(ValueError):
        auroc_pixelwise([np.zeros((2, 2))], [gt, gt])


def test_auroc_hand_case():
    scores = np.array([0.9, 0.8, 0.7, 0.6, 0.6, 0.4, 0.3, 0.1])
    labels = np.array([1, 1, 0, 1, 0, 0, 1, 0])
    # 16 pairs: 11 concordant, 1 tie, 4 discordant
    assert auroc_pixelwise([scores.reshape(2, 4)], [labels.reshape(2, 4)]) == pytest.approx(11.5 / 16)


def test_auroc_matches_pair_counting_pooled():
    rng = np.random.default_rng(3)
    for _ in range(30):
        size = int(rng.integers(2, 9))
        fields = [np.round(rng.uniform(size=(1, size)), 1) for _ in range(2)]
        gts = [rng.integers(0, 2, (1, size)) for _ in range(2)]
        gts[0][0, 0], gts[1][0, 0] = 1, 0
        scores = np.concatenate([f.ravel() for f in fields])
        labels = np.concatenate([g.ravel() for g in gts])
        assert auroc_pixelwise(fields, gts) == pytest.approx(_brute_auroc(scores, labels), abs=1e-12)


# -- error strata ---------------------------------------------------------------

def test_strata_perfect_prediction():
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[1:3, 1:3] = 1
    strata = error_entropy_strata(gt.astype(float), gt)
    assert strata.sizes() == {"TP": 4, "FP": 0, "TN": 12, "FN": 0}
    medians = strata.medians()
    assert medians["TP"] == 0.0 and medians["TN"] == 0.0
    assert math.isnan(medians["FP"]) and math.isnan(strata.error_median())


def test_strata_ties_are_background():
    gt = np.eye(3, dtype=np.uint8)
    strata = error_entropy_strata(np.full((3, 3), 0.5), gt)
    assert strata.sizes() == {"TP": 0, "FP": 0, "TN": 6, "FN": 3}
    np.testing.assert_allclose(strata.entropy, math.log(2), atol=1e-12)


def test_strata_match_brute_force():
    rng = np.random.default_rng(4)
    p = rng.uniform(size=(6, 6))
    gt = rng.integers(0, 2, (6, 6))
    strata = error_entropy_strata(p, SegmentationMask(gt))
    counts = {s: 0 for s in ("TP", "FP", "TN", "FN")}
    for pi, gi in zip(p.ravel(), gt.ravel()):
        pred = pi > 0.5
        counts[("T" if pred == bool(gi) else "F") + ("P" if pred else "N")] += 1
    assert strata.sizes() == counts
    frame = strata.to_frame()
    assert list(frame.columns) == ["stratum", "entropy"] and len(frame) == 36
    both = ErrorStrata.concat([strata, strata])
    assert both.sizes()["TP"] == 2 * counts["TP"]
    assert ErrorStrata.concat([]).sizes()["FN"] == 0
    with pytest.raises(ValueError):
        strata.values("XX")
    with pytest.raises(ValueError):
        error_entropy_strata(p, gt[:5])


# -- area bias ------------------------------------------------------------------

def test_area_bias_pixel_counts():
    gt = np.zeros((20, 20), dtype=np.uint8)
    gt[5:15, 5:15] = 1
    assert area_bias([gt], [gt]).mean == 0.0
    ring = ndimage.binary_dilation(gt) & ~gt.astype(bool)   # 40 pixels
    grown = gt.copy()
    rows, cols = np.nonzero(ring)
    grown[rows[3:], cols[3:]] = 1
    bias = area_bias([grown], [gt])
    assert bias.differences.tolist() == [37]
    two = area_bias([gt, grown], [gt, grown])
    assert sorted(two.differences.tolist()) == [-37, 0, 0, 37]
    assert two.mean == 0.0 and two.std == pytest.approx(np.std([-37, 0, 0, 37]))
    assert AreaBias.concat([bias, two]).n == 5
    assert math.isnan(AreaBias.concat([]).mean)


# -- sample sets and mixtures -----------------------------------------------------

def test_sample_set_validation_and_persistence(tmp_path):
    with pytest.raises(ValueError):
        PredictiveSampleSet(np.zeros((0, 2, 2)), "m", 0)
    with pytest.raises(ValueError):
        PredictiveSampleSet(np.full((1, 2, 2), 2), "m", 0)
    with pytest.raises(ValueError):
        PredictiveSampleSet(np.zeros((2, 2, 2)), "m", "mixture", np.array([0]))
    s = PredictiveSampleSet(np.eye(3)[None].repeat(2, 0), "cssn", 2)
    assert s.n == 2 and s.shape == (3, 3) and s.areas().tolist() == [3, 3]
    s.save(tmp_path / "set.npz")
    back = PredictiveSampleSet.load(tmp_path / "set.npz")
    assert back.conditioning == 2 and back.source == "cssn"
    np.testing.assert_array_equal(back.masks, s.masks)


def test_style_probability_resolution():
    np.testing.assert_allclose(resolve_style_probs("uniform", 4), [0.25] * 4)
    s = AnnotatedSample(np.zeros((1, 2, 2)),
                        tuple((SegmentationMask(np.zeros((2, 2))), LabelStyle(k, 2)) for k in (0, 0, 0, 1)),
                        "s")
    np.testing.assert_allclose(resolve_style_probs("train", 2, [s]), [0.75, 0.25])
    with pytest.raises(ValueError):
        resolve_style_probs("train", 2)
    with pytest.raises(ValueError):
        resolve_style_probs("weighted", 2)
    for bad in ([0.5, 0.6, 0.0], [0.5, 0.5], [1.5, -0.5, 0.0], [float("nan"), 0.5, 0.5]):
        with pytest.raises(ValueError):
            check_style_probs(bad, 3)


@pytest.fixture(scope="module")
def three_style_model():
    torch.manual_seed(0)
    settings = ModelSettings(num_styles=3, base_channels=4, depth=2, convs_per_block=1,
                             dropout_p=0.0, rank=2, zero_init_heads=False)
    return CSSN(settings).eval()


def test_mixture_style_frequencies(three_style_model):
    x = torch.rand(1, 1, 8, 8, generator=torch.Generator().manual_seed(1))
    out = sample_full_distribution(three_style_model, x[0], 3000, [1 / 3] * 3, seed=0)
    assert out.conditioning == "mixture" and out.n == 3000
    counts = np.bincount(out.styles, minlength=3)
    sigma = math.sqrt(3000 * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - 1000) < 3 * sigma)


def test_degenerate_mixture_equals_single_style(three_style_model):
    x = torch.rand(1, 8, 8, generator=torch.Generator().manual_seed(2))
    mix = sample_full_distribution(three_style_model, x, 40, [1.0, 0.0, 0.0], seed=9)
    direct = three_style_model.sample_predictions(x, 0, 40, seed=9)
    np.testing.assert_array_equal(mix.masks, direct.masks)
    assert set(mix.styles.tolist()) == {0}
    with pytest.raises(ValueError):
        sample_full_distribution(three_style_model, x, 10, [0.5, 0.5], seed=0)
    with pytest.raises(ValueError):
        sample_full_distribution(three_style_model, x, 0, [1.0, 0.0, 0.0])


def test_mixture_of_unconditioned_model():
    torch.manual_seed(0)
    model = CSSN(ModelSettings(num_styles=2, conditioned=False, base_channels=4, depth=2,
                               convs_per_block=1, rank=1)).eval()
    x = torch.rand(1, 8, 8)
    out = sample_full_distribution(model, x, 5, "ignored", seed=0)
    assert out.conditioning == "unconditioned" and out.styles is None


def test_seeded_generators_are_shared():
    import metrics.sample_sets as sample_sets
    from core.generators import make_generator

    assert sample_sets.make_generator is make_generator
    a = torch.randn(4, generator=make_generator(7))
    b = torch.randn(4, generator=make_generator(7))
    torch.testing.assert_close(a, b)
    gen = torch.Generator()
    assert make_generator(7, gen) is gen
