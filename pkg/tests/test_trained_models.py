"""Behaviour of both model families after a short run on a two-style synthetic set."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
import torch
from scipy import ndimage

from core.types import split_dataset
from curation.synthetic import SyntheticStyleSpec, generate_synthetic
from harness.experiment import resolve_config
from harness.training import train
from models.base_model import SegmentationModel

SHORT_RUN = ["data.root=unused", "model.base_channels=8", "model.depth=3",
             "model.convs_per_block=2", "model.dropout_p=0.0", "model.latent_dim=2",
             "model.rank=4", "model.mc_samples=8", "training.batch_size=8",
             "training.epochs=40", "training.learning_rate=1e-3"]


@pytest.fixture(scope="module")
def dataset():
    # style 1 draws its boundary 6px outside the object
    specs = [SyntheticStyleSpec(0), SyntheticStyleSpec(1, 6.0)]
    samples = generate_synthetic(64, 48, specs, 1, seed=3)
    return samples, 2, split_dataset(samples, seed=0)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, dataset):
    runs = {}
    for name in ("cprob_unet", "cssn"):
        run_dir = tmp_path_factory.mktemp(name)
        record = train(resolve_config("synthetic", overrides=[*SHORT_RUN, f"model.name={name}"]),
                       run_dir, data=dataset)
        model = SegmentationModel.load_checkpoint(run_dir / record.checkpoints["best"])
        runs[name] = (record, model.eval())
    return runs


def _test_images(dataset):
    test = dataset[2].test
    return test, torch.as_tensor(np.stack([s.image for s in test]))


def test_validation_loss_falls(trained):
    for record, _ in trained.values():
        losses = [h["val_loss"] for h in record.history]
        assert losses[-1] < losses[0]


def test_prior_depends_on_style(trained, dataset):
    _, model = trained["cprob_unet"]
    _, x = _test_images(dataset)
    with torch.no_grad():
        p0 = model.prior_encode(x, 0)
        p1 = model.prior_encode(x, 1)
    assert (p0.mean - p1.mean).abs().max() > 1e-3


@pytest.mark.parametrize("name", ["cprob_unet", "cssn"])
def test_offset_style_samples_are_larger(trained, dataset, name):
    _, model = trained[name]
    test, _ = _test_images(dataset)
    areas = {style: np.mean([model.sample_predictions(s.image, style, 8, seed=i).areas().mean()
                             for i, s in enumerate(test)])
             for style in (0, 1)}
    assert areas[1] > areas[0]


def test_cssn_neighbouring_boundary_pixels_covary(trained, dataset):
    _, model = trained["cssn"]
    test, x = _test_images(dataset)
    with torch.no_grad():
        cov = model.logit_distribution(x[:2], 0).covariance()
    width = x.shape[-1]
    values = []
    for b, sample in enumerate(test[:2]):
        truth = sample.truth.astype(bool)
        boundary = truth & ~ndimage.binary_erosion(truth)
        for r, c in zip(*np.nonzero(boundary[:, :-1])):
            i = r * width + c
            values.append(float(cov[b, i, i + 1]))
    assert values and np.mean(values) > 0


def test_cssn_style0_mean_tracks_the_object(trained, dataset):
    _, model = trained["cssn"]
    test, _ = _test_images(dataset)
    errors = {style: np.mean([abs(int(model.mean_prediction(s.image, style).sum())
                                  - int(s.truth.sum())) for s in test])
              for style in (0, 1)}
    assert errors[0] < errors[1]
