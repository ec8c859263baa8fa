"""Conditioned probabilistic U-net: latent Gaussians, KL, ELBO and sampling."""

import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from config import settings
from core.types import InvalidStyleError
from models.base_model import ModelSettings, SegmentationModel
from models.cprob_unet import CProbUNet, DiagonalGaussian, elbo_terms, kl_diag_gaussians
from tests.gradcheck import assert_fd_gradients


def _settings(**kw):
    values = dict(num_styles=2, base_channels=4, depth=3, convs_per_block=1,
                  dropout_p=0.0, latent_dim=3)
    values.update(kw)
    return ModelSettings(**values)


def _model(seed=0, **kw):
    torch.manual_seed(seed)
    return CProbUNet(_settings(**kw)).double().eval()


def _batch(b=2, size=8, seed=0):
    g = torch.Generator().manual_seed(seed)
    x = torch.rand(b, 1, size, size, generator=g, dtype=torch.float64)
    a = (torch.rand(b, size, size, generator=g) > 0.5).double()
    return x, a


def _gauss(mean, std):
    return DiagonalGaussian(torch.tensor(mean, dtype=torch.float64),
                            torch.tensor(std, dtype=torch.float64))


def _mc_kl(q, p, n=1_000_000, seed=0):
    z = q.rsample(torch.Generator().manual_seed(seed), n=n)
    return (q.to_torch().log_prob(z) - p.to_torch().log_prob(z)).mean().item()


def test_zero_init_prior_is_standard_normal():
    model = _model()
    x, _ = _batch()
    p = model.prior_encode(x, 0)
    assert p.mean.shape == (2, 3)
    torch.testing.assert_close(p.mean, torch.zeros(2, 3, dtype=torch.float64))
    torch.testing.assert_close(p.std, torch.ones(2, 3, dtype=torch.float64))


def test_prior_is_deterministic_in_eval_mode():
    model = _model(zero_init_heads=False)
    x, _ = _batch()
    p1, p2 = model.prior_encode(x, 1), model.prior_encode(x, 1)
    torch.testing.assert_close(p1.mean, p2.mean, rtol=0, atol=0)
    p0 = model.prior_encode(x, 0)
    assert (p0.mean - p1.mean).norm() > 0


def test_style_errors():
    model = _model()
    x, a = _batch()
    with pytest.raises(InvalidStyleError):
        model.prior_encode(x, 2)
    with pytest.raises(ValueError):
        model.prior_encode(x, None)
    with pytest.raises(ValueError):
        model.posterior_encode(x, a[:, :4], 0)


def test_gaussian_validation():
    with pytest.raises(ValueError):
        _gauss([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        _gauss([0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        kl_diag_gaussians(_gauss([0.0], [1.0]), _gauss([0.0, 0.0], [1.0, 1.0]))


def test_kl_closed_form_values():
    q = _gauss([1.0], [1.0])
    p = _gauss([0.0], [1.0])
    assert kl_diag_gaussians(q, q).item() == 0.0
    assert kl_diag_gaussians(q, p).item() == pytest.approx(0.5, abs=1e-12)
    wide = _gauss([0.0], [2.0])
    assert kl_diag_gaussians(wide, p).item() == pytest.approx(math.log(0.5) + 2 - 0.5, abs=1e-12)


def test_kl_matches_monte_carlo():
    q, p = _gauss([1.0], [1.0]), _gauss([0.0], [1.0])
    assert abs(_mc_kl(q, p) - 0.5) < 1e-2
    wide = _gauss([0.0], [2.0])
    assert abs(_mc_kl(wide, p, seed=1) - 0.8069) < 1e-2


def test_kl_formula_and_nonnegativity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mq, mp = rng.normal(size=4), rng.normal(size=4)
        sq, sp = rng.uniform(0.2, 3, 4), rng.uniform(0.2, 3, 4)
        expected = np.sum(np.log(sp / sq) + (sq ** 2 + (mq - mp) ** 2) / (2 * sp ** 2) - 0.5)
        kl = kl_diag_gaussians(_gauss(mq, sq), _gauss(mp, sp)).item()
        assert kl == pytest.approx(expected, abs=1e-10)
        assert kl >= 0


def test_perfect_logits_give_near_zero_loss():
    _, a = _batch()
    logits = (a * 2 - 1) * 100.0
    q = _gauss([[0.3, -0.2]] * 2, [[1.0, 0.5]] * 2)
    loss, bce, kl = elbo_terms(logits, a, q, q, beta=1.0)
    assert kl.abs().max().item() == 0.0
    # clipped at 15: each pixel contributes log(1 + e^-15)
    assert bce[0].item() == pytest.approx(64 * math.log1p(math.exp(-settings.LOGIT_CLIP)))
    assert loss.item() < 1e-4


def test_non_binary_annotation_rejected():
    model = _model()
    x, a = _batch()
    with pytest.raises(ValueError, match="binary"):
        model.elbo_loss(x, a * 0.5 + 0.25, 0)


def test_beta_zero_is_pure_reconstruction():
    model = _model(zero_init_heads=False)
    x, a = _batch()
    styles = torch.tensor([0, 1])
    loss = model.elbo_loss(x, a, styles, beta=0.0, generator=torch.Generator().manual_seed(3))
    with torch.no_grad():
        q = model.posterior_encode(x, a, styles)
        z = q.rsample(torch.Generator().manual_seed(3))
        logits = model.combine(model.backbone(x), z).clamp(-15, 15)
        bce = F.binary_cross_entropy_with_logits(logits, a, reduction="none").sum((1, 2)).mean()
    assert loss.item() == pytest.approx(bce.item(), rel=1e-12)
    assert model.elbo_loss(x, a, styles, beta=1.0,
                           generator=torch.Generator().manual_seed(3)).item() > loss.item()


def test_elbo_gradients_match_finite_differences():
    model = _model(zero_init_heads=False)
    x, a = _batch()
    styles = torch.tensor([1, 0])

    def loss_fn():
        return model.elbo_loss(x, a, styles, generator=torch.Generator().manual_seed(7))

    assert_fd_gradients(loss_fn, model, n_params=20, seed=1)


def test_gradients_reach_both_latent_heads():
    model = _model(zero_init_heads=False)
    model.train()
    x, a = _batch(b=4)
    model.loss(x, a, 0, generator=torch.Generator().manual_seed(0)).backward()
    assert model.prior.head.weight.grad.abs().sum() > 0
    assert model.posterior.head.weight.grad.abs().sum() > 0
    assert model.backbone.encoder.blocks[0][0].weight.grad.abs().sum() > 0


def test_zero_weight_combiner_gives_constant_logits():
    model = _model()
    torch.nn.init.zeros_(model.combiner[-1].weight)
    torch.nn.init.constant_(model.combiner[-1].bias, 0.25)
    x, _ = _batch()
    logits = model.sample_logits(x, 0, 3, torch.Generator().manual_seed(0))
    assert torch.all(logits == 0.25)
    with pytest.raises(ValueError):
        model.combine(model.backbone(x), torch.full((2, 3), float("nan"), dtype=torch.float64))


def test_sample_predictions_shapes_and_seeding():
    model = _model(zero_init_heads=False)
    x, _ = _batch(b=1)
    a = model.sample_predictions(x[0], 1, 30, seed=4)
    b = model.sample_predictions(x[0], 1, 30, seed=4)
    assert a.masks.shape == (30, 8, 8)
    np.testing.assert_array_equal(a.masks, b.masks)
    assert a.conditioning == 1 and a.source == "cprob_unet"
    with pytest.raises(ValueError):
        model.sample_predictions(x[0], 1, 0)


def test_degenerate_prior_gives_identical_samples():
    model = _model()
    with torch.no_grad():
        model.prior.head.bias[3:] = -60.0   # log-variance -> std e^-30
        model.prior.head.bias[:3] = torch.tensor([0.5, -1.0, 2.0])
    x, _ = _batch(b=1)
    samples = model.sample_predictions(x[0], 0, 10, seed=0)
    assert all(np.array_equal(m, samples.masks[0]) for m in samples.masks)
    np.testing.assert_array_equal(samples.masks[0], model.mean_prediction(x[0], 0))


def test_unconditioned_model_ignores_styles():
    torch.manual_seed(0)
    wide = CProbUNet(_settings(num_styles=3, conditioned=False, zero_init_heads=False)).double().eval()
    narrow = CProbUNet(_settings(num_styles=1, conditioned=False)).double().eval()
    narrow.load_state_dict(wide.state_dict())
    x, _ = _batch()
    gen = lambda: torch.Generator().manual_seed(5)   # noqa: E731
    ref = wide.sample_logits(x, None, 4, gen())
    assert torch.equal(ref, wide.sample_logits(x, 2, 4, gen()))
    assert torch.equal(ref, narrow.sample_logits(x, None, 4, gen()))
    assert wide.prior.encoder.config.in_channels == 1


def test_checkpoint_round_trip(tmp_path):
    torch.manual_seed(0)
    model = CProbUNet(_settings(zero_init_heads=False)).eval()
    path = model.save_checkpoint(tmp_path / "ckpt" / "best.pt")
    card = json.loads((tmp_path / "ckpt" / "best.model_card.json").read_text())
    assert card["model"] == "cprob_unet" and card["posterior_input"] == "image+annotation+styles"
    loaded = SegmentationModel.load_checkpoint(path, expected=model.settings).eval()
    assert isinstance(loaded, CProbUNet)
    x = _batch()[0].float()
    torch.testing.assert_close(loaded.mean_logits(x, 1), model.mean_logits(x, 1))
    with pytest.raises(ValueError):
        SegmentationModel.load_checkpoint(path, expected=_settings(latent_dim=4))
    with pytest.raises(FileNotFoundError):
        SegmentationModel.load_checkpoint(tmp_path / "nope.pt")
