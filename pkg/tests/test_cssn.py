"""Conditioned SSN: low-rank logit Gaussian, sampling and the MC loss."""

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
from models.base_model import ModelSettings
from models.cssn import CSSN, LowRankGaussianLogits, sample_logits, ssn_loss_from_logits
from tests.gradcheck import assert_fd_gradients


def _settings(**kw):
    values = dict(num_styles=2, base_channels=4, depth=3, convs_per_block=1,
                  dropout_p=0.0, rank=2, mc_samples=5)
    values.update(kw)
    return ModelSettings(**values)


def _model(seed=0, **kw):
    torch.manual_seed(seed)
    return CSSN(_settings(**kw)).double().eval()


def _batch(b=2, size=8, seed=0):
    g = torch.Generator().manual_seed(seed)
    x = torch.rand(b, 1, size, size, generator=g, dtype=torch.float64)
    a = (torch.rand(b, size, size, generator=g) > 0.5).double()
    return x, a


def _random_dist(rng, m=16, r=2, b=1, shape=(4, 4)):
    t = lambda v: torch.tensor(v, dtype=torch.float64)   # noqa: E731
    return LowRankGaussianLogits(t(rng.normal(size=(b, m))),
                                 t(rng.uniform(0.1, 0.5, (b, m))),
                                 t(rng.normal(size=(b, m, r)) * 0.3), shape)


def test_zero_init_heads_give_diagonal_covariance():
    model = _model()
    x, _ = _batch()
    dist = model.logit_distribution(x, 0)
    assert dist.mean.shape == (2, 64) and dist.factor.shape == (2, 64, 2)
    assert torch.all(dist.mean == 0)
    torch.testing.assert_close(dist.diag, torch.full_like(dist.diag, math.log(2) + settings.DIAG_FLOOR))
    cov = dist.covariance()
    torch.testing.assert_close(cov, torch.diag_embed(dist.diag))


def test_rank_zero_is_pixel_independent():
    model = _model(rank=0)
    x, _ = _batch()
    dist = model.logit_distribution(x, 1)
    assert dist.rank == 0 and model.factor_head is None
    cov = dist.covariance()
    assert torch.count_nonzero(cov - torch.diag_embed(torch.diagonal(cov, dim1=-2, dim2=-1))) == 0
    assert model.sample_logits(x, 1, 3, torch.Generator().manual_seed(0)).shape == (3, 2, 8, 8)
    with pytest.raises(ValueError):
        dist.to_torch()


def test_distribution_validation():
    z = torch.zeros(1, 4)
    with pytest.raises(ValueError):
        LowRankGaussianLogits(z, torch.zeros(1, 4), torch.zeros(1, 4, 1), (2, 2))
    with pytest.raises(ValueError):
        LowRankGaussianLogits(z, torch.ones(1, 4), torch.zeros(1, 3, 1), (2, 2))
    with pytest.raises(ValueError):
        LowRankGaussianLogits(z, torch.ones(1, 4), torch.zeros(1, 4, 1), (3, 2))
    big = LowRankGaussianLogits(torch.zeros(1, 4160), torch.ones(1, 4160),
                                torch.zeros(1, 4160, 1), (65, 64))
    with pytest.raises(ValueError):
        big.covariance()
    with pytest.raises(ValueError):
        big.rsample(0)


def test_sample_moments_match_parameters():
    rng = np.random.default_rng(0)
    for k in range(10):
        dist = _random_dist(rng, r=int(rng.integers(1, 4)))
        eta = sample_logits(dist, 100_000, seed=k).reshape(100_000, -1)
        emp_mean = eta.mean(0)
        emp_cov = torch.cov(eta.T)
        assert (emp_mean - dist.mean[0]).abs().max() < 0.05
        assert (emp_cov - dist.covariance()[0]).abs().max() < 0.05


def test_small_exact_covariance():
    dist = LowRankGaussianLogits(torch.tensor([[0.0, 1.0, -1.0, 2.0]], dtype=torch.float64),
                                 torch.tensor([[0.5, 0.2, 0.3, 0.1]], dtype=torch.float64),
                                 torch.tensor([[[1.0], [0.5], [-0.5], [0.0]]], dtype=torch.float64),
                                 (2, 2))
    sigma = dist.covariance()[0]
    assert sigma[0, 1] == 0.5 and sigma[0, 0] == 1.5
    eta = sample_logits(dist, 100_000, seed=1).reshape(100_000, 4)
    assert (torch.cov(eta.T) - sigma).abs().max() < 0.05
    # agrees with torch's own low-rank normal
    torch.testing.assert_close(dist.to_torch().covariance_matrix[0], sigma)


def test_degenerate_distribution_collapses_to_mean():
    mean = torch.randn(1, 9, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    dist = LowRankGaussianLogits(mean, torch.full((1, 9), 1e-12, dtype=torch.float64),
                                 torch.zeros(1, 9, 1, dtype=torch.float64), (3, 3))
    eta = sample_logits(dist, 50, seed=0)
    assert (eta - mean.reshape(1, 1, 3, 3)).abs().max() < 1e-4


def test_same_seed_same_draws():
    dist = _random_dist(np.random.default_rng(1))
    torch.testing.assert_close(sample_logits(dist, 5, seed=3), sample_logits(dist, 5, seed=3),
                               rtol=0, atol=0)
    assert not torch.equal(sample_logits(dist, 5, seed=3), sample_logits(dist, 5, seed=4))


def test_covariance_is_psd():
    rng = np.random.default_rng(2)
    for _ in range(25):
        dist = _random_dist(rng, m=12, r=int(rng.integers(0, 5)), shape=(3, 4))
        eig = torch.linalg.eigvalsh(dist.covariance()[0])
        assert eig.min() >= dist.diag.min() - 1e-10


def test_single_sample_loss_is_plain_bce():
    rng = np.random.default_rng(3)
    eta = torch.tensor(rng.normal(size=(1, 2, 16)) * 3)
    a = torch.tensor((rng.uniform(size=(2, 16)) > 0.5).astype(float))
    bce = F.binary_cross_entropy_with_logits(eta[0], a, reduction="none").sum(-1).mean()
    assert ssn_loss_from_logits(eta, a).item() == pytest.approx(bce.item(), abs=1e-12)


def _direct_loss(mu, diag, factor, eps1, eps2, a):
    eta = mu + np.sqrt(diag) * eps1 + np.einsum("bmr,sbr->sbm", factor, eps2)
    log_p1 = -np.logaddexp(0.0, -eta)
    log_p0 = -np.logaddexp(0.0, eta)
    loglik = (a * log_p1 + (1 - a) * log_p0).sum(-1)            # (S, B)
    s = eta.shape[0]
    return float(np.mean(-np.log(np.exp(loglik).sum(0)) + np.log(s)))


def test_loss_matches_direct_evaluation():
    rng = np.random.default_rng(4)
    for s in (1, 2, 3, 4):
        m, r, b = 16, 2, 2
        mu, diag, factor = rng.normal(size=(b, m)), rng.uniform(0.1, 2, (b, m)), rng.normal(size=(b, m, r))
        eps1, eps2 = rng.normal(size=(s, b, m)), rng.normal(size=(s, b, r))
        a = (rng.uniform(size=(b, m)) > 0.5).astype(float)
        t = torch.tensor
        dist = LowRankGaussianLogits(t(mu), t(diag), t(factor), (4, 4))
        eta = dist.rsample(s, noise=(t(eps1), t(eps2)))
        loss = ssn_loss_from_logits(eta, t(a)).item()
        assert loss == pytest.approx(_direct_loss(mu, diag, factor, eps1, eps2, a), abs=1e-9)


def test_loss_is_permutation_invariant_and_stable():
    rng = np.random.default_rng(5)
    eta = torch.tensor(rng.normal(size=(6, 3, 16)) * 4)
    a = torch.tensor((rng.uniform(size=(3, 16)) > 0.5).astype(float))
    perm = torch.tensor(rng.permutation(6))
    assert ssn_loss_from_logits(eta, a).item() == pytest.approx(
        ssn_loss_from_logits(eta[perm], a).item(), abs=1e-12)
    extreme = torch.tensor(rng.choice([-500.0, 500.0], size=(20, 3, 16)))
    assert math.isfinite(ssn_loss_from_logits(extreme, a).item())
    with pytest.raises(ValueError):
        ssn_loss_from_logits(eta, a * 0.5)


def test_ssn_loss_errors():
    model = _model()
    x, a = _batch()
    with pytest.raises(ValueError):
        model.ssn_loss(x, a, 0, mc_samples=0)
    with pytest.raises(ValueError):
        model.ssn_loss(x, a + 1, 0)
    with pytest.raises(InvalidStyleError):
        model.ssn_loss(x, a, 5)


def test_ssn_gradients_match_finite_differences():
    model = _model(zero_init_heads=False)
    x, a = _batch()
    styles = torch.tensor([0, 1])

    def loss_fn():
        return model.ssn_loss(x, a, styles, mc_samples=5,
                              generator=torch.Generator().manual_seed(7))

    assert_fd_gradients(loss_fn, model, n_params=20, seed=2)


def test_zero_mean_ties_resolve_to_background():
    model = _model()
    x, _ = _batch(b=1)
    assert model.mean_prediction(x[0], 0).sum() == 0


def test_style_changes_the_distribution():
    model = _model(zero_init_heads=False)
    x, _ = _batch(b=1)
    d0, d1 = model.logit_distribution(x, 0), model.logit_distribution(x, 1)
    assert not torch.equal(d0.mean, d1.mean)
    assert not torch.equal(d0.factor, d1.factor)


def test_unconditioned_model_ignores_styles():
    torch.manual_seed(0)
    wide = CSSN(_settings(num_styles=3, conditioned=False, zero_init_heads=False)).double().eval()
    narrow = CSSN(_settings(num_styles=1, conditioned=False)).double().eval()
    narrow.load_state_dict(wide.state_dict())
    x, _ = _batch()
    gen = lambda: torch.Generator().manual_seed(5)   # noqa: E731
    ref = wide.sample_logits(x, None, 4, gen())
    assert torch.equal(ref, wide.sample_logits(x, 1, 4, gen()))
    assert torch.equal(ref, narrow.sample_logits(x, None, 4, gen()))
    assert wide.mean_head.in_channels == wide.backbone.out_channels
