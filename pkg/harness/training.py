"""Training loop: (image, annotation, style) pairs, Adam, best-val checkpoint."""

import logging
import math
import sys
from collections import Counter
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

import models  # noqa: F401  registers the model classes
from config import settings
from core.registry import model_registry
from core.types import AnnotatedSample, DatasetSplit, count_pairs, split_dataset, split_digest
from curation.styles import dynamic_augmentation
from harness.experiment import CONFIG_FILE, ExperimentConfig, RunRecord
from utils.dataset_io import load_dataset

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "checkpoints/best.pt"
LAST_CHECKPOINT = "checkpoints/last.pt"
DIAGNOSTIC = "diagnostic.pt"


class TrainingDivergedError(RuntimeError):
    """A training loss became NaN or infinite."""


class AnnotationPairs(Dataset):
    """One item per (image, annotation) pair, optionally restricted to one style.

    `seen` counts the style of every pair handed out, so a subset run can
    show it never touched another style.
    """

    def __init__(self, samples: Sequence[AnnotatedSample], style: Optional[int] = None):
        self.samples = list(samples)
        self.style = style
        self.index: List[Tuple[int, int]] = [
            (i, k) for i, s in enumerate(self.samples)
            for k, (_, l) in enumerate(s.annotations)
            if style is None or l.id == style]
        self.seen: Counter = Counter()

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, item):
        i, k = self.index[item]
        sample = self.samples[i]
        mask, style = sample.annotations[k]
        self.seen[style.id] += 1
        return (torch.from_numpy(sample.image),
                torch.from_numpy(mask.grid.astype(np.float32)),
                torch.tensor(style.id, dtype=torch.long))


def prepare_data(config: ExperimentConfig) -> Tuple[List[AnnotatedSample], int, DatasetSplit]:
    """Load the dataset at config.data.root and its stored (or a fresh seeded) split."""
    root = Path(config.data.root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    samples, num_styles, split = load_dataset(root)
    if split is None:
        split = split_dataset(samples, settings.SPLIT_RATIOS, config.data.split_seed)
    return samples, num_styles, split


def _seed_everything(seed: int, deterministic: bool) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % 2 ** 32)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)


def _styles_for(model, styles: torch.Tensor) -> Optional[torch.Tensor]:
    return styles if model.conditioned else None


def _write_diagnostic(run_dir: Path, model, batch, epoch: int, step: int) -> Path:
    x, a, styles = batch
    path = run_dir / DIAGNOSTIC
    torch.save({"epoch": epoch, "step": step, "images": x.cpu(), "annotations": a.cpu(),
                "styles": styles.cpu(), "state_dict": model.state_dict()}, path)
    return path


@torch.no_grad()
def validation_loss(model, pairs: AnnotationPairs, batch_size: int, seed: int,
                    device: Union[str, torch.device]) -> float:
    """Mean loss over the validation pairs with a fixed noise stream."""
    if len(pairs) == 0:
        return float("nan")
    model.eval()
    gen = torch.Generator(device=device).manual_seed(seed)
    total, count = 0.0, 0
    for x, a, styles in DataLoader(pairs, batch_size=batch_size, shuffle=False):
        x, a, styles = x.to(device), a.to(device), styles.to(device)
        loss = model.loss(x, a, _styles_for(model, styles), generator=gen)
        total += float(loss) * x.shape[0]
        count += x.shape[0]
    return total / count


def train(config: ExperimentConfig, run_dir: Union[str, Path],
          data: Optional[Tuple[List[AnnotatedSample], int, DatasetSplit]] = None) -> RunRecord:
    """Fit one model and leave checkpoints, config.json and run.json in run_dir.

    The best-validation-loss epoch is kept; with epochs=0 the untrained
    weights are saved instead.

    Args:
        config: Resolved experiment config (model, data, training and evaluation sections)
        run_dir: Directory that receives checkpoints/, config.json and run.json
        data: Optional (samples, num_styles, split); read from config.data.root if omitted

    Returns:
        The saved RunRecord with per-epoch history and the best epoch

    Raises:
        TrainingDivergedError: If a loss becomes non-finite
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    tc = config.training
    _seed_everything(tc.seed, tc.deterministic)
    device = torch.device(tc.device)

    samples, num_styles, split = data if data is not None else prepare_data(config)
    subset = config.model.subset_style if config.model.conditioning == "subset" else None
    if subset is not None:
        if not 0 <= subset < num_styles:
            raise ValueError(f"subset style {subset} out of range for {num_styles} styles")
        if count_pairs(split.train, subset) == 0:
            raise ValueError(f"style {subset} has no training annotations")

    in_channels = split.train[0].channels
    model_settings = config.model_settings(num_styles, in_channels)
    model = model_registry.create(config.model.name, model_settings).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=tc.learning_rate)
    (run_dir / CONFIG_FILE).write_text(config.to_json())

    val_pairs = AnnotationPairs(split.val, subset)
    record = RunRecord(
        run_id=run_dir.name, config=config.to_sections(), tag=config.tag,
        num_styles=num_styles,
        seeds={"training": tc.seed, "split": split.seed, "evaluation": config.evaluation.seed},
        split_digests={"train": split_digest(split.train), "val": split_digest(split.val),
                       "test": split_digest(split.test)},
        nondeterministic=device.type != "cpu" and not tc.deterministic,
    )
    logger.info("training %s on %d train / %d val pairs for %d epochs",
                config.tag, count_pairs(split.train, subset), len(val_pairs), tc.epochs)

    best = math.inf
    seen: Counter = Counter()
    gen = torch.Generator(device=device).manual_seed(tc.seed)
    step = 0
    for epoch in tqdm(range(tc.epochs), desc=config.tag, disable=not sys.stderr.isatty()):
        train_samples = split.train
        if config.data.dynamic_augmentation:
            train_samples = dynamic_augmentation(
                split.train, np.random.default_rng([tc.seed, epoch]),
                config.data.augment_radius, config.data.augment_sigma)
        pairs = AnnotationPairs(train_samples, subset)
        loader = DataLoader(pairs, batch_size=tc.batch_size, shuffle=True,
                            generator=torch.Generator().manual_seed(tc.seed + epoch))
        model.train()
        total, count = 0.0, 0
        for batch in loader:
            x, a, styles = (t.to(device) for t in batch)
            loss = model.loss(x, a, _styles_for(model, styles), generator=gen)
            if not torch.isfinite(loss):
                path = _write_diagnostic(run_dir, model, batch, epoch, step)
                raise TrainingDivergedError(
                    f"loss became {float(loss)} at epoch {epoch}, step {step}; snapshot in {path}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss) * x.shape[0]
            count += x.shape[0]
            step += 1
        seen.update(pairs.seen)

        val = validation_loss(model, val_pairs, tc.batch_size, tc.seed, device)
        train_loss = total / max(count, 1)
        record.history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val})
        logger.debug("epoch %d: train %.4f val %.4f", epoch, train_loss, val)
        # without validation pairs the training loss decides
        score = val if not math.isnan(val) else train_loss
        if score < best:
            best = score
            record.best_epoch = epoch
            model.save_checkpoint(run_dir / BEST_CHECKPOINT)

    if record.best_epoch is None:
        model.save_checkpoint(run_dir / BEST_CHECKPOINT)
    model.save_checkpoint(run_dir / LAST_CHECKPOINT)
    record.checkpoints = {"best": BEST_CHECKPOINT, "last": LAST_CHECKPOINT}
    record.pairs_seen = {str(k): v for k, v in sorted(seen.items())}
    record.save(run_dir)
    logger.info("finished %s; best epoch %s", record.run_id, record.best_epoch)
    return record
