"""Experiment configuration and the record every run leaves behind.

A config is four sections (model, data, training, evaluation) resolved
from a preset, an optional JSON file and `section.key=value` overrides,
in that order. The resolved document is written to the run directory so
each reported number traces back to a config and its seeds.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from config import settings
from core import spec as config_spec
from models.base_model import ModelSettings

logger = logging.getLogger(__name__)

CONDITIONING_MODES = ("conditioned", "all", "subset")
RUN_RECORD = "run.json"
CONFIG_FILE = "config.json"


@dataclass
class ModelSection:
    name: str = "cprob_unet"
    conditioning: str = "conditioned"
    subset_style: Optional[int] = None
    base_channels: int = 32
    depth: int = 4
    convs_per_block: int = 3
    dropout_p: float = 0.5
    normalization: str = "none"
    latent_dim: int = 6
    beta: float = 1.0
    rank: int = 10
    mc_samples: int = 20
    style_embedding: bool = False


@dataclass
class DataSection:
    root: str = ""
    image_size: int = 64
    split_seed: int = 0
    dynamic_augmentation: bool = False
    augment_radius: int = 5
    augment_sigma: float = 2.0


@dataclass
class TrainingSection:
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    device: str = "cpu"
    deterministic: bool = True


@dataclass
class EvaluationSection:
    samples: int = settings.EVAL_SAMPLES
    style_probs: Union[str, List[float]] = "uniform"
    seed: int = 0


_SECTION_TYPES = {"model": ModelSection, "data": DataSection,
                  "training": TrainingSection, "evaluation": EvaluationSection}


def _build_section(name: str, values: Dict):
    cls = _SECTION_TYPES[name]
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown {name} settings: {sorted(unknown)}")
    return cls(**values)


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    data: DataSection = field(default_factory=DataSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)

    def __post_init__(self):
        if self.model.name not in ("cprob_unet", "cssn"):
            raise ValueError(f"unknown model {self.model.name!r}; use cprob_unet or cssn")
        if self.model.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"conditioning must be one of {CONDITIONING_MODES}, "
                             f"got {self.model.conditioning!r}")
        if self.model.conditioning == "subset" and self.model.subset_style is None:
            raise ValueError("subset conditioning needs model.subset_style")
        if self.training.optimizer.lower() != "adam":
            raise ValueError("only the adam optimizer is supported")
        if self.training.epochs < 0 or self.training.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.training.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.evaluation.samples < 1:
            raise ValueError("evaluation.samples must be >= 1")

    @property
    def conditioned(self) -> bool:
        return self.model.conditioning == "conditioned"

    @property
    def tag(self) -> str:
        """Short model label such as 'c-SSN', 'prob. U-net (all)' or '... (subset 0) (aug)'."""
        base = {"cprob_unet": "prob. U-net", "cssn": "SSN"}[self.model.name]
        if self.conditioned:
            label = f"c-{base}"
        elif self.model.conditioning == "all":
            label = f"{base} (all)"
        else:
            label = f"{base} (subset {self.model.subset_style})"
        return label + (" (aug)" if self.data.dynamic_augmentation else "")

    def model_settings(self, num_styles: int, in_channels: int) -> ModelSettings:
        m = self.model
        return ModelSettings(
            in_channels=in_channels, num_styles=num_styles, conditioned=self.conditioned,
            base_channels=m.base_channels, depth=m.depth, convs_per_block=m.convs_per_block,
            dropout_p=m.dropout_p, normalization=m.normalization, latent_dim=m.latent_dim,
            beta=m.beta, rank=m.rank, mc_samples=m.mc_samples,
            style_embedding=m.style_embedding,
        )

    def to_sections(self) -> Dict[str, Dict]:
        return {name: asdict(getattr(self, name)) for name in config_spec.SECTIONS}

    @classmethod
    def from_sections(cls, sections: Dict[str, Dict]) -> "ExperimentConfig":
        return cls(**{name: _build_section(name, sections.get(name, {}))
                      for name in config_spec.SECTIONS})

    def to_json(self) -> str:
        return config_spec.build_spec(self.to_sections())

    def digest(self) -> str:
        text = json.dumps(self.to_sections(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:8]

    def default_run_id(self) -> str:
        cond = self.model.conditioning
        if cond == "subset":
            cond = f"subset{self.model.subset_style}"
        aug = "-aug" if self.data.dynamic_augmentation else ""
        return f"{self.model.name}-{cond}{aug}-s{self.training.seed}-{self.digest()}"


def resolve_config(preset: Optional[str] = "synthetic",
                   config_file: Optional[Union[str, Path]] = None,
                   overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Preset, then file, then `section.key=value` overrides."""
    doc: Dict[str, Dict] = {name: {} for name in config_spec.SECTIONS}
    if preset:
        if preset not in settings.PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(settings.PRESETS)}")
        doc = config_spec.merge(doc, settings.PRESETS[preset])
    if config_file:
        doc = config_spec.merge(doc, config_spec.load_spec(config_file))
    doc = config_spec.apply_overrides(doc, overrides)
    if not doc["data"].get("root"):
        doc["data"]["root"] = str(settings.data_root())
    return ExperimentConfig.from_sections(doc)


def load_config(run_dir: Union[str, Path]) -> ExperimentConfig:
    return ExperimentConfig.from_sections(
        config_spec.load_spec(Path(run_dir) / CONFIG_FILE))


@dataclass
class RunRecord:
    """Everything a training run produced, persisted as run.json."""

    run_id: str
    config: Dict[str, Dict]
    tag: str
    num_styles: int
    seeds: Dict[str, int]
    split_digests: Dict[str, str]
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: Optional[int] = None
    checkpoints: Dict[str, str] = field(default_factory=dict)
    pairs_seen: Dict[str, int] = field(default_factory=dict)
    metric_files: Dict[str, str] = field(default_factory=dict)
    nondeterministic: bool = False
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    version: str = settings.APP_VERSION

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig.from_sections(self.config)

    def save(self, run_dir: Union[str, Path]) -> Path:
        path = Path(run_dir) / RUN_RECORD
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2))
        return path

    @classmethod
    def load(cls, run_dir: Union[str, Path]) -> "RunRecord":
        path = Path(run_dir) / RUN_RECORD
        if not path.exists():
            raise FileNotFoundError(f"no {RUN_RECORD} in {run_dir}")
        data = json.loads(path.read_text())
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
