"""On-disk dataset format and raw-data ingestion.

Layout written and read here:

    <root>/manifest.json
    <root>/<sample_id>/image.png
    <root>/<sample_id>/ann_<k>_style<l>.png
    <root>/<sample_id>/truth.png          (synthetic data only)

The manifest lists every sample id with its annotation files and styles,
the split membership when one was assigned, and per-sample metadata.
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from core.types import AnnotatedSample, DatasetSplit, LabelStyle, SegmentationMask

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
MANIFEST_VERSION = 1
_ANN_NAME = re.compile(r"^ann_(\d+)_style(\d+)\.png$")
_SAFE_ID = re.compile(r"^[\w.\-]+$")


def read_image(path: Union[str, Path]) -> np.ndarray:
    """PNG -> float32 (C, H, W) in [0, 1]; grey images get one channel."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "F"):
            arr = np.asarray(im, dtype=np.float32)
            arr = arr / max(float(arr.max()), 1.0) if im.mode != "F" else arr
            return np.clip(arr, 0.0, 1.0)[None]
        im = im.convert("RGB" if im.mode in ("RGB", "RGBA", "P", "CMYK") else "L")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return arr[None] if arr.ndim == 2 else arr.transpose(2, 0, 1)


def write_image(path: Union[str, Path], image: np.ndarray) -> None:
    image = np.asarray(image)
    data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    if data.shape[0] == 1:
        Image.fromarray(data[0]).save(path)
    elif data.shape[0] == 3:
        Image.fromarray(np.ascontiguousarray(data.transpose(1, 2, 0))).save(path)
    else:
        raise ValueError(f"only 1- or 3-channel images can be written, got {data.shape[0]}")


def read_mask(path: Union[str, Path]) -> np.ndarray:
    """Any non-zero pixel is foreground."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mask not found: {path}")
    with Image.open(path) as im:
        return (np.asarray(im) > 0).astype(np.uint8)


def read_labels(path: Union[str, Path]) -> np.ndarray:
    """Instance label image (0 = background), 8- or 16-bit."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"label image not found: {path}")
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr.astype(np.int64)


def write_mask(path: Union[str, Path], mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(path)


def save_dataset(root: Union[str, Path], samples: Sequence[AnnotatedSample],
                 num_styles: int, split: Optional[DatasetSplit] = None) -> Path:
    """Write samples (and optionally their split) in the on-disk format."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    membership = split.membership() if split is not None else {}
    entries = []
    for s in samples:
        if not _SAFE_ID.match(s.sample_id):
            raise ValueError(f"sample id {s.sample_id!r} is not a safe directory name")
        d = root / s.sample_id
        d.mkdir(exist_ok=True)
        write_image(d / "image.png", s.image)
        anns = []
        for k, (mask, style) in enumerate(s.annotations):
            name = f"ann_{k}_style{style.id}.png"
            write_mask(d / name, mask.grid)
            anns.append({"file": name, "style": style.id})
        entry = {"id": s.sample_id, "annotations": anns, "metadata": s.metadata}
        if s.truth is not None:
            write_mask(d / "truth.png", s.truth)
            entry["truth"] = "truth.png"
        if s.sample_id in membership:
            entry["split"] = membership[s.sample_id]
        entries.append(entry)
    manifest = {"version": MANIFEST_VERSION, "num_styles": num_styles,
                "split_seed": split.seed if split is not None else None,
                "samples": entries}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2, default=_jsonable))
    logger.info("wrote %d samples to %s", len(entries), root)
    return root


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def read_manifest(root: Union[str, Path]) -> Dict:
    path = Path(root) / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {root}")
    manifest = json.loads(path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest


def load_dataset(root: Union[str, Path]) -> Tuple[List[AnnotatedSample], int, Optional[DatasetSplit]]:
    """Read a dataset; returns (samples, num_styles, split or None)."""
    root = Path(root)
    manifest = read_manifest(root)
    num_styles = int(manifest["num_styles"])
    samples, membership = [], {}
    for entry in manifest["samples"]:
        d = root / entry["id"]
        image = read_image(d / "image.png")
        anns = []
        for ann in entry["annotations"]:
            if not _ANN_NAME.match(ann["file"]):
                raise ValueError(f"unexpected annotation file name {ann['file']!r}")
            anns.append((SegmentationMask(read_mask(d / ann["file"])),
                         LabelStyle(int(ann["style"]), num_styles)))
        truth = read_mask(d / entry["truth"]) if entry.get("truth") else None
        samples.append(AnnotatedSample(image, tuple(anns), entry["id"],
                                       entry.get("metadata", {}), truth))
        if "split" in entry:
            membership[entry["id"]] = entry["split"]
    split = None
    if membership:
        if len(membership) != len(samples):
            raise ValueError(f"{root}: split assigned to only some samples")
        split = DatasetSplit.from_membership(samples, membership,
                                             seed=manifest.get("split_seed") or 0)
    return samples, num_styles, split


def load_raw_phc(root: Union[str, Path]):
    """Cell-tracking frames for curation.

    Expects `frames/<name>.png` and `masks/<name>.png` (instance labels or a
    binary mask). Optional extra annotators live in
    `annotators/<annotator>/<name>.png`, drawn on the full frame.

    Returns (frames, masks, extra) where extra maps annotator -> list of masks
    aligned with the frames.
    """
    root = Path(root)
    frame_dir, mask_dir = root / "frames", root / "masks"
    if not frame_dir.is_dir() or not mask_dir.is_dir():
        raise FileNotFoundError(f"{root} needs frames/ and masks/ directories")
    names = sorted(p.name for p in frame_dir.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"no PNG frames in {frame_dir}")
    frames = [read_image(frame_dir / n) for n in names]
    masks = [read_labels(mask_dir / n) for n in names]
    extra = {}
    ann_root = root / "annotators"
    if ann_root.is_dir():
        for d in sorted(p for p in ann_root.iterdir() if p.is_dir()):
            extra[d.name] = [read_mask(d / n) for n in names]
    return frames, masks, extra


def load_raw_isic(root: Union[str, Path]) -> Dict[str, Tuple[np.ndarray, List[Tuple[str, np.ndarray]]]]:
    """Per-image folders: `<id>/image.png` plus one `<annotator>.png` each."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"raw dataset directory not found: {root}")
    raw = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        image_path = d / "image.png"
        if not image_path.exists():
            logger.warning("skipping %s: no image.png", d)
            continue
        anns = [(p.stem, read_mask(p)) for p in sorted(d.glob("*.png"))
                if p.name != "image.png"]
        raw[d.name] = (read_image(image_path), anns)
    if not raw:
        raise FileNotFoundError(f"no image folders found under {root}")
    return raw
