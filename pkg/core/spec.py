"""Experiment configs as one versioned JSON document.

A document has one section per concern (model, data, training,
evaluation). Files are written fully resolved so a run can be repeated
from its config.json alone; CLI overrides are dotted paths
(`training.epochs=5`) applied on top of a preset and a file.
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, Iterable

SPEC_VERSION = 1
SECTIONS = ("model", "data", "training", "evaluation")


def build_spec(sections: Dict[str, Dict[str, Any]]) -> str:
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    doc = {"version": SPEC_VERSION}
    doc.update({k: sections.get(k, {}) for k in SECTIONS})
    return json.dumps(doc, indent=2, default=str)


def parse_spec(text: str) -> Dict[str, Dict[str, Any]]:
    doc = json.loads(text)
    if doc.get("version") != SPEC_VERSION:
        raise ValueError(f"unsupported config version {doc.get('version')!r}")
    unknown = set(doc) - set(SECTIONS) - {"version"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return {k: dict(doc.get(k, {})) for k in SECTIONS}


def load_spec(path) -> Dict[str, Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    return parse_spec(path.read_text())


def merge(base: Dict, override: Dict) -> Dict:
    """Section-wise merge; values in `override` win."""
    out = copy.deepcopy(base)
    for section, values in override.items():
        out.setdefault(section, {}).update(copy.deepcopy(values))
    return out


def _coerce(text: str) -> Any:
    # JSON literals first so "5", "1e-4", "true", "null" and lists parse
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: Dict, assignments: Iterable[str]) -> Dict:
    """Apply `section.key=value` strings on top of a parsed document."""
    out = copy.deepcopy(doc)
    for item in assignments:
        if "=" not in item:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        path, raw = item.split("=", 1)
        if path.count(".") != 1:
            raise ValueError(f"override path must be section.key, got {path!r}")
        section, key = path.split(".")
        if section not in SECTIONS:
            raise ValueError(f"unknown config section {section!r}")
        out.setdefault(section, {})[key] = _coerce(raw)
    return out
