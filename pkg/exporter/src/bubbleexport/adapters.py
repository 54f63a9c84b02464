"""Model adapters: anything with a ``predict(image) -> [Prediction]``.

The exporter treats segmentation models as black boxes behind a
two-function contract: an adapter factory ``load(weights_path)`` returns
a model object whose ``predict`` maps one image array to a list of
(mask, class_id, score) predictions. The built-in threshold adapter
needs no weights and keeps tests free of ML frameworks; real models plug
in via a ``module:callable`` dotted path.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Prediction:
    mask: np.ndarray  # bool (height, width)
    class_id: int
    score: float


class ThresholdModel:
    """Fake segmentation model: global threshold + connected components.

    Weights are an optional JSON file: {"threshold": 128,
    "polarity": "light"|"dark", "min_area": 4, "class_id": 1}.
    """

    def __init__(self, threshold=128, polarity="light", min_area=4, class_id=1):
        if polarity not in ("light", "dark"):
            raise ValueError(f"polarity must be 'light' or 'dark', got {polarity!r}")
        self.threshold = threshold
        self.polarity = polarity
        self.min_area = min_area
        self.class_id = class_id

    def predict(self, image: np.ndarray) -> list[Prediction]:
        gray = image.mean(axis=2) if image.ndim == 3 else image.astype(float)
        binary = gray >= self.threshold if self.polarity == "light" else gray < self.threshold
        labels, n = ndimage.label(binary, structure=np.ones((3, 3), int))
        out = []
        for lab in range(1, n + 1):
            mask = labels == lab
            if int(mask.sum()) >= self.min_area:
                out.append(Prediction(mask=mask, class_id=self.class_id, score=1.0))
        return out


def load_threshold(weights_path: str | None) -> ThresholdModel:
    if not weights_path:
        return ThresholdModel()
    params = json.loads(Path(weights_path).read_text())
    return ThresholdModel(**params)


def load_adapter(name: str, weights_path: str | None):
    """Resolve an adapter by built-in name or ``module:callable`` path."""
    if name == "threshold":
        return load_threshold(weights_path)
    if ":" not in name:
        raise ValueError(
            f"unknown adapter {name!r}; use 'threshold' or a 'module:callable' path"
        )
    module_name, func_name = name.split(":", 1)
    factory = getattr(importlib.import_module(module_name), func_name)
    return factory(weights_path)
