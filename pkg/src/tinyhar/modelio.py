"""JSON model files: the human-inspectable twin of the .ispm binary.

The CLI trains to JSON (which keeps class names), then
`pack` converts to the compact binary. Floats are 32-bit-rounded before
writing, so JSON -> binary -> JSON is lossless.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ParseError
from .features import FeatureMask
from .gbdt import LEAF, Forest, Tree, TreeNode
from .mlp import MlpModel

Model = Union[MlpModel, Forest]


def model_to_json(model: Model) -> str:
    if isinstance(model, MlpModel):
        doc = {
            "kind": "mlp",
            "dims": list(model.dims),
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
        }
    else:
        doc = {
            "kind": "forest",
            "n_classes": model.n_classes,
            "shrinkage": model.shrinkage,
            "base_score": model.base_score,
            "trees": [
                [
                    [n.feature, n.threshold, n.left, n.right, n.value]
                    for n in tree.nodes
                ]
                for tree in model.trees
            ],
        }
    doc["feature_mask"] = list(model.feature_mask.kept)
    doc["class_names"] = list(model.class_names)
    doc["manifest_version"] = model.manifest_version
    doc["ma_width"] = model.ma_width
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad model JSON: {e}") from None
    mask = FeatureMask(tuple(doc["feature_mask"]))
    names = tuple(doc["class_names"])
    manifest = doc["manifest_version"]
    ma_width = doc["ma_width"]
    if doc["kind"] == "mlp":
        return MlpModel(
            tuple(doc["dims"]),
            [np.array(w, float) for w in doc["weights"]],
            [np.array(b, float) for b in doc["biases"]],
            mask,
            names,
            manifest,
            ma_width,
        )
    if doc["kind"] == "forest":
        trees = [
            Tree([TreeNode(f, t, l, r, v) for f, t, l, r, v in nodes])
            for nodes in doc["trees"]
        ]
        return Forest(
            trees,
            doc["n_classes"],
            doc["shrinkage"],
            doc["base_score"],
            mask,
            names,
            [],
            manifest,
            ma_width,
        )
    raise ParseError(f"unknown model kind {doc['kind']!r}")


def save_model(model: Model, path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path) -> Model:
    return model_from_json(Path(path).read_text())
