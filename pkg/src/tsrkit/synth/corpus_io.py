"""JSON-lines 语料：每行一个样本，带 format_version。"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional
import hashlib
import json
import logging

import numpy as np

from .. import FORMAT_VERSION
from ..errors import InvalidAnnotations, IoFailure, SchemaViolation, ShapeMismatch, TooManyBoxes
from ..parsers.otsl import grid_to_otsl
from ..pointer.layout import PointerFeatures, ProjectionMatrix, build_sequence_layout
from ..schemas import (
    annotations_from_json_obj,
    annotations_to_json_obj,
    grid_from_json_obj,
    grid_to_json_obj,
    validate_annotations,
    validate_grid,
)
from .corpus import CorpusSample

logger = logging.getLogger(__name__)

IDENTITY = "identity"


def _projection_to_json(p: ProjectionMatrix) -> Any:
    if p.d_in == p.d_out and np.array_equal(p.weights, np.eye(p.d_in)) and not np.any(p.bias):
        return IDENTITY
    return {"weights": p.weights.tolist(), "bias": p.bias.tolist()}


def _projection_from_json(obj: Any, d: int) -> ProjectionMatrix:
    if obj == IDENTITY:
        return ProjectionMatrix.identity(d)
    return ProjectionMatrix(np.asarray(obj["weights"], dtype=np.float64), np.asarray(obj["bias"], dtype=np.float64))


def features_to_json_obj(features: PointerFeatures) -> Dict[str, Any]:
    return {
        "h": features.h.tolist(),
        "proj_b": _projection_to_json(features.proj_b),
        "proj_t": _projection_to_json(features.proj_t),
    }


def features_from_json_obj(data: Dict[str, Any]) -> PointerFeatures:
    h = np.asarray(data["h"], dtype=np.float64)
    if h.ndim != 2:
        raise ShapeMismatch(f"features.h must be a matrix, got shape {h.shape}")
    d = h.shape[1]
    return PointerFeatures(h, _projection_from_json(data.get("proj_b", IDENTITY), d),
                           _projection_from_json(data.get("proj_t", IDENTITY), d))


def sample_to_json_obj(sample: CorpusSample) -> Dict[str, Any]:
    obj: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "index": sample.index,
        "otsl": sample.otsl.to_text(),
        "grid": grid_to_json_obj(sample.grid),
        "annotations": annotations_to_json_obj(sample.annotations),
        "box_slots": sample.box_slots,
    }
    if sample.features is not None:
        obj["features"] = features_to_json_obj(sample.features)
    return obj


def sample_from_json_obj(data: Dict[str, Any], line_no: Optional[int] = None) -> CorpusSample:
    if not isinstance(data, dict):
        raise SchemaViolation("sample must be a JSON object", line_no)
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaViolation(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})", line_no)
    try:
        grid = grid_from_json_obj(data["grid"])
        report = validate_grid(grid)
        if not report.ok:
            raise SchemaViolation("; ".join(v.message for v in report.violations), line_no)
        if data.get("otsl") is not None and data["otsl"] != grid_to_otsl(grid).to_text():
            raise SchemaViolation("otsl field does not match grid", line_no)
        annotations = annotations_from_json_obj(data["annotations"])
        validate_annotations(annotations, grid)
        box_slots = int(data["box_slots"])
        layout = build_sequence_layout(len(annotations), box_slots, len(grid_to_otsl(grid)))
        features = None
        if data.get("features") is not None:
            features = features_from_json_obj(data["features"])
            if features.h.shape[0] != layout.total_len:
                raise SchemaViolation(f"features.h has {features.h.shape[0]} rows, expected B+T = {layout.total_len}",
                                      line_no)
        return CorpusSample(int(data["index"]), grid, annotations, box_slots, features)
    except SchemaViolation as e:
        if e.line_no is None and line_no is not None:
            raise SchemaViolation(str(e), line_no) from e
        raise
    except (KeyError, TypeError, ValueError, InvalidAnnotations, TooManyBoxes) as e:
        raise SchemaViolation(f"bad sample: {e!r}", line_no) from e


def write_corpus(path: Path, samples: Iterable[CorpusSample]) -> int:
    path = Path(path)
    n = 0
    try:
        with path.open("w", encoding="utf-8", newline="\n") as f:
            for sample in samples:
                f.write(json.dumps(sample_to_json_obj(sample), ensure_ascii=False))
                f.write("\n")
                n += 1
    except OSError as e:
        raise IoFailure(f"cannot write corpus {path}: {e}") from e
    logger.info("wrote %d samples to %s", n, path)
    return n


def read_corpus(path: Path) -> List[CorpusSample]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as e:
        raise IoFailure(f"cannot read corpus {path}: {e}") from e
    samples: List[CorpusSample] = []
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaViolation(f"invalid JSON: {e.msg}", line_no) from e
        samples.append(sample_from_json_obj(data, line_no))
    return samples


def corpus_digest(path: Path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
