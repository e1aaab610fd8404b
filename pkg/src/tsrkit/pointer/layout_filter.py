"""布局过滤器：两层 MLP 给每个框打“真实文本”概率，低于阈值的框在指针之前剔除。

另含两条只依赖标注的对照基线（greedy / selective），按干扰框与真实框的 IOU
决定是否把干扰文本并入单元格。
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..errors import LengthMismatch, SchemaViolation, ShapeMismatch
from ..parsers.html_table import HtmlTree, grid_to_html
from ..schemas import CellAnnotations, TableGrid, bbox_iou
from .functional import bce_with_logits, sigmoid
from .layout import SequenceLayout, as_features

logger = logging.getLogger(__name__)

KEEP_THRESHOLD = 0.5
SELECTIVE_IOU = 0.5
GREEDY_IOU = 0.0


def default_hidden(d: int) -> int:
    return max(1, d // 2)


@dataclass(frozen=True, eq=False)
class FilterParams:
    w1: np.ndarray  # hidden x d
    b1: np.ndarray  # hidden
    w2: np.ndarray  # 1 x hidden
    b2: np.ndarray  # 1

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64).reshape(-1)
        w2 = np.asarray(self.w2, dtype=np.float64).reshape(1, -1)
        b2 = np.asarray(self.b2, dtype=np.float64).reshape(-1)
        if w1.ndim != 2 or b1.shape[0] != w1.shape[0] or w2.shape[1] != w1.shape[0] or b2.shape != (1,):
            raise ShapeMismatch(f"filter params do not conform: w1 {w1.shape}, b1 {b1.shape}, w2 {w2.shape}, b2 {b2.shape}")
        if not all(np.all(np.isfinite(a)) for a in (w1, b1, w2, b2)):
            raise ShapeMismatch("filter params contain non-finite entries")
        for name, value in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, value)

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def zeros(cls, d: int, hidden: Optional[int] = None) -> "FilterParams":
        hidden = hidden or default_hidden(d)
        return cls(np.zeros((hidden, d)), np.zeros(hidden), np.zeros((1, hidden)), np.zeros(1))

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, hidden: Optional[int] = None) -> "FilterParams":
        hidden = hidden or default_hidden(d)
        return cls(rng.normal(scale=1.0 / np.sqrt(d), size=(hidden, d)), rng.normal(scale=0.1, size=hidden),
                   rng.normal(scale=1.0 / np.sqrt(hidden), size=(1, hidden)), rng.normal(scale=0.1, size=1))

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.w1.reshape(-1), self.b1, self.w2.reshape(-1), self.b2])

    @classmethod
    def from_flat(cls, vec, d: int, hidden: int) -> "FilterParams":
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        sizes = [hidden * d, hidden, hidden, 1]
        if vec.shape[0] != sum(sizes):
            raise ShapeMismatch(f"flat vector of length {vec.shape[0]} does not fit d={d}, hidden={hidden}")
        w1, b1, w2, b2 = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(w1.reshape(hidden, d), b1, w2.reshape(1, hidden), b2)

    def to_json_obj(self) -> Dict[str, Any]:
        return {"w1": self.w1.tolist(), "b1": self.b1.tolist(), "w2": self.w2.tolist(), "b2": self.b2.tolist()}

    @classmethod
    def from_json_obj(cls, data: Dict[str, Any]) -> "FilterParams":
        try:
            return cls(*(np.asarray(data[k], dtype=np.float64) for k in ("w1", "b1", "w2", "b2")))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaViolation(f"bad filter params: {e!r}") from e


def _box_rows(b: np.ndarray, layout: Optional[SequenceLayout]) -> np.ndarray:
    if layout is None or b.shape[0] == layout.n_real_boxes:
        return b
    if b.shape[0] == layout.box_slots:
        return b[1: 1 + layout.n_real_boxes]
    raise ShapeMismatch(f"{b.shape[0]} box rows; layout expects {layout.box_slots} or {layout.n_real_boxes}")


def _forward(b: np.ndarray, params: FilterParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if b.shape[1] != params.d:
        raise ShapeMismatch(f"box dim {b.shape[1]} does not match filter input {params.d}")
    z1 = b @ params.w1.T + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2[0] + params.b2[0]
    return z1, a1, z2


def _features(b) -> np.ndarray:
    arr = np.asarray(b, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[0] == 0:
        return arr
    return as_features(arr, "b")


def filter_logits(b, params: FilterParams, layout: Optional[SequenceLayout] = None) -> np.ndarray:
    return _forward(_box_rows(_features(b), layout), params)[2]


def filter_scores(b, params: FilterParams, layout: Optional[SequenceLayout] = None) -> np.ndarray:
    """σ(layer2(relu(layer1(b_j))))；给定 layout 时只对真实框（含干扰框）打分，特殊框与填充不参与。"""
    return sigmoid(filter_logits(b, params, layout))


def filter_mask(scores) -> np.ndarray:
    return np.asarray(scores, dtype=np.float64).reshape(-1) > KEEP_THRESHOLD


def apply_mask(b, annotations: CellAnnotations, mask) -> Tuple[np.ndarray, CellAnnotations]:
    b = np.asarray(b, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if b.ndim != 2 or b.shape[0] != len(annotations) or mask.shape[0] != len(annotations):
        raise LengthMismatch(f"{b.shape[0] if b.ndim else 0} rows, {len(annotations)} boxes, {mask.shape[0]} mask entries")
    kept = [box for box, keep in zip(annotations.boxes, mask) if keep]
    return b[mask], CellAnnotations(tuple(kept))


def filter_bce_loss(b, params: FilterParams, labels: Sequence[bool],
                    layout: Optional[SequenceLayout] = None) -> Tuple[float, FilterParams]:
    """对所有真实槽位（含干扰框）的 BCE 均值；labels 为“是真实文本框”。梯度以 FilterParams 形式返回。"""
    x = _box_rows(_features(b), layout)
    if len(labels) != x.shape[0]:
        raise LengthMismatch(f"{len(labels)} labels for {x.shape[0]} boxes")
    z1, a1, z2 = _forward(x, params)
    loss, g2 = bce_with_logits(z2, np.asarray(labels, dtype=np.float64))
    gw2 = (g2 @ a1)[None, :]
    gb2 = np.array([g2.sum()])
    g1 = np.outer(g2, params.w2[0]) * (z1 > 0)
    gw1 = g1.T @ x
    gb1 = g1.sum(axis=0)
    return loss, FilterParams(gw1, gb1, gw2, gb2)


def iou_baseline_table(grid: TableGrid, annotations: CellAnnotations, iou_threshold: float) -> HtmlTree:
    """结构与真实框归属取自标注（即假设结构无误）；干扰框只要与某单元格的真实框 IOU
    超过阈值，就把它的文本并入该单元格（每个单元格至多一次）。文本按框顺序拼接。"""
    per_cell: List[List[int]] = [[] for _ in grid.cells]
    boxes = annotations.boxes
    for i in annotations.real_boxes:
        per_cell[boxes[i].target].append(i)
    for d in annotations.distractors:
        hit = sorted({boxes[i].target for i in annotations.real_boxes
                      if bbox_iou(boxes[d].bbox, boxes[i].bbox) > iou_threshold})
        for cell in hit:
            per_cell[cell].append(d)
    contents = [" ".join(boxes[i].text for i in sorted(ids)) for ids in per_cell]
    return grid_to_html(grid.with_contents(contents), include_content=True)


def greedy_and_selective_baselines(grid: TableGrid, annotations: CellAnnotations,
                                   iou_threshold: float = SELECTIVE_IOU) -> Tuple[HtmlTree, HtmlTree]:
    return (iou_baseline_table(grid, annotations, GREEDY_IOU),
            iou_baseline_table(grid, annotations, iou_threshold))
