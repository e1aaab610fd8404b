"""布局指针：框 → 数据标签的关联打分、指针损失、空指针损失、解析与整表组装。"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from ..errors import CountMismatch, EmptyD, ShapeMismatch, TargetOutOfRange
from ..parsers.html_table import HtmlTree, grid_to_html
from ..parsers.otsl import DataTagIndexSet, OtslSequence, data_tag_indices, otsl_to_grid
from .functional import bce_with_logits, sigmoid, softmax_cross_entropy
from .layout import SequenceLayout, TauLike, Temperature, as_features, resolve_tau

logger = logging.getLogger(__name__)

EMPTY_THRESHOLD = 0.5


def _indices(D: Union[DataTagIndexSet, Sequence[int]]) -> np.ndarray:
    idx = np.asarray(list(D), dtype=np.int64)
    if idx.size == 0:
        raise EmptyD("no data tags")
    return idx


def pointer_logits(b_bar, t_bar, D, tau: TauLike = Temperature()) -> np.ndarray:
    """(j, m) 项为 b̄_j · t̄_{D[m]} / τ；列只取数据标签。"""
    b_bar = as_features(b_bar, "b_bar")
    t_bar = as_features(t_bar, "t_bar")
    idx = _indices(D)
    if b_bar.shape[1] != t_bar.shape[1]:
        raise ShapeMismatch(f"box dim {b_bar.shape[1]} != tag dim {t_bar.shape[1]}")
    if idx.min() < 0 or idx.max() >= t_bar.shape[0]:
        raise ShapeMismatch(f"data tag index out of range for {t_bar.shape[0]} tags")
    return (b_bar @ t_bar[idx].T) / resolve_tau(tau)


def pointer_logits_backward(grad, b_bar, t_bar, D, tau: TauLike = Temperature()) -> Tuple[np.ndarray, np.ndarray]:
    """把对 logits 的梯度传回 (dL/db̄, dL/dt̄)。非数据标签行的梯度为 0。"""
    b_bar = as_features(b_bar, "b_bar")
    t_bar = as_features(t_bar, "t_bar")
    idx = _indices(D)
    g = np.asarray(grad, dtype=np.float64) / resolve_tau(tau)
    grad_b = g @ t_bar[idx]
    grad_t = np.zeros_like(t_bar)
    np.add.at(grad_t, idx, g.T @ b_bar)
    return grad_b, grad_t


def _real_rows(logits: np.ndarray, layout: Optional[SequenceLayout]) -> np.ndarray:
    if layout is None:
        return np.arange(logits.shape[0])
    if logits.shape[0] == layout.box_slots:
        return np.asarray(layout.real_slots, dtype=np.int64)
    if logits.shape[0] == layout.n_real_boxes:
        return np.arange(logits.shape[0])
    raise ShapeMismatch(f"logits have {logits.shape[0]} rows; layout expects {layout.box_slots} or {layout.n_real_boxes}")


def pointer_loss(logits, targets: Sequence[Optional[int]], layout: Optional[SequenceLayout] = None) -> Tuple[float, np.ndarray]:
    """L_ptr：对每个有目标的真实框取 -log softmax 的均值。

    targets 与真实框一一对应，值为 logits 的列号；None（干扰框）不参与。
    给定 layout 时 logits 可以是完整的 B 行，特殊框与填充行梯度为 0。
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ShapeMismatch(f"logits must be 2-D with at least one column, got {logits.shape}")
    rows = _real_rows(logits, layout)
    if len(targets) != len(rows):
        raise ShapeMismatch(f"{len(targets)} targets for {len(rows)} real boxes")

    keep = [(r, t) for r, t in zip(rows, targets) if t is not None]
    grad = np.zeros_like(logits)
    if not keep:
        return 0.0, grad
    sel = np.array([r for r, _ in keep], dtype=np.int64)
    tgt = np.array([t for _, t in keep], dtype=np.int64)
    if tgt.min() < 0 or tgt.max() >= logits.shape[1]:
        raise TargetOutOfRange(f"target column outside [0, {logits.shape[1]})")
    loss, g = softmax_cross_entropy(logits[sel], tgt)
    grad[sel] = g
    return loss, grad


def empty_logits(b0, t_bar, D) -> np.ndarray:
    b0 = np.asarray(b0, dtype=np.float64).reshape(-1)
    t_bar = as_features(t_bar, "t_bar")
    idx = _indices(D)
    if b0.shape[0] != t_bar.shape[1]:
        raise ShapeMismatch(f"b0 dim {b0.shape[0]} != tag dim {t_bar.shape[1]}")
    return t_bar[idx] @ b0


def empty_scores(b0, t_bar, D) -> np.ndarray:
    """每个数据标签为空的概率 σ(b̄_0 · t̄_k′)。"""
    return sigmoid(empty_logits(b0, t_bar, D))


def empty_pointer_loss(b0, t_bar, D, empty_labels: Sequence[bool]) -> Tuple[float, np.ndarray]:
    """L_ptr^empty：所有数据标签上的 BCE 均值；梯度对 b̄_0·t̄_k′（不除 τ）。"""
    z = empty_logits(b0, t_bar, D)
    if len(empty_labels) != z.shape[0]:
        raise ShapeMismatch(f"{len(empty_labels)} labels for {z.shape[0]} data tags")
    return bce_with_logits(z, np.asarray(empty_labels, dtype=np.float64))


def empty_pointer_backward(grad_z, b0, t_bar, D) -> Tuple[np.ndarray, np.ndarray]:
    b0 = np.asarray(b0, dtype=np.float64).reshape(-1)
    t_bar = as_features(t_bar, "t_bar")
    idx = _indices(D)
    g = np.asarray(grad_z, dtype=np.float64)
    grad_t = np.zeros_like(t_bar)
    np.add.at(grad_t, idx, np.outer(g, b0))
    return t_bar[idx].T @ g, grad_t


@dataclass(frozen=True)
class PointerAssignment:
    box_to_tag: Tuple[int, ...]
    empty_tags: Tuple[bool, ...]
    tag_boxes: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.empty_tags) != len(self.tag_boxes):
            raise CountMismatch("empty flags and tag box lists differ in length")
        for m, boxes in enumerate(self.tag_boxes):
            if self.empty_tags[m] and boxes:
                raise CountMismatch(f"tag {m} is flagged empty but has boxes {boxes}")
            for j in boxes:
                if self.box_to_tag[j] != m:
                    raise CountMismatch(f"box {j} listed under tag {m} but points to {self.box_to_tag[j]}")

    @classmethod
    def from_box_to_tag(cls, box_to_tag: Sequence[int], n_tags: int, empty_tags: Optional[Sequence[bool]] = None) -> "PointerAssignment":
        lists: List[List[int]] = [[] for _ in range(n_tags)]
        for j, m in enumerate(box_to_tag):
            lists[m].append(j)
        flags = tuple(bool(f) for f in empty_tags) if empty_tags is not None else tuple(False for _ in range(n_tags))
        return cls(tuple(int(m) for m in box_to_tag), flags, tuple(tuple(x) for x in lists))

    def to_json_obj(self) -> Dict[str, Any]:
        return {"box_to_tag": list(self.box_to_tag), "empty_tags": list(self.empty_tags)}

    @classmethod
    def from_json_obj(cls, data: Dict[str, Any]) -> "PointerAssignment":
        flags = [bool(x) for x in data["empty_tags"]]
        return cls.from_box_to_tag([int(m) for m in data["box_to_tag"]], len(flags), flags)


def resolve_pointers(logits, empty_probs, layout: SequenceLayout) -> PointerAssignment:
    """每个真实框取 logits 行的 argmax（并列取最小列号）；
    标签为空 ⇔ 空概率 > 0.5 且没有框指向它。"""
    logits = np.asarray(logits, dtype=np.float64)
    probs = np.asarray(empty_probs, dtype=np.float64).reshape(-1)
    if logits.ndim != 2 or logits.shape[1] != probs.shape[0]:
        raise ShapeMismatch(f"logits {logits.shape} do not match {probs.shape[0]} empty scores")
    rows = _real_rows(logits, layout)
    n_tags = logits.shape[1]
    box_to_tag = [int(np.argmax(logits[r])) for r in rows]
    chosen = set(box_to_tag)
    flags = [bool(probs[m] > EMPTY_THRESHOLD and m not in chosen) for m in range(n_tags)]
    return PointerAssignment.from_box_to_tag(box_to_tag, n_tags, flags)


def assemble_table(seq: OtslSequence, assignment: PointerAssignment, texts: Sequence[str]) -> HtmlTree:
    """结构来自 OTSL；每个 td 的文本为指向它的框文本按框顺序以单个空格连接。"""
    D = data_tag_indices(seq)
    if len(D) != len(assignment.empty_tags):
        raise CountMismatch(f"sequence has {len(D)} data tags, assignment has {len(assignment.empty_tags)}")
    if len(texts) != len(assignment.box_to_tag):
        raise CountMismatch(f"{len(texts)} texts for {len(assignment.box_to_tag)} boxes")
    grid = otsl_to_grid(seq)
    contents = [" ".join(texts[j] for j in boxes) for boxes in assignment.tag_boxes]
    return grid_to_html(grid.with_contents(contents), include_content=True)
