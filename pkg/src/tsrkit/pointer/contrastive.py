"""按行/列共享网格线构造正样本集合的对比损失。

正样本权重 c_p(j) = overlap(p, j)² / (span(p) · span(j))，其中 overlap 与 span
都按目标单元格在该轴上占据的网格行（或列）计数，不看框的几何相交。
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, NamedTuple, Optional, Tuple
import logging

import numpy as np

from ..errors import DegenerateSets, NoOverlap, ShapeMismatch, UnlabeledBox
from ..schemas import CellAnnotations, CellSpec, TableGrid
from .functional import logsumexp
from .layout import TauLike, as_features, resolve_tau

logger = logging.getLogger(__name__)


class SpanAxis(str, Enum):
    ROW = "row"
    COLUMN = "column"


def _interval(cell: CellSpec, axis: SpanAxis) -> Tuple[int, int]:
    return cell.row_range if axis is SpanAxis.ROW else cell.col_range


def axis_overlap(p_cell: CellSpec, j_cell: CellSpec, axis: SpanAxis) -> int:
    p0, p1 = _interval(p_cell, axis)
    j0, j1 = _interval(j_cell, axis)
    return max(0, min(p1, j1) - max(p0, j0))


def span_coefficient(p_cell: CellSpec, j_cell: CellSpec, axis: SpanAxis) -> Fraction:
    overlap = axis_overlap(p_cell, j_cell, axis)
    if overlap < 1:
        raise NoOverlap(f"cells at ({p_cell.anchor_row},{p_cell.anchor_col}) and "
                        f"({j_cell.anchor_row},{j_cell.anchor_col}) share no {axis.value}")
    p0, p1 = _interval(p_cell, axis)
    j0, j1 = _interval(j_cell, axis)
    return Fraction(overlap * overlap, (p1 - p0) * (j1 - j0))


@dataclass(frozen=True)
class ContrastiveSets:
    """box_ids 是参与对比的（非干扰）框在标注中的下标；
    positives / coefficients 以 box_ids 内的局部下标表示。A(j) 为其余全部局部下标。"""
    axis: SpanAxis
    box_ids: Tuple[int, ...]
    positives: Tuple[Tuple[int, ...], ...]
    coefficients: Tuple[Tuple[Fraction, ...], ...]

    def __len__(self) -> int:
        return len(self.box_ids)

    def anchors(self, j: int) -> List[int]:
        return [a for a in range(len(self.box_ids)) if a != j]

    def weights(self, j: int) -> List[Fraction]:
        total = sum(self.coefficients[j], Fraction(0))
        return [c / total for c in self.coefficients[j]]

    def uniform(self) -> "ContrastiveSets":
        return ContrastiveSets(self.axis, self.box_ids, self.positives,
                               tuple(tuple(Fraction(1) for _ in ps) for ps in self.positives))


def positive_sets(grid: TableGrid, annotations: CellAnnotations, axis: SpanAxis) -> ContrastiveSets:
    axis = SpanAxis(axis)
    box_ids = tuple(annotations.real_boxes)
    cells: List[CellSpec] = []
    for i in box_ids:
        target = annotations.boxes[i].target
        if target is None:
            raise UnlabeledBox(f"box {i} has no target cell")
        cells.append(grid.cells[target])

    positives: List[Tuple[int, ...]] = []
    coefficients: List[Tuple[Fraction, ...]] = []
    for j, j_cell in enumerate(cells):
        ps, cs = [], []
        for p, p_cell in enumerate(cells):
            if p == j or axis_overlap(p_cell, j_cell, axis) < 1:
                continue
            ps.append(p)
            cs.append(span_coefficient(p_cell, j_cell, axis))
        positives.append(tuple(ps))
        coefficients.append(tuple(cs))
    return ContrastiveSets(axis, box_ids, tuple(positives), tuple(coefficients))


class ContrastiveLoss(NamedTuple):
    per_box: np.ndarray
    mean: float
    grad: np.ndarray


def _box_rows(features: np.ndarray, sets: ContrastiveSets, n_boxes: Optional[int]) -> np.ndarray:
    if features.shape[0] == len(sets.box_ids):
        return np.arange(len(sets.box_ids))
    if n_boxes is not None and features.shape[0] == n_boxes:
        return np.asarray(sets.box_ids, dtype=np.int64)
    raise ShapeMismatch(f"{features.shape[0]} feature rows for {len(sets.box_ids)} contrastive boxes")


def _contrastive(b_hat, sets: ContrastiveSets, tau: float, n_boxes: Optional[int]) -> ContrastiveLoss:
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if b_hat.ndim != 2:
        raise ShapeMismatch(f"b_hat must be 2-D, got {b_hat.shape}")
    if b_hat.shape[0]:
        b_hat = as_features(b_hat, "b_hat")
    rows = _box_rows(b_hat, sets, n_boxes)
    x = b_hat[rows]
    n = x.shape[0]

    per_box = np.zeros(n)
    included = np.array([bool(ps) for ps in sets.positives], dtype=bool)
    if not included.any():
        return ContrastiveLoss(per_box, 0.0, np.zeros_like(b_hat))
    if n < 2:
        raise DegenerateSets("positives exist but no box has an anchor set")

    # 行归一化后的正样本权重 c_p / Σc
    weights = np.zeros((n, n))
    for j, (ps, cs) in enumerate(zip(sets.positives, sets.coefficients)):
        if ps:
            coeffs = np.array([float(c) for c in cs])
            weights[j, list(ps)] = coeffs / coeffs.sum()

    rows_inc = np.flatnonzero(included)
    sim = (x @ x.T) / tau
    masked = sim[rows_inc].copy()
    masked[np.arange(rows_inc.size), rows_inc] = -np.inf
    log_denom = logsumexp(masked, axis=1)
    log_prob = masked - log_denom[:, None]
    w_inc = weights[rows_inc]
    finite = np.where(np.isfinite(log_prob), log_prob, 0.0)
    per_box[rows_inc] = -np.sum(w_inc * finite, axis=1)

    # d L_j / d s_ja = softmax_a - w_a（a ∈ A(j)）
    grad_s = np.zeros((n, n))
    grad_s[rows_inc] = np.exp(log_prob) - w_inc

    n_inc = rows_inc.size
    mean = float(np.sum(per_box[rows_inc]) / n_inc)
    grad_s /= n_inc
    grad_x = (grad_s + grad_s.T) @ x / tau
    grad = np.zeros_like(b_hat)
    grad[rows] = grad_x
    return ContrastiveLoss(per_box, mean, grad)


def span_contrastive_loss(b_hat, sets: ContrastiveSets, tau: TauLike = 0.1, n_boxes: Optional[int] = None) -> ContrastiveLoss:
    """逐框损失、对含正样本框的均值、以及对 b_hat 的梯度。

    b_hat 的行可以只包含 sets.box_ids 对应的框，也可以是全部 n_boxes 个标注框
    （此时干扰框行的梯度为 0）。
    """
    return _contrastive(b_hat, sets, resolve_tau(tau), n_boxes)


def uniform_contrastive_loss(b_hat, sets: ContrastiveSets, tau: TauLike = 0.1, n_boxes: Optional[int] = None) -> ContrastiveLoss:
    return span_contrastive_loss(b_hat, sets.uniform(), tau, n_boxes)

