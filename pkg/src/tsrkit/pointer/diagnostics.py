"""损失与梯度自检报告：在随机特征上计算全部损失项，并给出解析梯度与中心差分的相对误差。"""
from dataclasses import dataclass
from typing import Any, Dict
import logging

import numpy as np

from ..parsers.otsl import OtslToken
from ..synth.corpus import CorpusSample
from .contrastive import SpanAxis, positive_sets, span_contrastive_loss
from .layout import ProjectionMatrix, TauLike, Temperature, project, resolve_tau, split_hidden
from .layout_filter import FilterParams, filter_bce_loss
from .losses import (
    LossBreakdown,
    LossWeights,
    TagLogits,
    combined_breakdown,
    finite_diff_gradient,
    relative_error,
    tag_classification_loss,
)
from .pointer import empty_pointer_backward, empty_pointer_loss, pointer_logits, pointer_loss

logger = logging.getLogger(__name__)

TAG_VOCAB = tuple(OtslToken)
REPORT_DIM = 16


@dataclass(frozen=True)
class LossReport:
    index: int
    breakdown: LossBreakdown
    gradient_errors: Dict[str, float]

    @property
    def max_gradient_error(self) -> float:
        return max(self.gradient_errors.values()) if self.gradient_errors else 0.0

    def to_json_obj(self) -> Dict[str, Any]:
        obj = {"index": self.index}
        obj.update(self.breakdown.to_json_obj())
        obj["gradient_rel_errors"] = dict(self.gradient_errors)
        obj["max_gradient_rel_error"] = self.max_gradient_error
        return obj


def all_ones_breakdown(weights: LossWeights = LossWeights()) -> LossBreakdown:
    return combined_breakdown(1.0, 1.0, 1.0, 1.0, 1.0, weights)


def loss_report(sample: CorpusSample, seed: int = 0, weights: LossWeights = LossWeights(),
                tau: TauLike = Temperature(), d: int = REPORT_DIM, check_gradients: bool = True) -> LossReport:
    tau = resolve_tau(tau)
    rng = np.random.default_rng([seed, sample.index])
    layout = sample.layout
    D = sample.data_tags
    seq = sample.otsl

    h = rng.normal(size=(layout.total_len, d))
    b, t = split_hidden(h, layout, layout.n_tags)
    proj_b, proj_t, proj_s = (ProjectionMatrix.random(rng, d) for _ in range(3))
    b_bar, t_bar = project(b, proj_b), project(t, proj_t)

    # L_cls：随机标签 logits，目标为真值 OTSL 序列
    tags = TagLogits(rng.normal(size=(len(seq), len(TAG_VOCAB))),
                     tuple(TAG_VOCAB.index(tok) for tok in seq.tokens))
    l_cls, g_cls = tag_classification_loss(tags)

    logits = pointer_logits(b_bar, t_bar, D, tau)
    targets = sample.pointer_targets
    l_ptr, g_ptr = pointer_loss(logits, targets, layout)

    b0 = b_bar[layout.special_slot]
    labels = sample.empty_labels
    l_empty, g_empty = empty_pointer_loss(b0, t_bar, D, labels)

    b_hat = project(b[1: 1 + layout.n_real_boxes], proj_s)
    n_boxes = len(sample.annotations)
    contr = {}
    for axis in SpanAxis:
        sets = positive_sets(sample.grid, sample.annotations, axis)
        contr[axis] = (sets, span_contrastive_loss(b_hat, sets, tau, n_boxes))

    breakdown = combined_breakdown(l_cls, l_ptr, l_empty, contr[SpanAxis.ROW][1].mean,
                                   contr[SpanAxis.COLUMN][1].mean, weights)

    errors: Dict[str, float] = {}
    if check_gradients:
        errors["cls"] = relative_error(g_cls, finite_diff_gradient(
            lambda z: tag_classification_loss(TagLogits(z, tags.targets))[0], tags.logits))
        errors["ptr"] = relative_error(g_ptr, finite_diff_gradient(
            lambda z: pointer_loss(z, targets, layout)[0], logits))
        g_b0, _ = empty_pointer_backward(g_empty, b0, t_bar, D)
        errors["ptr_empty"] = relative_error(g_b0, finite_diff_gradient(
            lambda v: empty_pointer_loss(v, t_bar, D, labels)[0], b0))
        for axis, key in ((SpanAxis.ROW, "contr_row"), (SpanAxis.COLUMN, "contr_col")):
            sets, result = contr[axis]
            errors[key] = relative_error(result.grad, finite_diff_gradient(
                lambda x, s=sets: span_contrastive_loss(x, s, tau, n_boxes).mean, b_hat))
        params = FilterParams.random(rng, d)
        is_real = [not box.is_distractor for box in sample.annotations.boxes]
        if is_real:
            _, g_filter = filter_bce_loss(b, params, is_real, layout)
            errors["filter"] = relative_error(g_filter.flatten(), finite_diff_gradient(
                lambda v: filter_bce_loss(b, FilterParams.from_flat(v, params.d, params.hidden), is_real, layout)[0],
                params.flatten()))
        logger.debug("sample %d gradient errors: %s", sample.index, errors)
    return LossReport(sample.index, breakdown, errors)
