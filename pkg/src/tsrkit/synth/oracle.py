"""构造“神谕”特征：不经训练即可让指针、空指针与过滤器精确还原真值标签。

坐标约定（d 维）：
- 第 m 维（m < |D|）对应第 m 个数据标签；
- 第 d-2 维为“空”方向 E，第 d-1 维为真实/干扰标志 Z；
- t_{D[m]} = e_m ± E（空单元格取 +）；非数据标签行为 0；
- b_0 = margin·E；真实框 = margin·max(1, τ)·e_target + Z；干扰框 = -Z；填充行为 0。
"""
from dataclasses import replace
import logging

import numpy as np

from ..errors import DimensionTooSmall, InvalidMargin
from ..pointer.layout import PointerFeatures, Temperature, TauLike, resolve_tau
from ..pointer.layout_filter import FilterParams, default_hidden
from .corpus import CorpusSample

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 4.0
# 过滤器输出的 logit 幅度（σ(±30) 与 0/1 的差 < 1e-9）
FILTER_SATURATION = 30.0


def empty_axis(d: int) -> int:
    return d - 2


def flag_axis(d: int) -> int:
    return d - 1


def oracle_features(sample: CorpusSample, d: int, margin: float = DEFAULT_MARGIN,
                    tau: TauLike = Temperature()) -> PointerFeatures:
    if not margin > 0:
        raise InvalidMargin(f"margin must be positive, got {margin}")
    D = sample.data_tags
    if d < len(D) + 2:
        raise DimensionTooSmall(f"d={d} cannot hold {len(D)} data tags plus 2 control axes")
    E, Z = empty_axis(d), flag_axis(d)
    layout = sample.layout

    t = np.zeros((layout.n_tags, d))
    for m, (pos, empty) in enumerate(zip(D, sample.empty_labels)):
        t[pos, m] = 1.0
        t[pos, E] = 1.0 if empty else -1.0

    b = np.zeros((layout.box_slots, d))
    b[layout.special_slot, E] = margin
    scale = margin * max(1.0, resolve_tau(tau))
    for slot, box in zip(layout.real_slots, sample.annotations.boxes):
        if box.is_distractor:
            b[slot, Z] = -1.0
        else:
            b[slot, box.target] = scale
            b[slot, Z] = 1.0
    return PointerFeatures.with_identity(np.vstack([b, t]))


def oracle_filter_params(d: int) -> FilterParams:
    """只读 Z 维：真实框 logit +30，干扰框 -30。"""
    params = FilterParams.zeros(d, default_hidden(d))
    w1 = params.w1.copy()
    w1[0, flag_axis(d)] = 1.0
    w2 = params.w2.copy()
    w2[0, 0] = 2.0 * FILTER_SATURATION
    return FilterParams(w1, params.b1, w2, np.array([-FILTER_SATURATION]))


def with_oracle_features(sample: CorpusSample, d: int, margin: float = DEFAULT_MARGIN,
                         tau: TauLike = Temperature()) -> CorpusSample:
    return replace(sample, features=oracle_features(sample, d, margin, tau))
