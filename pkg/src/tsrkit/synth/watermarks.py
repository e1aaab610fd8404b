"""水印干扰框：候选文本与几何生成。

只模拟框级信号（位置 + 文本），不做渲染；几何上把原框水平拉伸并轻微平移，
保证与原框 IOU ≥ min_iou。拉伸后的水印可能压到相邻单元格的文本框上。
"""
from dataclasses import dataclass
from typing import Tuple
import logging

import numpy as np

from ..errors import InvalidConfig
from ..schemas import BBox, bbox_iou

logger = logging.getLogger(__name__)

SHORT_TEXTS: Tuple[str, ...] = (
    "Draft", "Final", "Copy", "Legal", "Alert", "Audit", "Proof", "Valid", "Stamp", "Issue",
    "Bonus", "Check", "Title", "Specs", "Photo", "Chart", "Trial", "Claim", "Code", "Quote",
)
MEDIUM_TEXTS: Tuple[str, ...] = (
    "Approved", "Reviewed", "Reserved", "Released", "Received", "Rejected", "Verified", "Original",
    "Recorded", "Canceled", "Internal", "External", "Modified", "Drafting", "Proposal", "Expiring",
    "Amended", "Corrected", "Invoice", "Template", "Archived", "Secure", "Private", "Contract",
    "Warranty", "Training", "Briefing", "Guidance", "Exhibit",
)
LONG_TEXTS: Tuple[str, ...] = (
    "Unauthorized", "Preliminary", "Confidential", "For Review", "For Approval", "Restricted",
    "Do Not Copy", "Not Final", "Intellectual", "Property", "For Comment", "Draft Version",
    "Superseded", "Information", "Classified", "Validation", "Obsolete", "Assessment", "Watermarked",
    "Benchmark", "Evaluation", "Disclaimer", "For Internal Use", "Duplicated", "For Reference",
    "Instructor Copy", "Registration", "For Attention", "For Distribution", "Certification",
)

# 拉伸系数下限；min_iou 较大时退化为 1/min_iou
MIN_STRETCH = 1.15
MAX_ATTEMPTS = 16


@dataclass(frozen=True)
class WatermarkConfig:
    enabled: bool = False
    probability: float = 0.2
    min_iou: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise InvalidConfig(f"watermark probability must be in [0,1], got {self.probability}")
        if not 0.0 < self.min_iou <= 1.0:
            raise InvalidConfig(f"watermark min_iou must be in (0,1], got {self.min_iou}")


def candidate_group(text: str) -> Tuple[str, ...]:
    """按原文本长度挑选长度相近的一组候选。"""
    if len(text) <= 5:
        return SHORT_TEXTS
    if len(text) <= 8:
        return MEDIUM_TEXTS
    return LONG_TEXTS


def choose_watermark_text(rng: np.random.Generator, source_text: str) -> str:
    group = candidate_group(source_text)
    return group[int(rng.integers(len(group)))]


def stretch_range(min_iou: float) -> Tuple[float, float]:
    hi = 1.0 / min_iou
    return min(MIN_STRETCH, hi), hi


def watermark_bbox(rng: np.random.Generator, source: BBox, min_iou: float) -> BBox:
    lo, hi = stretch_range(min_iou)
    width = source.x_max - source.x_min
    centre = (source.x_min + source.x_max) / 2.0
    for _ in range(MAX_ATTEMPTS):
        stretch = rng.uniform(lo, hi) if hi > lo else lo
        new_width = width * stretch
        # 平移不超过多出宽度的 1/4，水印始终包住原框
        shift = rng.uniform(-1.0, 1.0) * (new_width - width) / 4.0
        x0 = max(0.0, centre + shift - new_width / 2.0)
        x1 = min(1.0, centre + shift + new_width / 2.0)
        candidate = BBox(x0, source.y_min, x1, source.y_max)
        if bbox_iou(candidate, source) >= min_iou:
            return candidate
    logger.debug("watermark geometry fell back to the source box %s", source.as_list())
    return BBox(source.x_min, source.y_min, source.x_max, source.y_max)
