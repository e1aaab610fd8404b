"""合成表格语料：随机网格、单元格文本框标注、水印干扰框。

每个样本使用独立的随机流 default_rng([seed, index])，因此样本可以任意顺序或并行生成，
结果与串行一致。
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from ..errors import InvalidConfig
from ..parsers.html_table import HtmlTree, grid_to_html
from ..parsers.otsl import DataTagIndexSet, OtslSequence, data_tag_indices, grid_to_otsl
from ..pointer.layout import PointerFeatures, SequenceLayout, build_sequence_layout
from ..schemas import AnnotatedBox, BBox, CellAnnotations, CellSpec, TableGrid, box_reading_order
from .watermarks import WatermarkConfig, choose_watermark_text, watermark_bbox

logger = logging.getLogger(__name__)

SLOT_ALIGN = 32
MAX_SPAN_TRIES = 4
# 文本框与单元格边界的留白（占单列宽 / 切片高的比例）
PAD_X = 0.01
PAD_Y = 0.1

LEXICON: Tuple[str, ...] = (
    "Revenue", "Total", "Net", "Income", "Assets", "Equity", "Cash", "Debt", "Sales", "Cost",
    "Margin", "Tax", "Gross", "Operating", "Interest", "Shares", "Notes", "Year", "Quarter", "Change",
    "Group", "Segment", "Region", "Deferred", "Current", "Other", "Balance", "Fair", "Value", "Loss",
)


@dataclass(frozen=True)
class CorpusConfig:
    seed: int = 0
    n_samples: int = 100
    max_rows: int = 8
    max_cols: int = 8
    span_probability: float = 0.2
    max_span: int = 4
    empty_cell_probability: float = 0.1
    # 第 k 项是单元格含 k+1 个文本框的概率
    boxes_per_cell: Tuple[float, ...] = (0.7, 0.2, 0.1)
    watermark: WatermarkConfig = field(default_factory=WatermarkConfig)
    feature_dim: int = 64
    box_slots: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.boxes_per_cell, tuple):
            object.__setattr__(self, "boxes_per_cell", tuple(self.boxes_per_cell))
        if self.n_samples < 0:
            raise InvalidConfig(f"n_samples must be >= 0, got {self.n_samples}")
        if self.max_rows < 1 or self.max_cols < 1:
            raise InvalidConfig(f"table must allow at least 1x1, got {self.max_rows}x{self.max_cols}")
        for name in ("span_probability", "empty_cell_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0,1], got {value}")
        if self.span_probability > 0 and self.max_span < 2:
            raise InvalidConfig("max_span must be >= 2 when span_probability > 0")
        probs = self.boxes_per_cell
        if not probs or any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise InvalidConfig(f"boxes_per_cell must be a probability vector, got {probs}")
        if self.feature_dim < 1:
            raise InvalidConfig(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.box_slots is not None and self.box_slots < 1:
            raise InvalidConfig(f"box_slots must be >= 1, got {self.box_slots}")


def auto_box_slots(n_boxes: int) -> int:
    """不小于 n_boxes + 1 的最小 32 的倍数。"""
    return SLOT_ALIGN * max(1, -(-(n_boxes + 1) // SLOT_ALIGN))


@dataclass(frozen=True)
class CorpusSample:
    index: int
    grid: TableGrid  # 带文本
    annotations: CellAnnotations
    box_slots: int
    features: Optional[PointerFeatures] = field(default=None, compare=False)

    @property
    def otsl(self) -> OtslSequence:
        return grid_to_otsl(self.grid)

    @property
    def data_tags(self) -> DataTagIndexSet:
        return data_tag_indices(self.otsl)

    @property
    def html_gt(self) -> HtmlTree:
        return grid_to_html(self.grid, include_content=True)

    @property
    def layout(self) -> SequenceLayout:
        return build_sequence_layout(len(self.annotations), self.box_slots, len(self.otsl))

    @property
    def pointer_targets(self) -> List[Optional[int]]:
        """每个框的目标列（= 单元格下标）；干扰框为 None。"""
        return [box.target for box in self.annotations.boxes]

    @property
    def truth_positions(self) -> List[Optional[int]]:
        """每个框的 k*：目标 C 标记在序列中的位置。"""
        D = self.data_tags
        return [None if m is None else D[m] for m in self.pointer_targets]

    @property
    def empty_labels(self) -> List[bool]:
        return [cell.is_empty for cell in self.grid.cells]

    @property
    def n_distractors(self) -> int:
        return len(self.annotations.distractors)


class AnnotationDraw(NamedTuple):
    grid: TableGrid
    annotations: CellAnnotations


def generate_grid(rng: np.random.Generator, config: CorpusConfig) -> TableGrid:
    n_rows = int(rng.integers(1, config.max_rows + 1))
    n_cols = int(rng.integers(1, config.max_cols + 1))
    owner = np.full((n_rows, n_cols), -1, dtype=np.int64)
    cells: List[CellSpec] = []
    for r in range(n_rows):
        for c in range(n_cols):
            if owner[r, c] != -1:
                continue
            rowspan, colspan = 1, 1
            if config.span_probability > 0 and rng.random() < config.span_probability:
                for _ in range(MAX_SPAN_TRIES):
                    rs = min(int(rng.integers(1, config.max_span + 1)), n_rows - r)
                    cs = min(int(rng.integers(1, config.max_span + 1)), n_cols - c)
                    if np.all(owner[r:r + rs, c:c + cs] == -1):
                        rowspan, colspan = rs, cs
                        break
            owner[r:r + rowspan, c:c + colspan] = len(cells)
            empty = bool(rng.random() < config.empty_cell_probability)
            cells.append(CellSpec(r, c, rowspan, colspan, is_empty=empty))
    return TableGrid(n_rows, n_cols, tuple(cells))


def _word(rng: np.random.Generator) -> str:
    if rng.random() < 0.5:
        return LEXICON[int(rng.integers(len(LEXICON)))]
    return f"{int(rng.integers(0, 100000)):,}"


def _cell_boxes(grid: TableGrid, cell: CellSpec, k: int) -> List[BBox]:
    col_w, row_h = 1.0 / grid.n_cols, 1.0 / grid.n_rows
    x0 = cell.anchor_col * col_w + PAD_X * col_w
    x1 = (cell.anchor_col + cell.colspan) * col_w - PAD_X * col_w
    top = cell.anchor_row * row_h
    slice_h = cell.rowspan * row_h / k
    return [
        BBox(x0, top + i * slice_h + PAD_Y * slice_h, x1, top + (i + 1) * slice_h - PAD_Y * slice_h)
        for i in range(k)
    ]


def generate_annotations(rng: np.random.Generator, grid: TableGrid, config: CorpusConfig) -> AnnotationDraw:
    """非空单元格各得 1..k 个文本框（单元格内纵向排布），框按页面阅读顺序
    （box_reading_order）排列；单元格文本是其各框文本自上而下以单个空格连接。"""
    probs = np.asarray(config.boxes_per_cell, dtype=np.float64)
    probs = probs / probs.sum()
    boxes: List[AnnotatedBox] = []
    contents: List[Optional[str]] = []
    for m, cell in enumerate(grid.cells):
        if cell.is_empty:
            contents.append(None)
            continue
        k = int(rng.choice(len(probs), p=probs)) + 1
        words = [_word(rng) for _ in range(k)]
        for bbox, word in zip(_cell_boxes(grid, cell, k), words):
            boxes.append(AnnotatedBox(bbox, word, target=m))
        contents.append(" ".join(words))
    ordered = tuple(boxes[i] for i in box_reading_order([b.bbox for b in boxes]))
    return AnnotationDraw(grid.with_contents(contents), CellAnnotations(ordered))


def _with_boxes(sample: CorpusSample, boxes: Sequence[AnnotatedBox], box_slots: Optional[int]) -> CorpusSample:
    slots = box_slots or auto_box_slots(len(boxes))
    build_sequence_layout(len(boxes), slots)
    return replace(sample, annotations=CellAnnotations(tuple(boxes)), box_slots=slots)


def inject_watermarks(rng: np.random.Generator, sample: CorpusSample, config: WatermarkConfig,
                      box_slots: Optional[int] = None) -> CorpusSample:
    """每个真实框以 probability 概率产生一个水印干扰框，追加在真实框之后。"""
    if not config.enabled or config.probability == 0.0:
        return sample
    boxes = list(sample.annotations.boxes)
    distractors: List[AnnotatedBox] = []
    for i in sample.annotations.real_boxes:
        if rng.random() < config.probability:
            source = boxes[i]
            distractors.append(AnnotatedBox(
                watermark_bbox(rng, source.bbox, config.min_iou),
                choose_watermark_text(rng, source.text),
                is_distractor=True,
            ))
    if not distractors:
        return sample
    return _with_boxes(sample, boxes + distractors, box_slots)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def generate_sample(config: CorpusConfig, index: int) -> CorpusSample:
    rng = sample_rng(config.seed, index)
    grid = generate_grid(rng, config)
    draw = generate_annotations(rng, grid, config)
    n = len(draw.annotations)
    slots = config.box_slots or auto_box_slots(n)
    build_sequence_layout(n, slots)
    sample = CorpusSample(index, draw.grid, draw.annotations, slots)
    return inject_watermarks(rng, sample, config.watermark, config.box_slots)


def _generate_one(args: Tuple[CorpusConfig, int]) -> CorpusSample:
    return generate_sample(*args)


def generate_corpus(config: CorpusConfig, n_jobs: int = 1) -> List[CorpusSample]:
    """按下标顺序返回 n_samples 个样本；n_jobs>1 时多进程生成，结果与串行一致。"""
    if n_jobs < 1:
        raise InvalidConfig(f"n_jobs must be >= 1, got {n_jobs}")
    tasks = [(config, i) for i in range(config.n_samples)]
    if n_jobs == 1:
        samples = [_generate_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            samples = list(pool.map(_generate_one, tasks, chunksize=32))
    logger.info("generated %d samples (seed=%d)", len(samples), config.seed)
    return samples
