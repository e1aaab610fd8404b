from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import json

from .errors import InvalidAnnotations, InvalidBBox, InvalidGrid, SchemaViolation


@dataclass(frozen=True)
class CellSpec:
    anchor_row: int
    anchor_col: int
    rowspan: int = 1
    colspan: int = 1
    is_empty: bool = False
    # None 表示“只有结构、不携带文本”；空单元格的 content 必须为 None
    content: Optional[str] = None

    @property
    def row_range(self) -> Tuple[int, int]:
        return self.anchor_row, self.anchor_row + self.rowspan

    @property
    def col_range(self) -> Tuple[int, int]:
        return self.anchor_col, self.anchor_col + self.colspan


@dataclass(frozen=True)
class Violation:
    rule: str
    row: int
    col: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class TableGrid:
    n_rows: int
    n_cols: int
    cells: Tuple[CellSpec, ...]

    def __post_init__(self):
        # 允许传入 list，统一成 tuple 保证不可变与可哈希
        if not isinstance(self.cells, tuple):
            object.__setattr__(self, "cells", tuple(self.cells))

    def occupancy(self) -> List[List[int]]:
        """n_rows×n_cols 的格位 → 单元格下标映射；网格无效时抛 InvalidGrid。"""
        report = validate_grid(self)
        if not report.ok:
            raise InvalidGrid(report)
        occ = [[-1] * self.n_cols for _ in range(self.n_rows)]
        for idx, cell in enumerate(self.cells):
            for r in range(*cell.row_range):
                for c in range(*cell.col_range):
                    occ[r][c] = idx
        return occ

    def with_contents(self, contents: Sequence[Optional[str]]) -> "TableGrid":
        """按单元格顺序填入文本；None 或空串视为空单元格。"""
        if len(contents) != len(self.cells):
            raise InvalidGrid(ValidationReport((Violation(
                "content-count", 0, 0,
                f"expected {len(self.cells)} contents, got {len(contents)}"),)))
        new_cells = []
        for cell, text in zip(self.cells, contents):
            empty = not text
            new_cells.append(CellSpec(cell.anchor_row, cell.anchor_col, cell.rowspan, cell.colspan,
                                      is_empty=empty, content=None if empty else text))
        return TableGrid(self.n_rows, self.n_cols, tuple(new_cells))

    def structure(self) -> "TableGrid":
        """去掉文本与空标记，仅保留结构。"""
        return TableGrid(self.n_rows, self.n_cols, tuple(
            CellSpec(c.anchor_row, c.anchor_col, c.rowspan, c.colspan) for c in self.cells))


def validate_grid(grid: TableGrid) -> ValidationReport:
    """列出网格的全部不变量违规（带格位坐标）；违规是数据，不抛异常。"""
    out: List[Violation] = []
    if grid.n_rows < 1 or grid.n_cols < 1:
        out.append(Violation("shape", 0, 0, f"grid must be at least 1x1, got {grid.n_rows}x{grid.n_cols}"))
        return ValidationReport(tuple(out))

    owner: Dict[Tuple[int, int], int] = {}
    prev_anchor: Optional[Tuple[int, int]] = None
    for idx, cell in enumerate(grid.cells):
        r, c = cell.anchor_row, cell.anchor_col
        if cell.rowspan < 1 or cell.colspan < 1:
            out.append(Violation("span", r, c, f"non-positive span ({cell.rowspan},{cell.colspan}) at ({r},{c})"))
            continue
        if r < 0 or c < 0 or r + cell.rowspan > grid.n_rows or c + cell.colspan > grid.n_cols:
            out.append(Violation("bounds", r, c, f"cell {idx} out of bounds at ({r},{c})"))
            continue
        if cell.is_empty and cell.content is not None:
            out.append(Violation("content", r, c, f"empty cell carries content at ({r},{c})"))
        if cell.content is not None and cell.content == "":
            out.append(Violation("content", r, c, f"blank content on non-empty cell at ({r},{c})"))
        if prev_anchor is not None and (r, c) <= prev_anchor:
            out.append(Violation("order", r, c, f"cell {idx} breaks reading order at ({r},{c})"))
        prev_anchor = (r, c)
        for rr in range(r, r + cell.rowspan):
            for cc in range(c, c + cell.colspan):
                if (rr, cc) in owner:
                    out.append(Violation("overlap", rr, cc, f"overlap at ({rr},{cc})"))
                else:
                    owner[(rr, cc)] = idx

    for rr in range(grid.n_rows):
        for cc in range(grid.n_cols):
            if (rr, cc) not in owner:
                out.append(Violation("gap", rr, cc, f"gap at ({rr},{cc})"))
    return ValidationReport(tuple(out))


def reading_order(grid: TableGrid) -> List[int]:
    report = validate_grid(grid)
    if not report.ok:
        raise InvalidGrid(report)
    return sorted(range(len(grid.cells)), key=lambda i: (grid.cells[i].anchor_row, grid.cells[i].anchor_col))


@dataclass(frozen=True)
class BBox:
    """归一化坐标 [0,1]，相对图像宽高。"""
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if any(not (0.0 <= v <= 1.0) for v in coords):
            raise InvalidBBox(f"coordinates outside [0,1]: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidBBox(f"degenerate box: {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def bbox_iou(a: BBox, b: BBox) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def box_reading_order(boxes: Sequence[BBox]) -> List[int]:
    """文本框的阅读顺序（左上角光栅顺序）：按 y_min 排序后分行，行内按 x_min。

    新框的 y_min 小于当前行所有框的 y_max 时并入该行，因此同一行的框两两纵向相交；
    返回的顺序中不会出现一个框整体位于其后某个框下方的情况。
    """
    by_top = sorted(range(len(boxes)), key=lambda i: (boxes[i].y_min, boxes[i].x_min))
    lines: List[List[int]] = []
    line_bottom = 0.0
    for i in by_top:
        if lines and boxes[i].y_min < line_bottom:
            lines[-1].append(i)
            line_bottom = min(line_bottom, boxes[i].y_max)
        else:
            lines.append([i])
            line_bottom = boxes[i].y_max
    order: List[int] = []
    for line in lines:
        order.extend(sorted(line, key=lambda i: (boxes[i].x_min, boxes[i].y_min)))
    return order


@dataclass(frozen=True)
class AnnotatedBox:
    bbox: BBox
    text: str
    target: Optional[int] = None
    is_distractor: bool = False

    def __post_init__(self):
        if self.is_distractor and self.target is not None:
            raise InvalidAnnotations("distractor box must not have a target cell")


@dataclass(frozen=True)
class CellAnnotations:
    boxes: Tuple[AnnotatedBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.boxes, tuple):
            object.__setattr__(self, "boxes", tuple(self.boxes))

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def real_boxes(self) -> List[int]:
        return [i for i, b in enumerate(self.boxes) if not b.is_distractor]

    @property
    def distractors(self) -> List[int]:
        return [i for i, b in enumerate(self.boxes) if b.is_distractor]


def validate_annotations(annotations: CellAnnotations, grid: TableGrid) -> None:
    """校验标注与网格的一致性：目标必须指向非空单元格，非干扰框必须有目标。"""
    for i, box in enumerate(annotations.boxes):
        if box.is_distractor:
            continue
        if box.target is None:
            raise InvalidAnnotations(f"box {i} is neither a distractor nor labeled")
        if not (0 <= box.target < len(grid.cells)):
            raise InvalidAnnotations(f"box {i} targets missing cell {box.target}")
        if grid.cells[box.target].is_empty:
            raise InvalidAnnotations(f"box {i} targets empty cell {box.target}")


# ---- JSON 编解码（字段名属于语料格式契约） ----

def grid_to_json_obj(grid: TableGrid) -> Dict[str, Any]:
    return {
        "n_rows": grid.n_rows,
        "n_cols": grid.n_cols,
        "cells": [
            {
                "r": c.anchor_row,
                "c": c.anchor_col,
                "rowspan": c.rowspan,
                "colspan": c.colspan,
                "empty": c.is_empty,
                "text": c.content,
            }
            for c in grid.cells
        ],
    }


def grid_from_json_obj(data: Dict[str, Any]) -> TableGrid:
    try:
        cells = tuple(
            CellSpec(
                anchor_row=int(c["r"]),
                anchor_col=int(c["c"]),
                rowspan=int(c.get("rowspan", 1)),
                colspan=int(c.get("colspan", 1)),
                is_empty=bool(c.get("empty", False)),
                content=c.get("text"),
            )
            for c in data["cells"]
        )
        return TableGrid(int(data["n_rows"]), int(data["n_cols"]), cells)
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaViolation(f"bad grid object: {e!r}") from e


def annotations_to_json_obj(annotations: CellAnnotations) -> Dict[str, Any]:
    return {
        "boxes": [
            {
                "bbox": b.bbox.as_list(),
                "text": b.text,
                "target": b.target,
                "distractor": b.is_distractor,
            }
            for b in annotations.boxes
        ]
    }


def annotations_from_json_obj(data: Dict[str, Any]) -> CellAnnotations:
    try:
        boxes = []
        for b in data["boxes"]:
            x0, y0, x1, y1 = b["bbox"]
            target = b.get("target")
            boxes.append(AnnotatedBox(
                bbox=BBox(float(x0), float(y0), float(x1), float(y1)),
                text=str(b.get("text", "")),
                target=None if target is None else int(target),
                is_distractor=bool(b.get("distractor", False)),
            ))
        return CellAnnotations(tuple(boxes))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaViolation(f"bad annotations object: {e!r}") from e


def grid_to_json(grid: TableGrid) -> str:
    return json.dumps(grid_to_json_obj(grid), ensure_ascii=False, indent=2)


def grid_from_json(json_str: str) -> TableGrid:
    return grid_from_json_obj(json.loads(json_str))


def annotations_to_json(annotations: CellAnnotations) -> str:
    return json.dumps(annotations_to_json_obj(annotations), ensure_ascii=False, indent=2)


def annotations_from_json(json_str: str) -> CellAnnotations:
    return annotations_from_json_obj(json.loads(json_str))
