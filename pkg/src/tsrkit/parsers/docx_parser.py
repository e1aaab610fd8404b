from pathlib import Path
from typing import Dict, List, Optional, Tuple
import logging

from docx import Document
from docx.table import Table, _Cell

from ..errors import IoFailure, OverlappingSpans, RaggedTable
from ..schemas import CellSpec, TableGrid

logger = logging.getLogger(__name__)


def _strip(text: Optional[str]) -> str:
    return (text or "").strip()


def _get_grid_span(tc) -> int:
    # 兼容不同版本的 python-docx，不存在时按 1 处理
    return int(getattr(tc, "grid_span", 1) or 1)


def _get_vmerge(tc) -> Optional[str]:
    return getattr(tc, "vMerge", None)


def docx_table_to_grid(table: Table) -> TableGrid:
    """把 Word 表格还原为 TableGrid。

    - 遍历每行真实存在的 w:tc，用 gridSpan 累积列索引（横向合并）；
    - vMerge="continue" 的 tc 延伸其上方同列单元格的 rowspan（纵向合并）；
    - 单元格文本去首尾空白，空文本视为空单元格。
    """
    rows = table.rows
    if not rows:
        raise RaggedTable("word table has no rows")

    # 每个单元格：[anchor_row, anchor_col, rowspan, colspan, text]
    spans: List[List] = []
    owner: Dict[Tuple[int, int], int] = {}
    widths: List[int] = []

    for row_idx, row in enumerate(rows):
        grid_span_index = 0
        for tc in row._tr.tc_lst:
            span = _get_grid_span(tc)
            if _get_vmerge(tc) == "continue":
                above = owner.get((row_idx - 1, grid_span_index))
                if above is None:
                    raise OverlappingSpans(f"vertical merge at ({row_idx},{grid_span_index}) has no cell above")
                spans[above][2] += 1
                idx = above
            else:
                idx = len(spans)
                text = _strip(_Cell(tc, table).text)
                spans.append([row_idx, grid_span_index, 1, span, text])
            for cc in range(grid_span_index, grid_span_index + span):
                if (row_idx, cc) in owner:
                    raise OverlappingSpans(f"cell overlap at ({row_idx},{cc})")
                owner[(row_idx, cc)] = idx
            grid_span_index += span
        widths.append(grid_span_index)

    n_cols = widths[0]
    for r, w in enumerate(widths):
        if w != n_cols:
            raise RaggedTable(f"row {r} covers {w} grid columns, expected {n_cols}")

    cells = []
    for r, c, rowspan, colspan, text in spans:
        if text:
            cells.append(CellSpec(r, c, rowspan, colspan, content=text))
        else:
            cells.append(CellSpec(r, c, rowspan, colspan, is_empty=True))
    cells.sort(key=lambda x: (x.anchor_row, x.anchor_col))
    return TableGrid(len(rows), n_cols, tuple(cells))


def read_docx_grids(docx_path: Path) -> List[TableGrid]:
    try:
        doc = Document(str(docx_path))
    except Exception as e:
        raise IoFailure(f"cannot open docx {docx_path}: {e}") from e
    grids = [docx_table_to_grid(t) for t in doc.tables]
    logger.info("read %d table(s) from %s", len(grids), docx_path)
    return grids
