from pathlib import Path
import logging

from docx import Document

from ..errors import InvalidGrid, IoFailure
from ..schemas import TableGrid, validate_grid

logger = logging.getLogger(__name__)


def write_grid_to_docx(grid: TableGrid, doc_path: Path) -> None:
    """把 TableGrid 写成一个 Word 表格：
    - 先建 n_rows×n_cols 的规则表格；
    - 跨行/跨列单元格用 python-docx 的 merge 合并左上角与右下角；
    - 合并后的单元格写入 content（空单元格保持空白）。
    """
    report = validate_grid(grid)
    if not report.ok:
        raise InvalidGrid(report)

    doc = Document()
    table = doc.add_table(rows=grid.n_rows, cols=grid.n_cols)
    for cell in grid.cells:
        top_left = table.cell(cell.anchor_row, cell.anchor_col)
        if cell.rowspan > 1 or cell.colspan > 1:
            bottom_right = table.cell(cell.anchor_row + cell.rowspan - 1, cell.anchor_col + cell.colspan - 1)
            top_left = top_left.merge(bottom_right)
        if cell.content:
            top_left.text = cell.content

    try:
        doc.save(str(doc_path))
    except OSError as e:
        raise IoFailure(f"cannot write docx {doc_path}: {e}") from e
    logger.info("wrote %dx%d table to %s", grid.n_rows, grid.n_cols, doc_path)
