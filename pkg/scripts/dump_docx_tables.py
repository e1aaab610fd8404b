import sys
from pathlib import Path

from docx import Document

from tsrkit.parsers.docx_parser import docx_table_to_grid
from tsrkit.parsers.html_table import grid_to_html, html_to_string
from tsrkit.parsers.otsl import grid_to_otsl


def describe_row(row) -> str:
    # python-docx 对合并单元格会重复返回同一个 cell，这里按 tc 去重
    seen = []
    for cell in row.cells:
        if not any(cell._tc is s._tc for s in seen):
            seen.append(cell)
    return " | ".join(c.text for c in seen)


def main(doc_path: str, with_rows: bool = False):
    p = Path(doc_path)
    doc = Document(str(p))
    for t_i, table in enumerate(doc.tables):
        grid = docx_table_to_grid(table)
        print(f"[table {t_i}] {grid.n_rows}x{grid.n_cols}, {len(grid.cells)} cells")
        print(f"  otsl -> {grid_to_otsl(grid).to_text()}")
        print(f"  html -> {html_to_string(grid_to_html(grid, include_content=True))}")
        if with_rows:
            for r_i, row in enumerate(table.rows):
                print(f"  [row {r_i}] {describe_row(row)}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Usage: python scripts/dump_docx_tables.py <docx> [--rows]")
        sys.exit(2)
    main(sys.argv[1], "--rows" in sys.argv[2:])
