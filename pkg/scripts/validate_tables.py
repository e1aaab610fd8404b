import json
import sys
from pathlib import Path
from typing import Dict, List

from tsrkit.parsers.docx_parser import read_docx_grids
from tsrkit.parsers.html_table import grid_to_html, html_from_string, html_to_grid, html_to_string
from tsrkit.parsers.otsl import grid_to_otsl, otsl_parse, otsl_to_grid
from tsrkit.schemas import TableGrid, validate_grid


SAMPLES_DIR = Path(__file__).resolve().parent.parent / "samples"
OUTPUTS_DIR = Path(__file__).resolve().parent.parent / "outputs"


def validate_table(grid: TableGrid) -> Dict[str, List[str]]:
    errors: List[str] = []
    warnings: List[str] = []

    report = validate_grid(grid)
    for v in report.violations:
        errors.append(f"{v.rule}: {v.message}")
    if errors:
        return {"errors": errors, "warnings": warnings}

    # 结构经 OTSL 往返必须不变
    structure = grid.structure()
    seq = grid_to_otsl(grid)
    if otsl_to_grid(otsl_parse(seq.to_text())) != structure:
        errors.append("OTSL 往返后结构不一致")

    # 带文本经 HTML 往返必须不变
    html = html_to_string(grid_to_html(grid, include_content=True))
    if html_to_grid(html_from_string(html)) != grid:
        errors.append("HTML 往返后表格不一致")

    if all(c.is_empty for c in grid.cells):
        warnings.append("表格所有单元格都为空")
    if len(grid.cells) == 1:
        warnings.append("表格只有一个单元格（可能是版式用的外框表）")
    return {"errors": errors, "warnings": warnings}


def _iter_docx_files(root: Path):
    for p in root.rglob("*.docx"):
        # 跳过临时文件（如 ~$ 开头）
        if p.name.startswith("~$"):
            continue
        yield p


def main() -> int:
    OUTPUTS_DIR.mkdir(parents=True, exist_ok=True)

    docx_files = sorted(_iter_docx_files(SAMPLES_DIR))
    if not docx_files:
        print("❌ 未在 samples 目录发现 .docx 文件")
        return 2

    total = 0
    passed = 0
    failed = 0
    results = []

    for docx_path in docx_files:
        try:
            grids = read_docx_grids(docx_path)
        except Exception as e:
            total += 1
            failed += 1
            results.append({"file": docx_path.name, "table": None, "status": "error", "errors": [str(e)], "warnings": []})
            continue

        # 在 outputs 下镜像 samples 的相对路径结构，每个表格一行
        rel = docx_path.relative_to(SAMPLES_DIR)
        out_path = OUTPUTS_DIR / rel.parent / (rel.stem + ".tables.jsonl")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        lines = []
        for t_i, grid in enumerate(grids):
            total += 1
            v = validate_table(grid)
            status = "failed" if v["errors"] else "passed"
            if v["errors"]:
                failed += 1
            else:
                passed += 1
                lines.append(json.dumps({
                    "table_index": t_i,
                    "otsl": grid_to_otsl(grid).to_text(),
                    "html": html_to_string(grid_to_html(grid, include_content=True)),
                }, ensure_ascii=False))
            results.append({"file": docx_path.name, "table": t_i, "status": status, **v})
        out_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    # 汇总输出
    print("=== 验证汇总 ===")
    print(f"表格总数: {total}")
    print(f"往返通过: {passed}")
    print(f"往返失败: {failed}")
    print("")

    # 列出失败与警告样例
    for r in results:
        if r["status"] != "passed" or r["warnings"]:
            print(f"-- {r['file']} | table {r['table']} | {r['status']}")
            for e in r["errors"]:
                print(f"  error: {e}")
            for w in r["warnings"]:
                print(f"  warn: {w}")

    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
