"""表格 HTML：有序标签树 HtmlNode，与 TableGrid 的互转，以及字符串的解析与输出。

输出方言：<table><tr><td ...>文本</td></tr></table>，无空白、双引号属性，
colspan/rowspan 仅在 >1 时输出。解析端较宽松：接受整篇文档、忽略
thead/tbody/tfoot 包裹、把 th 当作 td。
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple
import logging

from lxml import etree, html

from ..errors import InvalidGrid, MalformedHtml, OverlappingSpans, RaggedTable
from ..schemas import CellSpec, TableGrid, validate_grid

logger = logging.getLogger(__name__)

SECTION_TAGS = ("thead", "tbody", "tfoot")


@dataclass(frozen=True)
class HtmlNode:
    tag: str
    colspan: int = 1
    rowspan: int = 1
    # 仅 td 使用；None 表示不携带文本（纯结构），"" 表示空单元格
    content: Optional[str] = None
    children: Tuple["HtmlNode", ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    def node_count(self) -> int:
        return 1 + sum(ch.node_count() for ch in self.children)


# 整棵树即根节点 table
HtmlTree = HtmlNode


def validate_html_tree(tree: HtmlTree) -> None:
    if tree.tag != "table":
        raise MalformedHtml(f"root must be <table>, got <{tree.tag}>")
    for tr in tree.children:
        if tr.tag != "tr":
            raise MalformedHtml(f"<table> child must be <tr>, got <{tr.tag}>")
        for td in tr.children:
            if td.tag != "td":
                raise MalformedHtml(f"<tr> child must be <td>, got <{td.tag}>")
            if td.colspan < 1 or td.rowspan < 1:
                raise MalformedHtml(f"span attributes must be >= 1, got ({td.colspan},{td.rowspan})")
            if td.children:
                raise MalformedHtml("<td> must be a leaf")


def grid_to_html(grid: TableGrid, include_content: bool = False) -> HtmlTree:
    report = validate_grid(grid)
    if not report.ok:
        raise InvalidGrid(report)
    by_row: Dict[int, List[HtmlNode]] = {r: [] for r in range(grid.n_rows)}
    for cell in sorted(grid.cells, key=lambda c: (c.anchor_row, c.anchor_col)):
        content = None
        if include_content:
            content = "" if cell.is_empty else (cell.content or "")
        by_row[cell.anchor_row].append(HtmlNode("td", cell.colspan, cell.rowspan, content))
    return HtmlNode("table", children=tuple(HtmlNode("tr", children=tuple(by_row[r])) for r in range(grid.n_rows)))


def html_to_grid(tree: HtmlTree) -> TableGrid:
    """按行放置 td，rowspan 向下占位（标准的跨行继承放置）。"""
    validate_html_tree(tree)
    n_rows = len(tree.children)
    if n_rows == 0:
        raise RaggedTable("table has no rows")

    taken: Dict[Tuple[int, int], int] = {}
    cells: List[CellSpec] = []
    for r, tr in enumerate(tree.children):
        c = 0
        for td in tr.children:
            while (r, c) in taken:
                c += 1
            if r + td.rowspan > n_rows:
                raise OverlappingSpans(f"rowspan {td.rowspan} at ({r},{c}) exceeds remaining rows")
            idx = len(cells)
            for rr in range(r, r + td.rowspan):
                for cc in range(c, c + td.colspan):
                    if (rr, cc) in taken:
                        raise OverlappingSpans(f"cell at ({r},{c}) overlaps ({rr},{cc})")
                    taken[(rr, cc)] = idx
            if td.content is None:
                cells.append(CellSpec(r, c, td.rowspan, td.colspan))
            elif td.content == "":
                cells.append(CellSpec(r, c, td.rowspan, td.colspan, is_empty=True))
            else:
                cells.append(CellSpec(r, c, td.rowspan, td.colspan, content=td.content))
            c += td.colspan

    n_cols = max((cc for (_, cc) in taken), default=-1) + 1
    if n_cols == 0:
        raise RaggedTable("table has no cells")
    for r in range(n_rows):
        width = sum(1 for cc in range(n_cols) if (r, cc) in taken)
        if width != n_cols:
            raise RaggedTable(f"row {r} covers {width} columns, expected {n_cols}")

    cells.sort(key=lambda x: (x.anchor_row, x.anchor_col))
    return TableGrid(n_rows, n_cols, tuple(cells))


def erase_content(tree: HtmlTree) -> HtmlTree:
    if tree.tag == "td":
        return replace(tree, content=None)
    return replace(tree, children=tuple(erase_content(ch) for ch in tree.children))


# ---- 字符串 ----

def _to_element(node: HtmlNode) -> etree._Element:
    el = etree.Element(node.tag)
    if node.tag == "td":
        if node.colspan > 1:
            el.set("colspan", str(node.colspan))
        if node.rowspan > 1:
            el.set("rowspan", str(node.rowspan))
        if node.content:
            el.text = node.content
    for ch in node.children:
        el.append(_to_element(ch))
    return el


def html_to_string(tree: HtmlTree) -> str:
    return etree.tostring(_to_element(tree), method="html", encoding="unicode")


def _span(el: etree._Element, name: str) -> int:
    raw = (el.get(name) or "1").strip()
    try:
        value = int(raw)
    except ValueError:
        raise MalformedHtml(f"bad {name} value {raw!r}") from None
    if value < 1:
        raise MalformedHtml(f"{name} must be >= 1, got {value}")
    return value


def _from_element(table: etree._Element, with_content: bool) -> HtmlTree:
    rows: List[HtmlNode] = []
    for tr in table.iterchildren("tr"):
        tds: List[HtmlNode] = []
        for td in tr.iterchildren("td", "th"):
            content = td.text_content() if with_content else None
            tds.append(HtmlNode("td", _span(td, "colspan"), _span(td, "rowspan"), content))
        rows.append(HtmlNode("tr", children=tuple(tds)))
    return HtmlNode("table", children=tuple(rows))


def html_from_string(text: str, with_content: bool = True) -> HtmlTree:
    if not text or not text.strip():
        raise MalformedHtml("empty html input")
    parser = html.HTMLParser(remove_comments=True, encoding="utf-8")
    try:
        root = html.fromstring(text.encode("utf-8"), parser=parser)
    except (etree.ParserError, ValueError) as e:
        raise MalformedHtml(f"cannot parse html: {e}") from e
    table = root if root.tag == "table" else root.find(".//table")
    if table is None:
        raise MalformedHtml("no <table> element found")
    etree.strip_tags(table, *SECTION_TAGS)
    tree = _from_element(table, with_content)
    logger.debug("parsed html table: %d rows", len(tree.children))
    return tree
