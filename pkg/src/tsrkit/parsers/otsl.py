"""OTSL 标记序列的解析、校验、序列化，以及与 TableGrid 的互转。

规则集（序列有效当且仅当）：
- 非空且以 NL 结尾；每行（NL 之间的非空片段）长度一致；
- L 不在第 0 列，左邻为 C 或 L；
- U 不在第 0 行，上邻为 C、U 或 X；
- X 不在第 0 行/列，左邻为 U 或 X，上邻为 L 或 X。
合并区域必须是矩形，由 otsl_to_grid 在重建时检查。
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple
import logging

from ..errors import (
    EmptySequence,
    IllegalL,
    IllegalU,
    IllegalX,
    InvalidGrid,
    NonRectangularMerge,
    OtslError,
    RaggedRows,
    UnknownToken,
)
from ..schemas import CellSpec, TableGrid, validate_grid

logger = logging.getLogger(__name__)


class OtslToken(str, Enum):
    C = "C"
    L = "L"
    U = "U"
    X = "X"
    NL = "NL"


@dataclass(frozen=True)
class OtslSequence:
    tokens: Tuple[OtslToken, ...]
    validated: bool = False

    def __len__(self) -> int:
        return len(self.tokens)

    def rows(self) -> List[List[OtslToken]]:
        out: List[List[OtslToken]] = []
        current: List[OtslToken] = []
        for tok in self.tokens:
            if tok is OtslToken.NL:
                out.append(current)
                current = []
            else:
                current.append(tok)
        if current:
            out.append(current)
        return out

    def to_text(self) -> str:
        return " ".join(t.value for t in self.tokens)


@dataclass(frozen=True)
class DataTagIndexSet:
    """序列中所有 C 标记的位置（升序）。第 m 个位置对应第 m 个单元格。"""
    indices: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __getitem__(self, m: int) -> int:
        return self.indices[m]

    def column_of(self, position: int) -> int:
        """k*（序列位置）→ 指针 logits 的列号。"""
        return self.indices.index(position)


def _check_rows(rows: List[List[OtslToken]]) -> None:
    width = len(rows[0])
    for r, row in enumerate(rows):
        if not row:
            raise RaggedRows("empty row", r, 0)
        if len(row) != width:
            raise RaggedRows(f"row has {len(row)} tokens, expected {width}", r, min(len(row), width))
    for r, row in enumerate(rows):
        for c, tok in enumerate(row):
            left = row[c - 1] if c > 0 else None
            above = rows[r - 1][c] if r > 0 else None
            if tok is OtslToken.L:
                if c == 0:
                    raise IllegalL("L in column 0", r, c)
                if left not in (OtslToken.C, OtslToken.L):
                    raise IllegalL(f"left neighbour is {left.value}", r, c)
            elif tok is OtslToken.U:
                if r == 0:
                    raise IllegalU("U in row 0", r, c)
                if above not in (OtslToken.C, OtslToken.U, OtslToken.X):
                    raise IllegalU(f"token above is {above.value}", r, c)
            elif tok is OtslToken.X:
                if r == 0 or c == 0:
                    raise IllegalX("X in row 0 or column 0", r, c)
                if left not in (OtslToken.U, OtslToken.X):
                    raise IllegalX(f"left neighbour is {left.value}", r, c)
                if above not in (OtslToken.L, OtslToken.X):
                    raise IllegalX(f"token above is {above.value}", r, c)


def validate_tokens(tokens: Sequence[OtslToken]) -> OtslSequence:
    if not tokens:
        raise EmptySequence("no tokens")
    seq = OtslSequence(tuple(tokens))
    if tokens[-1] is not OtslToken.NL:
        n = len(seq.rows())
        raise RaggedRows("last row is not terminated by NL", n - 1, len(seq.rows()[-1]))
    _check_rows(seq.rows())
    return OtslSequence(tuple(tokens), validated=True)


def otsl_parse(text: str) -> OtslSequence:
    """解析空白分隔的标记串；成功返回已校验序列，否则抛出带位置的 OtslError。"""
    raw = text.split()
    if not raw:
        raise EmptySequence("no tokens")
    tokens: List[OtslToken] = []
    row, col = 0, 0
    for word in raw:
        try:
            tok = OtslToken(word)
        except ValueError:
            raise UnknownToken(f"unknown token {word!r}", row, col) from None
        tokens.append(tok)
        if tok is OtslToken.NL:
            row, col = row + 1, 0
        else:
            col += 1
    return validate_tokens(tokens)


def _require_validated(seq: OtslSequence) -> None:
    if not seq.validated:
        validate_tokens(seq.tokens)


def otsl_to_grid(seq: OtslSequence) -> TableGrid:
    _require_validated(seq)
    rows = seq.rows()
    n_rows, n_cols = len(rows), len(rows[0])
    owner = [[-1] * n_cols for _ in range(n_rows)]
    cells: List[CellSpec] = []

    for r in range(n_rows):
        for c in range(n_cols):
            if rows[r][c] is not OtslToken.C:
                continue
            colspan = 1
            while c + colspan < n_cols and rows[r][c + colspan] is OtslToken.L:
                colspan += 1
            rowspan = 1
            while r + rowspan < n_rows and rows[r + rowspan][c] is OtslToken.U:
                rowspan += 1
            idx = len(cells)
            for rr in range(r, r + rowspan):
                for cc in range(c, c + colspan):
                    if rr == r and cc == c:
                        expected = OtslToken.C
                    elif rr == r:
                        expected = OtslToken.L
                    elif cc == c:
                        expected = OtslToken.U
                    else:
                        expected = OtslToken.X
                    if rows[rr][cc] is not expected or owner[rr][cc] != -1:
                        raise NonRectangularMerge(
                            f"expected {expected.value} inside merge anchored at ({r},{c})", rr, cc)
                    owner[rr][cc] = idx
            cells.append(CellSpec(r, c, rowspan, colspan))

    for r in range(n_rows):
        for c in range(n_cols):
            if owner[r][c] == -1:
                raise NonRectangularMerge(f"{rows[r][c].value} does not extend any cell", r, c)
    return TableGrid(n_rows, n_cols, tuple(cells))


def grid_to_otsl(grid: TableGrid) -> OtslSequence:
    report = validate_grid(grid)
    if not report.ok:
        raise InvalidGrid(report)
    occ = grid.occupancy()
    tokens: List[OtslToken] = []
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            cell = grid.cells[occ[r][c]]
            if (r, c) == (cell.anchor_row, cell.anchor_col):
                tokens.append(OtslToken.C)
            elif r == cell.anchor_row:
                tokens.append(OtslToken.L)
            elif c == cell.anchor_col:
                tokens.append(OtslToken.U)
            else:
                tokens.append(OtslToken.X)
        tokens.append(OtslToken.NL)
    return OtslSequence(tuple(tokens), validated=True)


def data_tag_indices(seq: OtslSequence) -> DataTagIndexSet:
    _require_validated(seq)
    return DataTagIndexSet(tuple(i for i, t in enumerate(seq.tokens) if t is OtslToken.C))


def try_parse(text: str) -> Tuple[Optional[OtslSequence], Optional[OtslError]]:
    """总是返回 (序列, None) 或 (None, 诊断) 之一。"""
    try:
        return otsl_parse(text), None
    except OtslError as e:
        logger.debug("otsl parse failed: %s", e)
        return None, e
