import pytest

from tsrkit.errors import (
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
from tsrkit.parsers.html_table import grid_to_html, html_to_grid
from tsrkit.parsers.otsl import (
    OtslSequence,
    OtslToken,
    data_tag_indices,
    grid_to_otsl,
    otsl_parse,
    otsl_to_grid,
    try_parse,
)
from tsrkit.schemas import CellSpec, TableGrid, validate_grid

from conftest import random_grids


@pytest.mark.parametrize("text", ["C C NL C C NL", "C L NL C C NL", "C C NL U C NL", "C L NL U X NL", "C NL"])
def test_parse_valid(text):
    seq = otsl_parse(text)
    assert seq.validated
    assert seq.to_text() == text


@pytest.mark.parametrize("text, error, where", [
    ("L C NL", IllegalL, (0, 0)),
    ("C C NL C Q NL", UnknownToken, (1, 1)),
    ("C C NL C NL", RaggedRows, (1, 1)),
    ("U C NL", IllegalU, (0, 0)),
    ("C L NL X C NL", IllegalX, (1, 0)),
    ("C C NL C X NL", IllegalX, (1, 1)),
    ("C C NL L C NL", IllegalL, (1, 0)),
    ("C C NL C L NL C U NL", IllegalU, (2, 1)),
])
def test_parse_reports_first_violation(text, error, where):
    with pytest.raises(error) as info:
        otsl_parse(text)
    assert (info.value.row, info.value.col) == where
    assert info.value.rule == error.__name__


def test_parse_empty_and_unterminated():
    with pytest.raises(EmptySequence):
        otsl_parse("   ")
    with pytest.raises(RaggedRows):
        otsl_parse("C C")


def test_try_parse_is_total():
    seq, err = try_parse("C NL")
    assert seq is not None and err is None
    seq, err = try_parse("L NL")
    assert seq is None and isinstance(err, OtslError)


def test_otsl_to_grid_examples():
    grid = otsl_to_grid(otsl_parse("C C NL C C NL"))
    assert (grid.n_rows, grid.n_cols) == (2, 2)
    assert all((c.rowspan, c.colspan) == (1, 1) for c in grid.cells)

    grid = otsl_to_grid(otsl_parse("C L NL C C NL"))
    assert grid.cells[0] == CellSpec(0, 0, 1, 2)
    assert len(grid.cells) == 3

    grid = otsl_to_grid(otsl_parse("C C NL U C NL"))
    assert grid.cells[0] == CellSpec(0, 0, 2, 1)


def test_non_rectangular_merge():
    # 第 1 行的 U 只延伸了 colspan=2 单元格的左半部分
    with pytest.raises(NonRectangularMerge):
        otsl_to_grid(otsl_parse("C L NL U C NL"))


def test_grid_to_otsl_examples():
    assert grid_to_otsl(TableGrid(1, 1, [CellSpec(0, 0)])).to_text() == "C NL"
    assert grid_to_otsl(TableGrid(2, 2, [CellSpec(0, 0, 2, 2)])).to_text() == "C L NL U X NL"
    for text in ("C C NL C C NL", "C L NL C C NL", "C C NL U C NL"):
        assert grid_to_otsl(otsl_to_grid(otsl_parse(text))).to_text() == text


def test_grid_to_otsl_rejects_invalid():
    with pytest.raises(InvalidGrid):
        grid_to_otsl(TableGrid(1, 2, [CellSpec(0, 0)]))


def test_data_tag_indices():
    assert tuple(data_tag_indices(otsl_parse("C C NL C C NL"))) == (0, 1, 3, 4)
    assert tuple(data_tag_indices(otsl_parse("C L NL C C NL"))) == (0, 3, 4)
    assert tuple(data_tag_indices(otsl_parse("C NL"))) == (0,)
    assert data_tag_indices(otsl_parse("C L NL C C NL")).column_of(3) == 1


def test_unvalidated_sequence_is_checked():
    seq = OtslSequence((OtslToken.L, OtslToken.NL))
    with pytest.raises(IllegalL):
        otsl_to_grid(seq)


def test_round_trip_small_batch():
    for grid in random_grids(seed=11, n=300, max_rows=8, max_cols=8):
        seq = grid_to_otsl(grid)
        assert len(seq) == grid.n_rows * grid.n_cols + grid.n_rows
        assert otsl_to_grid(otsl_parse(seq.to_text())) == grid
        assert html_to_grid(grid_to_html(grid)) == grid
        assert len(data_tag_indices(seq)) == len(grid.cells)


@pytest.mark.slow
def test_round_trip_ten_thousand_grids():
    for grid in random_grids(seed=2024, n=10_000):
        assert validate_grid(grid).ok
        assert otsl_to_grid(grid_to_otsl(grid)) == grid
        assert html_to_grid(grid_to_html(grid)) == grid
