import math

import numpy as np
import pytest

from tsrkit.errors import LengthMismatch, SchemaViolation, ShapeMismatch
from tsrkit.pointer.layout import build_sequence_layout
from tsrkit.pointer.layout_filter import (
    FilterParams,
    apply_mask,
    filter_bce_loss,
    filter_mask,
    filter_scores,
    greedy_and_selective_baselines,
    iou_baseline_table,
)
from tsrkit.pointer.losses import finite_diff_gradient, relative_error
from tsrkit.parsers.html_table import grid_to_html, html_to_string
from tsrkit.schemas import AnnotatedBox, BBox, CellAnnotations, bbox_iou
from tsrkit.scoring.teds import teds

from conftest import grid_from_otsl


def hand_network() -> FilterParams:
    return FilterParams(w1=[[1.0, 2.0], [-1.0, 1.0]], b1=[0.5, 0.0], w2=[[2.0, -3.0]], b2=[-1.0])


def test_zero_network_scores_half():
    scores = filter_scores(np.ones((3, 4)), FilterParams.zeros(4))
    np.testing.assert_allclose(scores, [0.5, 0.5, 0.5], atol=1e-15)


def test_saturated_network():
    params = FilterParams(np.zeros((1, 2)), [0.0], [[0.0]], [30.0])
    assert filter_scores([[1.0, -1.0]], params)[0] > 1.0 - 1e-9


def test_hand_forward_pass():
    # 第一层 [1·1 + 0.5, -1·1 + 0] = [1.5, -1] → relu [1.5, 0] → 2·1.5 - 1 = 2
    score = filter_scores([[1.0, 0.0]], hand_network())[0]
    assert score == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-12)


def test_scores_only_real_slots_with_layout():
    layout = build_sequence_layout(2, 5)
    b = np.zeros((5, 2))
    b[1] = [1.0, 0.0]
    scores = filter_scores(b, hand_network(), layout)
    assert scores.shape == (2,)
    assert scores[0] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)))
    with pytest.raises(ShapeMismatch):
        filter_scores(np.zeros((4, 2)), hand_network(), layout)
    with pytest.raises(ShapeMismatch):
        filter_scores(np.zeros((2, 3)), hand_network())


def test_mask_is_strict():
    assert filter_mask([0.5]).tolist() == [False]
    assert filter_mask([0.9, 0.1]).tolist() == [True, False]
    assert filter_mask([]).tolist() == []


def _three_boxes():
    return CellAnnotations(tuple(AnnotatedBox(BBox(0.1 * i, 0.1, 0.1 * i + 0.05, 0.2), str(i), target=0) for i in range(3)))


def test_apply_mask():
    annotations = _three_boxes()
    b = np.arange(6, dtype=float).reshape(3, 2)
    kept_b, kept = apply_mask(b, annotations, [1, 1, 1])
    np.testing.assert_array_equal(kept_b, b)
    assert kept == annotations

    kept_b, kept = apply_mask(b, annotations, [True, False, True])
    np.testing.assert_array_equal(kept_b, b[[0, 2]])
    assert [box.text for box in kept.boxes] == ["0", "2"]
    again_b, again = apply_mask(kept_b, kept, [True, True])
    assert again == kept

    empty_b, empty = apply_mask(b, annotations, [0, 0, 0])
    assert empty_b.shape == (0, 2) and len(empty) == 0
    with pytest.raises(LengthMismatch):
        apply_mask(b, annotations, [1, 0])


def test_bce_examples():
    zero = FilterParams.zeros(3)
    loss, _ = filter_bce_loss(np.ones((2, 3)), zero, [True, False])
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)
    loss, _ = filter_bce_loss(np.ones((4, 3)), zero, [True] * 4)
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)
    # Z 维为 +1 的是真实框，-1 的是干扰框
    params = FilterParams([[0.0, 0.0, 1.0]], [0.0], [[60.0]], [-30.0])
    b = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    loss, _ = filter_bce_loss(b, params, [True, False])
    assert loss < 1e-9
    with pytest.raises(LengthMismatch):
        filter_bce_loss(b, params, [True])


@pytest.mark.parametrize("seed", range(100))
def test_bce_gradient(seed):
    rng = np.random.default_rng(seed)
    d, n = int(rng.integers(1, 6)), int(rng.integers(1, 8))
    params = FilterParams.random(rng, d)
    b = rng.normal(size=(n, d))
    labels = [bool(x) for x in rng.integers(0, 2, size=n)]
    _, grad = filter_bce_loss(b, params, labels)

    def f(v):
        return filter_bce_loss(b, FilterParams.from_flat(v, params.d, params.hidden), labels)[0]

    assert relative_error(grad.flatten(), finite_diff_gradient(f, params.flatten())) < 1e-4


def test_params_json_and_flat():
    params = hand_network()
    again = FilterParams.from_json_obj(params.to_json_obj())
    np.testing.assert_array_equal(again.flatten(), params.flatten())
    np.testing.assert_array_equal(FilterParams.from_flat(params.flatten(), 2, 2).flatten(), params.flatten())
    with pytest.raises(SchemaViolation):
        FilterParams.from_json_obj({"w1": [[1.0]]})
    with pytest.raises(ShapeMismatch):
        FilterParams([[1.0, 2.0]], [0.0, 0.0], [[1.0]], [0.0])


def test_baselines_without_distractors():
    grid = grid_from_otsl("C C NL").with_contents(["a", "b"])
    annotations = CellAnnotations((AnnotatedBox(BBox(0.0, 0.0, 0.4, 1.0), "a", target=0),
                                   AnnotatedBox(BBox(0.5, 0.0, 0.9, 1.0), "b", target=1)))
    greedy, selective = greedy_and_selective_baselines(grid, annotations)
    assert html_to_string(greedy) == "<table><tr><td>a</td><td>b</td></tr></table>"
    assert greedy == selective


def test_baseline_iou_threshold():
    grid = grid_from_otsl("C NL").with_contents(["Revenue"])
    real = BBox(0.0, 0.0, 0.6, 1.0)
    watermark = BBox(0.3, 0.0, 1.0, 1.0)
    # 交集 0.3，并集 1.0
    assert bbox_iou(real, watermark) == pytest.approx(0.3)
    annotations = CellAnnotations((AnnotatedBox(real, "Revenue", target=0),
                                   AnnotatedBox(watermark, "Draft", is_distractor=True)))
    greedy, selective = greedy_and_selective_baselines(grid, annotations, 0.5)
    assert html_to_string(greedy) == "<table><tr><td>Revenue Draft</td></tr></table>"
    assert html_to_string(selective) == "<table><tr><td>Revenue</td></tr></table>"
    assert html_to_string(iou_baseline_table(grid, annotations, 0.2)) == html_to_string(greedy)


def test_greedy_degrades_with_more_distractors():
    grid = grid_from_otsl("C C NL").with_contents(["Net", "Tax"])
    real = [AnnotatedBox(BBox(0.0, 0.0, 0.45, 1.0), "Net", target=0),
            AnnotatedBox(BBox(0.55, 0.0, 1.0, 1.0), "Tax", target=1)]
    marks = [AnnotatedBox(BBox(0.0, 0.0, 0.6, 1.0), "Draft", is_distractor=True),
             AnnotatedBox(BBox(0.4, 0.0, 1.0, 1.0), "Copy", is_distractor=True)]
    gt = grid_to_html(grid, include_content=True)
    scores = []
    for k in range(3):
        greedy, _ = greedy_and_selective_baselines(grid, CellAnnotations(tuple(real + marks[:k])))
        scores.append(teds(greedy, gt))
    assert scores[0] == 1.0
    assert scores[0] >= scores[1] >= scores[2]
    assert scores[2] < 1.0
