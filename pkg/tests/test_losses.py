import math

import numpy as np
import pytest

from tsrkit.errors import InvalidConfig, NonFiniteComponent, NonFiniteEvaluation, ShapeMismatch, TargetOutOfRange
from tsrkit.pointer.losses import (
    COMPONENTS,
    LossWeights,
    TagLogits,
    combined_breakdown,
    combined_loss,
    finite_diff_gradient,
    relative_error,
    tag_classification_loss,
)


def test_tag_loss_closed_forms():
    loss, _ = tag_classification_loss(TagLogits([[math.log(3.0), 0.0, 0.0]], (0,)))
    assert loss == pytest.approx(-math.log(3.0 / 5.0), abs=1e-9)
    assert loss == pytest.approx(0.510826, abs=1e-6)
    loss, _ = tag_classification_loss(TagLogits(np.zeros((4, 5)), (0, 1, 2, 4)))
    assert loss == pytest.approx(math.log(5.0), abs=1e-12)
    loss, _ = tag_classification_loss(TagLogits([[30.0, 0.0, 0.0, 0.0, 0.0]], (0,)))
    assert loss < 1e-9


def test_tag_logits_validation():
    with pytest.raises(TargetOutOfRange):
        TagLogits(np.zeros((1, 3)), (3,))
    with pytest.raises(ShapeMismatch):
        TagLogits(np.zeros((2, 3)), (0,))


@pytest.mark.parametrize("seed", range(100))
def test_tag_loss_gradient(seed):
    rng = np.random.default_rng(seed)
    T, v = int(rng.integers(1, 8)), int(rng.integers(2, 6))
    logits = rng.normal(scale=2.0, size=(T, v))
    targets = tuple(int(x) for x in rng.integers(0, v, size=T))
    _, grad = tag_classification_loss(TagLogits(logits, targets))
    numeric = finite_diff_gradient(lambda z: tag_classification_loss(TagLogits(z, targets))[0], logits)
    assert relative_error(grad, numeric) < 1e-4


def test_combined_all_ones():
    assert combined_loss(1.0, 1.0, 1.0, 1.0, 1.0) == pytest.approx(4.0, abs=1e-9)
    zero = LossWeights(0.0, 0.0, 0.0, 0.0, 0.0)
    assert combined_loss(1.0, 2.0, 3.0, 4.0, 5.0, zero) == 0.0
    base = LossWeights(contr_row=0.0, contr_col=0.0)
    assert combined_loss(0.7, 0.2, 0.1, 9.0, 9.0, base) == pytest.approx(1.0, abs=1e-12)


def test_breakdown_json():
    breakdown = combined_breakdown(1.0, 1.0, 1.0, 1.0, 1.0)
    obj = breakdown.to_json_obj()
    assert list(obj["components"]) == list(COMPONENTS)
    assert obj["weights"] == {"cls": 1.0, "ptr": 1.0, "ptr_empty": 1.0, "contr_row": 0.5, "contr_col": 0.5}
    assert obj["terms"]["contr_row"] == 0.5
    assert obj["total"] == 4.0


def test_combined_is_linear():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.uniform(0, 3, size=5), rng.uniform(0, 3, size=5)
        w = LossWeights.from_sequence(rng.uniform(0, 2, size=5))
        alpha, beta = rng.uniform(0, 2, size=2)
        lhs = combined_loss(*(alpha * a + beta * b), w)
        rhs = alpha * combined_loss(*a, w) + beta * combined_loss(*b, w)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        w1, w2 = (LossWeights.from_sequence(rng.uniform(0, 2, size=5)) for _ in range(2))
        summed = LossWeights.from_sequence(np.add(w1.as_tuple(), w2.as_tuple()))
        assert combined_loss(*a, summed) == pytest.approx(combined_loss(*a, w1) + combined_loss(*a, w2), rel=1e-12)


def test_combined_rejects_non_finite():
    with pytest.raises(NonFiniteComponent):
        combined_loss(1.0, float("nan"), 1.0, 1.0, 1.0)


def test_weights_validation():
    with pytest.raises(InvalidConfig):
        LossWeights(cls=-1.0)
    with pytest.raises(InvalidConfig):
        LossWeights.from_sequence([1.0, 1.0])


def test_finite_diff_examples():
    np.testing.assert_allclose(finite_diff_gradient(lambda x: float(x @ x), [1.0, 2.0]), [2.0, 4.0], atol=1e-6)
    assert not finite_diff_gradient(lambda x: 3.0, np.ones((2, 2))).any()
    with pytest.raises(NonFiniteEvaluation):
        finite_diff_gradient(lambda x: float(np.log(x[0])), [0.0])
    with pytest.raises(InvalidConfig):
        finite_diff_gradient(lambda x: 0.0, [1.0], h=0.0)


def test_relative_error():
    assert relative_error([0.0], [0.0]) == 0.0
    assert relative_error([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.sqrt(2.0))
