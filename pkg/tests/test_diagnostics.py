import math

import pytest

from tsrkit.pointer.diagnostics import all_ones_breakdown, loss_report
from tsrkit.pointer.losses import COMPONENTS, LossWeights

GRADIENT_KEYS = {"cls", "ptr", "ptr_empty", "contr_row", "contr_col", "filter"}


def test_all_ones_total():
    breakdown = all_ones_breakdown()
    assert breakdown.total == pytest.approx(4.0, abs=1e-9)
    assert all_ones_breakdown(LossWeights(contr_row=0.0, contr_col=0.0)).total == pytest.approx(3.0)


@pytest.mark.parametrize("index", range(6))
def test_report_gradients_agree(plain_corpus, index):
    report = loss_report(plain_corpus[index], seed=index)
    assert GRADIENT_KEYS - {"filter"} <= set(report.gradient_errors) <= GRADIENT_KEYS
    assert report.max_gradient_error < 1e-4
    assert all(math.isfinite(v) for v in report.breakdown.components.values())


def test_report_on_watermarked_sample(watermark_corpus):
    sample = next(s for s in watermark_corpus if s.n_distractors)
    report = loss_report(sample, seed=1)
    assert report.max_gradient_error < 1e-4


def test_report_is_deterministic(plain_corpus):
    a = loss_report(plain_corpus[0], seed=3, check_gradients=False)
    b = loss_report(plain_corpus[0], seed=3, check_gradients=False)
    assert a.breakdown.total == b.breakdown.total
    assert a.gradient_errors == {}
    assert loss_report(plain_corpus[0], seed=4, check_gradients=False).breakdown.total != a.breakdown.total


def test_report_json(plain_corpus):
    sample = next(s for s in plain_corpus if len(s.annotations))
    obj = loss_report(sample, seed=0).to_json_obj()
    assert obj["index"] == sample.index
    assert list(obj["components"]) == list(COMPONENTS)
    assert set(obj["gradient_rel_errors"]) == GRADIENT_KEYS
    assert obj["max_gradient_rel_error"] == max(obj["gradient_rel_errors"].values())
