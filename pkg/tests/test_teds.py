from functools import lru_cache
from typing import Tuple

import numpy as np
import pytest

from tsrkit.errors import BothEmpty, InvalidConfig
from tsrkit.parsers.html_table import HtmlNode, erase_content, grid_to_html, html_to_string
from tsrkit.scoring.teds import CostModel, TedsScorer, normalized_distance, teds, teds_struct, tree_edit_distance
from tsrkit.synth.corpus import CorpusConfig, generate_corpus

from conftest import grid_from_otsl

Forest = Tuple[HtmlNode, ...]


def _size(forest: Forest) -> int:
    return sum(t.node_count() for t in forest)


def brute_force_distance(a: HtmlNode, b: HtmlNode, cost: CostModel = CostModel()) -> float:
    """有序森林编辑距离的直接递归（取最右根：删除 / 插入 / 匹配三选一），不做任何剪枝。"""

    @lru_cache(maxsize=None)
    def fd(f: Forest, g: Forest) -> float:
        if not f and not g:
            return 0.0
        if not g:
            return cost.delete_cost * _size(f)
        if not f:
            return cost.insert_cost * _size(g)
        v, w = f[-1], g[-1]
        return min(
            fd(f[:-1] + v.children, g) + cost.delete_cost,
            fd(f, g[:-1] + w.children) + cost.insert_cost,
            fd(v.children, w.children) + fd(f[:-1], g[:-1]) + cost.rename(v, w),
        )

    return fd((a,), (b,))


def random_tree(rng: np.random.Generator, max_nodes: int) -> HtmlNode:
    budget = int(rng.integers(1, max_nodes + 1))
    texts = ("", "a", "ab", "abc", "abd", "xy")

    def build(n: int) -> HtmlNode:
        tag = ("table", "tr", "td")[int(rng.integers(3))]
        content = texts[int(rng.integers(len(texts)))] if tag == "td" else None
        children = []
        remaining = n - 1
        while remaining > 0:
            k = int(rng.integers(1, remaining + 1))
            children.append(build(k))
            remaining -= k
        return HtmlNode(tag, int(rng.integers(1, 3)), int(rng.integers(1, 3)), content, tuple(children))

    return build(budget)


def test_identical_trees(grid_2x2):
    tree = grid_to_html(grid_2x2)
    assert tree_edit_distance(tree, tree) == 0.0
    assert teds(tree, tree) == 1.0


def test_single_deletion():
    bare = HtmlNode("table")
    with_row = HtmlNode("table", children=(HtmlNode("tr"),))
    assert tree_edit_distance(with_row, bare) == 1.0
    assert teds(bare, with_row) == pytest.approx(0.5, abs=1e-12)


def test_content_rename_is_normalized_levenshtein():
    a, b = HtmlNode("td", content="abc"), HtmlNode("td", content="abd")
    assert tree_edit_distance(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert tree_edit_distance(a, b, CostModel(content_aware=False)) == 0.0
    assert normalized_distance("", "") == 0.0
    assert normalized_distance("kitten", "sitting") == pytest.approx(3.0 / 7.0)


def test_span_mismatch_costs_full_rename():
    assert CostModel().rename(HtmlNode("td", colspan=2), HtmlNode("td")) == 1.0


def test_struct_ignores_content():
    grid = grid_from_otsl("C C NL")
    a = grid_to_html(grid.with_contents(["x", "y"]), include_content=True)
    b = grid_to_html(grid.with_contents(["p", "q"]), include_content=True)
    assert teds(a, b) < 1.0
    assert teds_struct(a, b) == 1.0
    assert teds_struct(a, b) == teds(erase_content(a), erase_content(b))


def test_merged_cell_predicted_as_two_cells():
    gt = grid_to_html(grid_from_otsl("C L NL"))
    pred = grid_to_html(grid_from_otsl("C C NL"))
    value = teds_struct(pred, gt)
    assert value == pytest.approx(1.0 - brute_force_distance(pred, gt) / 4.0, abs=1e-12)
    # 改名一个 td（span 不同）+ 插入一个 td
    assert value == pytest.approx(0.5, abs=1e-12)


def test_empty_inputs():
    tree = grid_to_html(grid_from_otsl("C NL"))
    with pytest.raises(BothEmpty):
        teds(None, None)
    assert teds(None, tree) == 0.0
    assert teds(tree, None) == 0.0


def test_matches_brute_force_on_small_trees():
    rng = np.random.default_rng(8)
    for _ in range(500):
        a, b = random_tree(rng, 6), random_tree(rng, 6)
        expected = brute_force_distance(a, b)
        assert abs(tree_edit_distance(a, b) - expected) < 1e-12
        assert abs(tree_edit_distance(b, a) - expected) < 1e-12


def test_symmetry_and_range():
    rng = np.random.default_rng(9)
    for _ in range(200):
        a, b = random_tree(rng, 6), random_tree(rng, 6)
        value = teds(a, b)
        assert 0.0 <= value <= 1.0
        assert value == pytest.approx(teds(b, a), abs=1e-12)


def test_self_similarity_on_generated_tables(plain_corpus):
    for sample in plain_corpus:
        assert teds(sample.html_gt, sample.html_gt) == 1.0


@pytest.mark.slow
def test_self_similarity_on_thousand_generated_tables():
    config = CorpusConfig(seed=11, n_samples=1000)
    for sample in generate_corpus(config):
        tree = sample.html_gt
        assert teds(tree, tree) == 1.0
        assert teds_struct(tree, tree) == 1.0


def test_scorer_strings():
    gt = "<table><tr><td>a</td><td>b</td></tr></table>"
    scorer = TedsScorer()
    assert scorer.evaluate(gt, gt) == 1.0
    assert scorer.evaluate("", gt) == 0.0
    assert scorer.evaluate("<div>broken</div>", gt) == 0.0
    struct = TedsScorer(structure_only=True)
    assert struct.evaluate("<table><tr><td>x</td><td>y</td></tr></table>", gt) == 1.0


@pytest.mark.parametrize("n_jobs", [0, -1, 1.5, True])
def test_scorer_rejects_bad_n_jobs(n_jobs):
    with pytest.raises(InvalidConfig):
        TedsScorer(n_jobs=n_jobs)


def test_scorer_parallel_matches_serial(plain_corpus):
    pairs = [(html_to_string(a.html_gt), html_to_string(b.html_gt))
             for a, b in zip(plain_corpus[:12], plain_corpus[1:13])]
    serial = TedsScorer(n_jobs=1).batch_evaluate(pairs)
    assert TedsScorer(n_jobs=2).batch_evaluate(pairs) == serial
