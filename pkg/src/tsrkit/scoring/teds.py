"""TEDS / TEDS-Struct：基于有序树编辑距离的表格相似度。

TEDS(pred, gt) = 1 - EditDist(pred, gt) / max(|pred|, |gt|)

|T| 统计所有元素节点（含根 table）；td 的文本是节点属性，不单独成节点。
编辑距离用 APTED（精确算法），节点代价见 CostModel。
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging

import Levenshtein
from apted import APTED, Config

from ..errors import BothEmpty, InvalidConfig, MalformedHtml
from ..parsers.html_table import HtmlTree, erase_content, html_from_string

logger = logging.getLogger(__name__)


def normalized_distance(a: str, b: str) -> float:
    """Levenshtein 距离除以较长串长度；两空串为 0。"""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return float(Levenshtein.distance(a, b)) / longest


@dataclass(frozen=True)
class CostModel:
    insert_cost: float = 1.0
    delete_cost: float = 1.0
    content_aware: bool = True

    def rename(self, a, b) -> float:
        if a.tag != b.tag or a.colspan != b.colspan or a.rowspan != b.rowspan:
            return 1.0
        if a.tag == "td" and self.content_aware:
            return normalized_distance(a.content or "", b.content or "")
        return 0.0


class _AptedNode(object):
    """APTED 用的可变节点（按身份比较），包装 HtmlNode。"""

    __slots__ = ("tag", "colspan", "rowspan", "content", "children")

    def __init__(self, node):
        self.tag = node.tag
        self.colspan = node.colspan
        self.rowspan = node.rowspan
        self.content = node.content
        self.children = [_AptedNode(ch) for ch in node.children]


class _AptedConfig(Config):
    def __init__(self, cost: CostModel):
        self.cost = cost

    def delete(self, node):
        return self.cost.delete_cost

    def insert(self, node):
        return self.cost.insert_cost

    def rename(self, node1, node2):
        return self.cost.rename(node1, node2)

    def children(self, node):
        return node.children


def tree_edit_distance(a: HtmlTree, b: HtmlTree, cost: Optional[CostModel] = None) -> float:
    cost = cost or CostModel()
    return float(APTED(_AptedNode(a), _AptedNode(b), _AptedConfig(cost)).compute_edit_distance())


def teds(pred: Optional[HtmlTree], gt: Optional[HtmlTree], cost: Optional[CostModel] = None) -> float:
    if pred is None and gt is None:
        raise BothEmpty("both trees are empty")
    if pred is None or gt is None:
        return 0.0
    n_nodes = max(pred.node_count(), gt.node_count())
    distance = tree_edit_distance(pred, gt, cost)
    return max(0.0, 1.0 - distance / n_nodes)


def teds_struct(pred: Optional[HtmlTree], gt: Optional[HtmlTree], cost: Optional[CostModel] = None) -> float:
    return teds(
        None if pred is None else erase_content(pred),
        None if gt is None else erase_content(gt),
        cost,
    )


class TedsScorer(object):
    """对 HTML 字符串打分；n_jobs>1 时按进程并行，输出顺序与输入一致。"""

    def __init__(self, structure_only: bool = False, n_jobs: int = 1):
        if isinstance(n_jobs, bool) or not isinstance(n_jobs, int) or n_jobs < 1:
            raise InvalidConfig(f"n_jobs must be an integer >= 1, got {n_jobs!r}")
        self.structure_only = structure_only
        self.n_jobs = n_jobs

    def _load(self, text: str) -> Optional[HtmlTree]:
        if not text:
            return None
        try:
            return html_from_string(text, with_content=not self.structure_only)
        except MalformedHtml as e:
            logger.warning("unparsable table html treated as empty: %s", e)
            return None

    def evaluate(self, pred: str, true: str) -> float:
        tree_pred = self._load(pred)
        tree_true = self._load(true)
        if self.structure_only:
            return teds_struct(tree_pred, tree_true)
        return teds(tree_pred, tree_true)

    def _evaluate_pair(self, pair: Tuple[str, str]) -> float:
        return self.evaluate(*pair)

    def batch_evaluate(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        if self.n_jobs == 1:
            return [self.evaluate(p, t) for p, t in pairs]
        with ProcessPoolExecutor(max_workers=self.n_jobs) as pool:
            return list(pool.map(self._evaluate_pair, pairs, chunksize=16))
