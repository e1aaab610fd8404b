"""标签分类损失、加权总损失，以及供梯度校验使用的中心差分。"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Sequence, Tuple
import logging
import math

import numpy as np

from ..errors import InvalidConfig, NonFiniteComponent, NonFiniteEvaluation, ShapeMismatch, TargetOutOfRange
from .functional import softmax_cross_entropy

logger = logging.getLogger(__name__)

COMPONENTS = ("cls", "ptr", "ptr_empty", "contr_row", "contr_col")
DEFAULT_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class TagLogits:
    logits: np.ndarray  # T x v
    targets: Tuple[int, ...]

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] != len(self.targets):
            raise ShapeMismatch(f"logits {logits.shape} do not match {len(self.targets)} targets")
        if any(not (0 <= t < logits.shape[1]) for t in self.targets):
            raise TargetOutOfRange(f"tag target outside vocabulary of size {logits.shape[1]}")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


def tag_classification_loss(tags: TagLogits) -> Tuple[float, np.ndarray]:
    """按序列位置平均的交叉熵。"""
    return softmax_cross_entropy(tags.logits, np.asarray(tags.targets, dtype=np.int64))


@dataclass(frozen=True)
class LossWeights:
    cls: float = 1.0
    ptr: float = 1.0
    ptr_empty: float = 1.0
    contr_row: float = 0.5
    contr_col: float = 0.5

    def __post_init__(self):
        for name in COMPONENTS:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidConfig(f"loss weight {name} must be finite and >= 0, got {value}")

    def as_tuple(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in COMPONENTS)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "LossWeights":
        if len(values) != len(COMPONENTS):
            raise InvalidConfig(f"expected {len(COMPONENTS)} weights, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class LossBreakdown:
    components: Dict[str, float]
    weights: LossWeights
    terms: Dict[str, float] = field(default_factory=dict)
    total: float = 0.0

    def to_json_obj(self) -> Dict[str, Any]:
        return {
            "components": dict(self.components),
            "weights": dict(zip(COMPONENTS, self.weights.as_tuple())),
            "terms": dict(self.terms),
            "total": self.total,
        }


def combined_breakdown(cls: float, ptr: float, ptr_empty: float, contr_row_mean: float, contr_col_mean: float,
                       w: LossWeights = LossWeights()) -> LossBreakdown:
    values = dict(zip(COMPONENTS, (cls, ptr, ptr_empty, contr_row_mean, contr_col_mean)))
    for name, value in values.items():
        if not math.isfinite(value):
            raise NonFiniteComponent(f"loss component {name} is {value}")
    terms = {name: getattr(w, name) * float(value) for name, value in values.items()}
    total = 0.0
    for name in COMPONENTS:
        total += terms[name]
    return LossBreakdown({k: float(v) for k, v in values.items()}, w, terms, total)


def combined_loss(cls: float, ptr: float, ptr_empty: float, contr_row_mean: float, contr_col_mean: float,
                  w: LossWeights = LossWeights()) -> float:
    """λ1·L_cls + λ2·L_ptr + λ3·L_ptr^empty + λ4·L_row + λ5·L_col。"""
    return combined_breakdown(cls, ptr, ptr_empty, contr_row_mean, contr_col_mean, w).total


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = DEFAULT_STEP) -> np.ndarray:
    """逐坐标中心差分 (f(x+h·e_i) - f(x-h·e_i)) / 2h；x 可以是任意形状的数组。"""
    if not h > 0:
        raise InvalidConfig(f"step must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        f_plus = float(f(x))
        flat[i] = saved - h
        f_minus = float(f(x))
        flat[i] = saved
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NonFiniteEvaluation(f"f is not finite around coordinate {i}")
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """‖a - n‖ / max(‖a‖, ‖n‖)；两者都为 0 时返回 0。"""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n)) / scale
