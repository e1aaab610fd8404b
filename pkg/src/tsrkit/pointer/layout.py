"""解码器隐状态的切分、线性投影，以及框序列的排布（特殊框前缀 + 填充 + 掩码）。

特征矩阵一律是二维 float64 的 numpy 数组（行 = 序列位置，列 = 特征维 d）。
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union
import logging

import numpy as np

from ..errors import InvalidConfig, ShapeMismatch, TooManyBoxes

logger = logging.getLogger(__name__)

SPECIAL_SLOT = 0


@dataclass(frozen=True)
class Temperature:
    tau: float = 0.1

    def __post_init__(self):
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise InvalidConfig(f"temperature must be positive, got {self.tau}")


TauLike = Union[Temperature, float]


def resolve_tau(tau: TauLike) -> float:
    return tau.tau if isinstance(tau, Temperature) else Temperature(float(tau)).tau


def as_features(x, name: str = "features") -> np.ndarray:
    """转换并校验特征矩阵：二维、d>0、元素有限。"""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] == 0:
        raise ShapeMismatch(f"{name} has zero feature dimension")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    weights: np.ndarray  # d_out x d_in
    bias: np.ndarray  # d_out

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or b.shape[0] != w.shape[0]:
            raise ShapeMismatch(f"projection weights {w.shape} and bias {b.shape} do not conform")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ShapeMismatch("projection contains non-finite entries")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def identity(cls, d: int) -> "ProjectionMatrix":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def random(cls, rng: np.random.Generator, d_in: int, d_out: Optional[int] = None, scale: float = 1.0) -> "ProjectionMatrix":
        d_out = d_out or d_in
        return cls(rng.normal(scale=scale / np.sqrt(d_in), size=(d_out, d_in)), rng.normal(scale=0.1, size=d_out))


def project(x, p: ProjectionMatrix) -> np.ndarray:
    """逐行仿射变换 x·Wᵀ + bias。"""
    x = as_features(x, "x")
    if x.shape[1] != p.d_in:
        raise ShapeMismatch(f"feature dim {x.shape[1]} does not match projection input {p.d_in}")
    return x @ p.weights.T + p.bias


def project_backward(x, p: ProjectionMatrix, grad_out) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """project 的反向：返回 (dL/dx, dL/dW, dL/dbias)。"""
    x = as_features(x, "x")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != (x.shape[0], p.d_out):
        raise ShapeMismatch(f"gradient shape {g.shape} does not match output {(x.shape[0], p.d_out)}")
    return g @ p.weights, g.T @ x, g.sum(axis=0)


@dataclass(frozen=True)
class SequenceLayout:
    """长度为 B 的框序列：0 号槽位为特殊框，其后 n_real_boxes 个真实框，余下为填充。"""
    box_slots: int
    n_real_boxes: int
    n_tags: int = 0

    @property
    def n_pad(self) -> int:
        return self.box_slots - 1 - self.n_real_boxes

    @property
    def total_len(self) -> int:
        return self.box_slots + self.n_tags

    @property
    def special_slot(self) -> int:
        return SPECIAL_SLOT

    @property
    def real_slots(self) -> range:
        return range(1, 1 + self.n_real_boxes)

    @property
    def attention_mask(self) -> np.ndarray:
        mask = np.zeros(self.box_slots, dtype=bool)
        mask[: 1 + self.n_real_boxes] = True
        return mask


def build_sequence_layout(n_real_boxes: int, box_slots: int, n_tags: int = 0) -> SequenceLayout:
    if n_real_boxes < 0 or box_slots < 1:
        raise ShapeMismatch(f"bad layout request ({n_real_boxes}, {box_slots})")
    if n_real_boxes + 1 > box_slots:
        raise TooManyBoxes(f"{n_real_boxes} boxes plus the special slot exceed B={box_slots}")
    return SequenceLayout(box_slots, n_real_boxes, n_tags)


def split_hidden(h, layout: SequenceLayout, n_tags: int) -> Tuple[np.ndarray, np.ndarray]:
    """h 的前 B 行是框特征 b，后 T 行是标签特征 t。"""
    h = as_features(h, "h")
    if h.shape[0] != layout.box_slots + n_tags:
        raise ShapeMismatch(f"h has {h.shape[0]} rows, expected B+T = {layout.box_slots}+{n_tags}")
    return h[: layout.box_slots], h[layout.box_slots:]


@dataclass(frozen=True, eq=False)
class PointerFeatures:
    """解码器末层隐状态 h（B+T 行）及框、标签两路投影。"""
    h: np.ndarray
    proj_b: ProjectionMatrix
    proj_t: ProjectionMatrix

    def __post_init__(self):
        object.__setattr__(self, "h", as_features(self.h, "h"))
        if self.proj_b.d_in != self.h.shape[1] or self.proj_t.d_in != self.h.shape[1]:
            raise ShapeMismatch(f"projections do not accept feature dim {self.h.shape[1]}")
        if self.proj_b.d_out != self.proj_t.d_out:
            raise ShapeMismatch("box and tag projections disagree on output dim")

    @property
    def dim(self) -> int:
        return self.h.shape[1]

    @classmethod
    def with_identity(cls, h) -> "PointerFeatures":
        h = as_features(h, "h")
        return cls(h, ProjectionMatrix.identity(h.shape[1]), ProjectionMatrix.identity(h.shape[1]))
