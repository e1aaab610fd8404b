"""数值稳定的基础函数（numpy 版 log_softmax / sigmoid / BCE）。"""
from typing import Tuple

import numpy as np


def logsumexp(x: np.ndarray, axis: int = -1, keepdims: bool = False) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    return x - logsumexp(x, axis=axis, keepdims=True)


def sigmoid(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """逐行 softmax 交叉熵的均值及其对 logits 的梯度（softmax - onehot，再除以行数）。"""
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    logp = log_softmax(logits, axis=1)
    rows = np.arange(n)
    loss = float(-np.mean(logp[rows, targets]))
    grad = np.exp(logp)
    grad[rows, targets] -= 1.0
    return loss, grad / n


def bce_with_logits(z: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """均值 BCE(σ(z), y) 及对 z 的梯度 (σ(z) - y) / n。"""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = z.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(z)
    # log(1+e^z) - y z
    per = np.logaddexp(0.0, z) - y * z
    return float(np.mean(per)), (sigmoid(z) - y) / n
