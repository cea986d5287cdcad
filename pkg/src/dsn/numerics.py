"""Small dense-numerics toolkit: stable sigmoid, row normalization, Xavier
initialization, seeded RNG construction, and an Adam optimizer with a
hyperbolic learning-rate decay.

Everything works on plain float64 numpy arrays and keeps numpy's fixed
reduction order, so repeated runs produce bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Keep sigmoid outputs strictly inside (0, 1) even where float64 saturates.
_SIG_LO = np.finfo(np.float64).tiny
_SIG_HI = 1.0 - np.finfo(np.float64).epsneg


def seeded_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the same seed yields the same stream on all platforms."""
    return np.random.default_rng(seed)


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic 1/(1+exp(-x)), clamped to stay inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        pos = 1.0 / (1.0 + np.exp(-x))
        ex = np.exp(x)
        neg = ex / (1.0 + ex)
    return np.clip(np.where(x >= 0, pos, neg), _SIG_LO, _SIG_HI)


def l2_normalize_rows(m) -> np.ndarray:
    """Scale every row of a 2-d array to unit Euclidean norm."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot L2-normalize a zero row")
    return m / norms[:, None]


def xavier_init(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Glorot-uniform matrix: entries uniform on +-sqrt(6/(rows+cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class Adam:
    """Adam state for one parameter array.

    The effective learning rate at epoch e is lr0 / (1 + decay * e); moments
    use the standard bias correction, so a fresh state with zero gradient
    leaves parameters untouched.
    """

    lr0: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def step(self, params, grads, epoch: int = 0) -> np.ndarray:
        """One update; returns the new parameter array."""
        params = np.asarray(params, dtype=np.float64)
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != params.shape:
            raise ValueError(
                f"gradient shape {grads.shape} does not match parameter shape {params.shape}"
            )
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.shape != params.shape:
            raise ValueError(
                f"optimizer state shape {self.m.shape} does not match parameters {params.shape}"
            )
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        lr = self.lr0 / (1.0 + self.decay * epoch)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)
