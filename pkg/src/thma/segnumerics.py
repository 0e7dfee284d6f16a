"""Forward-only reference kernels: sequence-reduction attention, Mix-FFN, MAE masking.

Single-head, single-block, float64 throughout; these exist as a verified
numerical surface, not as a trainable network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import IndivisibleSequence, ShapeMismatch


def _as_tokens(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ShapeMismatch(f"token matrix must be (N, C) with N, C >= 1, got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("token matrix must be finite")
    return x


@dataclass(frozen=True)
class AttentionParams:
    w_query: np.ndarray   # (C, d_head)
    w_key: np.ndarray     # (C, d_head)
    w_value: np.ndarray   # (C, d_head)
    w_reduce: np.ndarray  # (gamma*C, C)
    b_reduce: np.ndarray  # (C,)
    gamma: int

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be a positive integer")
        c, d = self.w_query.shape
        if self.w_key.shape != (c, d) or self.w_value.shape != (c, d):
            raise ShapeMismatch("q/k/v projections must share shape (C, d_head)")
        if self.w_reduce.shape != (self.gamma * c, c) or self.b_reduce.shape != (c,):
            raise ShapeMismatch("reduction map must be (gamma*C, C) with a (C,) bias")

    @property
    def d_head(self) -> int:
        return self.w_query.shape[1]

    @classmethod
    def identity_reduction(cls, w_query, w_key, w_value) -> "AttentionParams":
        """gamma = 1 with an identity reduction map; matches textbook attention."""
        c = w_query.shape[0]
        return cls(w_query, w_key, w_value, np.eye(c), np.zeros(c), gamma=1)


@dataclass(frozen=True)
class FfnParams:
    w1: np.ndarray         # (C, H)
    b1: np.ndarray         # (H,)
    dw_kernel: np.ndarray  # (H, 3, 3) one 3x3 tap set per hidden channel
    dw_bias: np.ndarray    # (H,)
    w2: np.ndarray         # (H, C)
    b2: np.ndarray         # (C,)

    def __post_init__(self):
        c, h = self.w1.shape
        if self.dw_kernel.shape != (h, 3, 3):
            raise ShapeMismatch("depthwise kernel must be (H, 3, 3)")
        if self.b1.shape != (h,) or self.dw_bias.shape != (h,):
            raise ShapeMismatch("hidden biases must be (H,)")
        if self.w2.shape != (h, c) or self.b2.shape != (c,):
            raise ShapeMismatch("output projection must be (H, C) with a (C,) bias")

    @classmethod
    def zeros(cls, c: int, h: int) -> "FfnParams":
        return cls(np.zeros((c, h)), np.zeros(h), np.zeros((h, 3, 3)), np.zeros(h),
                   np.zeros((h, c)), np.zeros(c))


def reduce_tokens(k: np.ndarray, gamma: int, w_reduce: np.ndarray,
                  b_reduce: np.ndarray | None = None) -> np.ndarray:
    """Compress N x C tokens to (N/gamma) x C.

    Row-major grouping: gamma consecutive tokens are concatenated into one
    gamma*C row, then mapped back to C channels by the linear reduction.
    """
    k = _as_tokens(k)
    n, c = k.shape
    if n % gamma != 0:
        raise IndivisibleSequence(f"N={n} not divisible by gamma={gamma}")
    if w_reduce.shape != (gamma * c, c):
        raise ShapeMismatch(f"w_reduce must be ({gamma * c}, {c}), got {w_reduce.shape}")
    grouped = k.reshape(n // gamma, gamma * c)
    out = grouped @ w_reduce
    if b_reduce is not None:
        out = out + b_reduce
    return out


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Numerically stable row softmax; every row sums to 1."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def sr_attention(x: np.ndarray, p: AttentionParams) -> np.ndarray:
    """Scaled dot-product attention with sequence-reduced keys and values.

    Q is projected from all N tokens; K and V from the gamma-reduced tokens.
    Output shape is N x d_head.
    """
    x = _as_tokens(x)
    if x.shape[1] != p.w_query.shape[0]:
        raise ShapeMismatch(f"x has C={x.shape[1]}, params expect C={p.w_query.shape[0]}")
    q = x @ p.w_query
    reduced = reduce_tokens(x, p.gamma, p.w_reduce, p.b_reduce)
    k = reduced @ p.w_key
    v = reduced @ p.w_value
    scores = (q @ k.T) / math.sqrt(p.d_head)
    return softmax_rows(scores) @ v


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def depthwise_conv3x3(grid: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Per-channel 3x3 convolution with zero padding; grid is (h, w, H)."""
    h, w, ch = grid.shape
    if kernel.shape != (ch, 3, 3):
        raise ShapeMismatch("kernel must be (H, 3, 3)")
    padded = np.zeros((h + 2, w + 2, ch))
    padded[1:-1, 1:-1, :] = grid
    out = np.zeros_like(grid)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + h, dx:dx + w, :] * kernel[:, dy, dx]
    return out + bias


def mix_ffn(x: np.ndarray, shape: tuple[int, int], p: FfnParams) -> np.ndarray:
    """Feed-forward with an embedded 3x3 depthwise convolution and residual skip.

    y = W2(GELU(DWConv(W1 x + b1) + b_dw)) + b2 + x, with tokens laid out on
    the (h, w) grid row-major for the convolution.
    """
    x = _as_tokens(x)
    h, w = shape
    n, c = x.shape
    if h * w != n:
        raise ShapeMismatch(f"h*w = {h * w} but N = {n}")
    if p.w1.shape[0] != c:
        raise ShapeMismatch(f"x has C={c}, params expect C={p.w1.shape[0]}")
    hidden = x @ p.w1 + p.b1
    grid = hidden.reshape(h, w, -1)
    conv = depthwise_conv3x3(grid, p.dw_kernel, p.dw_bias)
    act = gelu(conv.reshape(n, -1))
    return act @ p.w2 + p.b2 + x


def mae_mask(num_patches: int, mask_ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random (visible, masked) index partition; deterministic per seed.

    The masked count is round-half-up of mask_ratio * num_patches; both index
    arrays come back sorted.
    """
    if num_patches < 1:
        raise ValueError("num_patches must be >= 1")
    if not 0.0 <= mask_ratio < 1.0:
        raise ValueError("mask_ratio must be in [0, 1)")
    n_masked = int(math.floor(mask_ratio * num_patches + 0.5))
    perm = np.random.default_rng(seed).permutation(num_patches)
    masked = np.sort(perm[:n_masked])
    visible = np.sort(perm[n_masked:])
    return visible, masked
