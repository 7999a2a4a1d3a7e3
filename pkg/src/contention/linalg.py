"""Dense numeric kernels: products, activations, stable losses, gradient checking.

Everything here operates on float64 numpy arrays. No public function emits
NaN or Inf for finite inputs within its documented range; the softmax and
binary cross-entropy use overflow-safe formulations so that logits of any
practical magnitude stay finite.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np

from contention.errors import NumericError, ShapeError
from contention.rng import RngStream


def as_matrix(values) -> np.ndarray:
    """Coerce to a 2-D float64 array; ShapeError for anything else."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit conformance checking."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def tanh_map(a) -> np.ndarray:
    """Elementwise hyperbolic tangent; output strictly inside (-1, 1)."""
    return np.tanh(np.asarray(a, dtype=np.float64))


def softmax(z) -> np.ndarray:
    """Normalized confidence scores for a logit vector.

    Uses max-subtraction so arbitrarily large logits cannot overflow. The
    result sums to 1 within 1e-12 and is invariant to adding a constant to
    every logit.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ShapeError(f"softmax expects a nonempty 1-D vector, got shape {z.shape}")
    e = np.exp(z - z.max())
    return e / e.sum()


def sigmoid(x):
    """Numerically stable logistic function, scalar or elementwise."""
    x = np.asarray(x, dtype=np.float64)
    t = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    return out if out.ndim else float(out)

def bce_from_logit(logit, target):
    """Binary cross-entropy evaluated directly on a logit.

    Stable log(1+exp(.)) form: max(x,0) - x*t + log1p(exp(-|x|)). Accepts
    scalars or same-shaped arrays and never overflows for finite logits.
    """
    x = np.asarray(logit, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    out = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def glorot_init(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    """Uniform(-a, a) weight block with a = sqrt(6 / (rows + cols)).

    Draws from the start of the given stream: pass a distinct substream per
    tensor or successive calls will repeat the same values.
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"weight block needs positive dims, got {rows}x{cols}")
    a = math.sqrt(6.0 / (rows + cols))
    return rng.generator().uniform(-a, a, size=(rows, cols))


def finite_diff_check(
    loss_fn: Callable[[np.ndarray], float],
    params: np.ndarray,
    analytic_grad: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Max relative error between an analytic gradient and central differences.

    For each parameter i the numeric slope (L(p_i+h) - L(p_i-h)) / 2h is
    compared with analytic_grad[i]; the relative error uses the guard
    denominator max(1e-8, |analytic| + |numeric|). loss_fn must be
    deterministic and smooth at the evaluation point.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    theta = np.asarray(params, dtype=np.float64).ravel()
    grad = np.asarray(analytic_grad, dtype=np.float64).ravel()
    if theta.shape != grad.shape:
        raise ShapeError(f"params shape {theta.shape} != gradient shape {grad.shape}")
    worst = 0.0
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + h
        up = float(loss_fn(bumped))
        bumped[i] = theta[i] - h
        down = float(loss_fn(bumped))
        if not (math.isfinite(up) and math.isfinite(down)):
            raise NumericError(f"non-finite loss while perturbing parameter {i}")
        numeric = (up - down) / (2.0 * h)
        denom = max(1e-8, abs(grad[i]) + abs(numeric))
        worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
