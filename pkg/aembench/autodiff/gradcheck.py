"""Finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from aembench.autodiff.tensor import Tensor


def numerical_gradient(f: Callable[[], float], arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar `f` w.r.t. `arr`, perturbed in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise error, scaled by magnitude (absolute near zero)."""
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    h: float = 1e-5,
) -> Dict[str, float]:
    """Compare backward-pass gradients against central differences.

    Returns the per-parameter relative error.
    """
    loss = loss_fn()
    loss.backward()
    analytic = {k: p.grad.copy() for k, p in params.items()}
    errors = {}
    for k, p in params.items():
        numeric = numerical_gradient(lambda: loss_fn().item(), p.data, h)
        errors[k] = relative_error(analytic[k], numeric)
    return errors
