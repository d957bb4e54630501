"""Central finite-difference checks for the autodiff engine and the full model."""

from __future__ import annotations

import numpy as np

from .model import Hyperparams, ResGCN
from .synthetic import random_graph


def numerical_gradient(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar function ``f()`` w.r.t. ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        fp = f()
        arr[idx] = old - h
        fm = f()
        arr[idx] = old
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / (||a|| + ||n||)``, or 0 when both are zero.

    Measured per tensor rather than per entry: near-zero entries otherwise
    compare finite-difference roundoff (about eps * |f| / h) against itself.
    """
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return float(np.linalg.norm(analytic - numeric) / denom) if denom > 0 else 0.0


def check_model_gradients(n=20, d=8, m=60, seed=0, h=1e-5, hp: Hyperparams | None = None):
    """Compare backward() with finite differences on a random graph.

    Returns ``{parameter name: max relative error}``.
    """
    rng = np.random.default_rng(seed)
    g = random_graph(n, m, d, rng)
    hp = hp or Hyperparams(alpha=0.6, lam=0.3, gamma=0.5, seed=seed)
    model = ResGCN(g, hp)
    model.forward()
    grads = model.backward()
    named = model.params.named()

    def f():
        return model.forward(record=False).L

    return {name: relative_error(grads[name], numerical_gradient(f, w, h)) for name, w in named.items()}
