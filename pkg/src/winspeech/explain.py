"""Shapley feature attributions for the trained classifier.

Feature removal is interventional: an "absent" feature is replaced by its
value in each background row and the model output is averaged over the
background. The explained quantity is the softmax probability of the
"win" class. `shap_exact` enumerates all coalitions (small d only);
`shap_kernel` is the sampling + weighted-least-squares estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .errors import DataError
from .model import ModelParams, predict_proba

MAX_EXACT_DIM = 16


@dataclass
class ShapResult:
    attributions: np.ndarray  # (n, d)
    base_value: float
    target: str = "p(win)"


def win_probability_fn(params: ModelParams):
    """Adapter turning ModelParams into a batch scalar-output function."""
    def fn(rows: np.ndarray) -> np.ndarray:
        return predict_proba(params, rows)[:, 1]
    return fn


def _coalition_values(model_fn, x: np.ndarray, background: np.ndarray,
                      masks: np.ndarray) -> np.ndarray:
    """v(S) for each 0/1 mask row: mean model output with absent features
    drawn from the background rows."""
    m, d = background.shape
    values = np.empty(masks.shape[0])
    chunk = max(1, 4096 // m)
    for lo in range(0, masks.shape[0], chunk):
        sub = masks[lo:lo + chunk]
        # (n_masks, m, d): x where mask is 1, background row elsewhere
        rows = np.where(sub[:, None, :].astype(bool), x[None, None, :],
                        background[None, :, :])
        out = model_fn(rows.reshape(-1, d))
        values[lo:lo + chunk] = out.reshape(sub.shape[0], m).mean(axis=1)
    return values


def shap_exact(model_fn, x: np.ndarray, background: np.ndarray) -> ShapResult:
    """Exact Shapley values by full coalition enumeration (d <= 16)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = x.size
    if d > MAX_EXACT_DIM:
        raise DataError(f"exact enumeration limited to d <= {MAX_EXACT_DIM}")

    all_masks = np.arange(2 ** d, dtype=np.int64)
    bits = ((all_masks[:, None] >> np.arange(d)) & 1).astype(np.int8)
    v = _coalition_values(model_fn, x, background, bits)
    popcount = bits.sum(axis=1)
    weight = np.array([factorial(s) * factorial(d - 1 - s) / factorial(d)
                       for s in range(d)])

    phi = np.zeros(d)
    for i in range(d):
        has_i = (all_masks >> i) & 1
        without = all_masks[has_i == 0]
        w = weight[popcount[without]]
        phi[i] = np.sum(w * (v[without | (1 << i)] - v[without]))
    return ShapResult(attributions=phi[None, :], base_value=float(v[0]))


def _kernel_masks(d: int, n_samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Coalition 0/1 rows and weights for the Shapley kernel.

    Subset sizes are consumed from the most-weighted outward (1 and d-1,
    then 2 and d-2, ...); a size is fully enumerated when the budget
    allows, otherwise it is sampled with the group weight split evenly.
    """
    size_weight = np.array([(d - 1) / (s * (d - s)) for s in range(1, d)])
    size_weight = size_weight / size_weight.sum()

    order = []
    for s in range(1, d // 2 + 1):
        order.append(s)
        if s != d - s:
            order.append(d - s)

    rows, weights = [], []
    budget = n_samples
    remaining = list(order)
    for s in order:
        count = comb(d, s)
        if count > budget:
            break
        for mask in _all_size_masks(d, s):
            rows.append(mask)
            weights.append(size_weight[s - 1] / count)
        budget -= count
        remaining.remove(s)

    if remaining and budget > 0:
        rem_weight = size_weight[[s - 1 for s in remaining]]
        rem_prob = rem_weight / rem_weight.sum()
        sizes = rng.choice(remaining, size=budget, p=rem_prob)
        # sampled masks share the residual group weight evenly; size
        # frequencies already follow the kernel distribution in expectation
        per_sample = float(rem_weight.sum()) / budget
        for s in sizes:
            mask = np.zeros(d, dtype=np.int8)
            mask[rng.choice(d, size=int(s), replace=False)] = 1
            rows.append(mask)
            weights.append(per_sample)
    return np.array(rows, dtype=np.int8), np.array(weights)


def _all_size_masks(d: int, s: int):
    from itertools import combinations
    for combo in combinations(range(d), s):
        mask = np.zeros(d, dtype=np.int8)
        mask[list(combo)] = 1
        yield mask


def shap_kernel(model_fn, x: np.ndarray, background: np.ndarray,
                n_samples: int = 2048, seed: int = 0) -> ShapResult:
    """Kernel SHAP with the additivity constraint solved exactly."""
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = x.size
    if n_samples < 2 * d + 2:
        raise DataError(f"n_samples must be >= {2 * d + 2} for d={d}")

    base = float(np.mean(model_fn(background)))
    f_x = float(model_fn(x[None, :])[0])
    if d == 1:
        return ShapResult(attributions=np.array([[f_x - base]]),
                          base_value=base)

    rng = np.random.default_rng(seed)
    masks, weights = _kernel_masks(d, n_samples, rng)
    v = _coalition_values(model_fn, x, background, masks)

    # eliminate phi_d via the additivity constraint sum(phi) = f_x - base
    g = f_x - base
    z = masks.astype(np.float64)
    design = z[:, :-1] - z[:, -1:]
    target = v - base - z[:, -1] * g
    sw = np.sqrt(weights)
    a = design * sw[:, None]
    b = target * sw
    solution, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < d - 1:
        raise DataError("singular kernel SHAP system "
                        "(degenerate background or too few coalitions)")
    phi = np.empty(d)
    phi[:-1] = solution
    phi[-1] = g - solution.sum()
    return ShapResult(attributions=phi[None, :], base_value=base)


def shap_summary(results: list[ShapResult], schema,
                 top_k: int | None = None) -> list[tuple[str, float]]:
    """Features ranked by mean absolute attribution, descending."""
    if not results:
        raise DataError("no SHAP results to summarize")
    stacked = np.vstack([r.attributions for r in results])
    if stacked.shape[1] != len(schema):
        raise DataError(
            f"attribution dim {stacked.shape[1]} != schema size {len(schema)}")
    mean_abs = np.abs(stacked).mean(axis=0)
    order = sorted(range(len(schema)), key=lambda i: (-mean_abs[i], i))
    if top_k is not None:
        order = order[:top_k]
    return [(schema[i], float(mean_abs[i])) for i in order]
