"""Box regression and classification costs, with a finite-difference checker."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import BBox

NUM_CLASSES = 10


class EmptyLossWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BoxPair:
    pred: BBox
    truth: BBox

    def deltas(self) -> np.ndarray:
        """truth - pred for (x, y, w, h)."""
        return np.array(self.truth.as_list()) - np.array(self.pred.as_list())


@dataclass(frozen=True)
class ClassDistribution:
    probs: tuple[float, ...]
    truth: int  # 1-based class id

    def __post_init__(self) -> None:
        if len(self.probs) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} class probabilities, got {len(self.probs)}")
        if not 1 <= self.truth <= NUM_CLASSES:
            raise ValueError(f"class id {self.truth} outside 1..{NUM_CLASSES}")
        if sum(self.probs) > 1 + 1e-6:
            raise ValueError("class probabilities sum above 1")

    def one_hot(self) -> np.ndarray:
        y = np.zeros(NUM_CLASSES)
        y[self.truth - 1] = 1.0
        return y


def smooth_l1(delta: float) -> float:
    ad = abs(delta)
    if ad < 1.0:
        return 0.5 * delta * delta
    return ad - 0.5


def smooth_l1_grad(delta: np.ndarray) -> np.ndarray:
    """d smooth_l1 / d delta."""
    delta = np.asarray(delta, dtype=np.float64)
    return np.where(np.abs(delta) < 1.0, delta, np.sign(delta))


def _smooth_l1_array(delta: np.ndarray) -> np.ndarray:
    ad = np.abs(delta)
    return np.where(ad < 1.0, 0.5 * delta * delta, ad - 0.5)


def bbox_loss(pairs: Sequence[BoxPair]) -> float:
    if not pairs:
        warnings.warn("bbox_loss called with no box pairs", EmptyLossWarning, stacklevel=2)
        return 0.0
    deltas = np.stack([p.deltas() for p in pairs])
    return float(_smooth_l1_array(deltas).sum())


def cls_loss(dists: Sequence[ClassDistribution]) -> float:
    total = 0.0
    for d in dists:
        p = d.probs[d.truth - 1]
        if p <= 0.0:
            raise ValueError(f"probability of true class {d.truth} is {p}; log undefined")
        total -= math.log(p)
    return total


def total_loss(pairs: Sequence[BoxPair], dists: Sequence[ClassDistribution]) -> float:
    return bbox_loss(pairs) + cls_loss(dists)


# --- flat-parameter forms used for gradient checking ---------------------------


def bbox_loss_flat(pred: np.ndarray, truth: np.ndarray) -> float:
    """bbox loss with predictions as an (N, 4) array."""
    return float(_smooth_l1_array(np.asarray(truth) - np.asarray(pred)).sum())


def bbox_loss_grad(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Gradient of :func:`bbox_loss_flat` with respect to the predictions."""
    return -smooth_l1_grad(np.asarray(truth) - np.asarray(pred))


def cls_loss_flat(probs: np.ndarray, onehot: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    picked = probs[onehot > 0]
    if (picked <= 0).any():
        raise ValueError("probability of a true class is not positive")
    return float(-(onehot[onehot > 0] * np.log(picked)).sum())


def cls_loss_grad(probs: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    grad = np.zeros_like(probs)
    hot = onehot > 0
    grad[hot] = -onehot[hot] / probs[hot]
    return grad


def gradient_check(
    loss_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray],
    params: np.ndarray,
    h: float = 1e-4,
    exclude: np.ndarray | None = None,
    floor: float = 1e-8,
) -> float:
    """Max relative error between ``grad_fn`` and central differences of ``loss_fn``.

    ``exclude`` is a boolean mask of parameters to skip (e.g. those sitting
    near a kink of a piecewise loss).
    """
    x = np.array(params, dtype=np.float64)
    analytic = np.asarray(grad_fn(x), dtype=np.float64)
    skip = np.zeros(x.shape, dtype=bool) if exclude is None else np.asarray(exclude, dtype=bool)
    worst = 0.0
    for idx in np.ndindex(x.shape):
        if skip[idx]:
            continue
        orig = x[idx]
        x[idx] = orig + h
        f_plus = loss_fn(x)
        x[idx] = orig - h
        f_minus = loss_fn(x)
        x[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * h)
        denom = max(abs(numeric), abs(analytic[idx]), floor)
        worst = max(worst, abs(numeric - analytic[idx]) / denom)
    return worst


def check_bbox_gradient(pred: np.ndarray, truth: np.ndarray, h: float = 1e-4, kink_margin: float = 1e-2) -> float:
    """Gradient check of the box loss, skipping deltas within ``kink_margin`` of |delta| = 1."""
    truth = np.asarray(truth, dtype=np.float64)
    near_kink = np.abs(np.abs(truth - pred) - 1.0) < kink_margin
    return gradient_check(
        lambda p: bbox_loss_flat(p, truth),
        lambda p: bbox_loss_grad(p, truth),
        pred,
        h=h,
        exclude=near_kink,
    )


def check_cls_gradient(probs: np.ndarray, onehot: np.ndarray, h: float = 1e-4) -> float:
    onehot = np.asarray(onehot, dtype=np.float64)
    return gradient_check(
        lambda p: cls_loss_flat(p, onehot),
        lambda p: cls_loss_grad(p, onehot),
        probs,
        h=h,
    )


def random_gradient_check(seed: int, n_points: int = 100, n_boxes: int = 4, h: float = 1e-4,
                          kink_margin: float = 1e-2) -> dict[str, float]:
    """Run both checks on ``n_points`` random parameter sets; return the max errors."""
    rng = np.random.default_rng(seed)
    worst_bbox = 0.0
    worst_cls = 0.0
    for _ in range(n_points):
        truth = rng.uniform(0.0, 100.0, size=(n_boxes, 4))
        pred = truth + rng.uniform(-3.0, 3.0, size=(n_boxes, 4))
        worst_bbox = max(worst_bbox, check_bbox_gradient(pred, truth, h=h, kink_margin=kink_margin))

        probs = rng.dirichlet(np.ones(NUM_CLASSES), size=n_boxes)
        labels = rng.integers(0, NUM_CLASSES, size=n_boxes)
        # keep the true-class probability well above the step size
        probs[np.arange(n_boxes), labels] = np.maximum(probs[np.arange(n_boxes), labels], 0.05)
        onehot = np.zeros_like(probs)
        onehot[np.arange(n_boxes), labels] = 1.0
        worst_cls = max(worst_cls, check_cls_gradient(probs, onehot, h=h))
    return {"bbox_loss": worst_bbox, "cls_loss": worst_cls}
