"""Center-point heatmap machinery: Gaussian target splatting, the penalty-
reduced focal loss, and 3x3 max-pool peak extraction.

Heatmaps are (H, W, C) float arrays in [0, 1]; pixel coordinates are (x, y)
with x indexing the width axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOWNSAMPLE = 4          # heatmap stride R relative to the input image
DEFAULT_TAU = 1e-2      # confidence threshold at inference on synthetic data
PRED_CLAMP = 1e-7       # keeps log terms finite in the focal loss


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    class_id: int
    score: float


def gaussian_sigma(w: float, h: float, downsample: int = DOWNSAMPLE) -> float:
    """Splat radius from the projected object size, clamped to >= 1 heatmap px."""
    if w <= 0 or h <= 0:
        raise ValueError("box dimensions must be positive")
    return max(1.0, min(w, h) / (6.0 * downsample))


def make_targets(
    centers: list[tuple[tuple[float, float], int, float]],
    shape: tuple[int, int, int],
) -> np.ndarray:
    """Splat Gaussian peaks into per-class channels, merged by element-wise max.

    `centers` holds ((x, y), class_id, sigma) triples; `shape` is (H, W, C).
    """
    hh, ww, cc = shape
    target = np.zeros(shape)
    ys, xs = np.mgrid[0:hh, 0:ww]
    for (px, py), cls, sigma in centers:
        if not (0 <= px < ww and 0 <= py < hh):
            raise ValueError(f"center ({px}, {py}) outside {ww}x{hh} heatmap")
        blob = np.exp(-((xs - px) ** 2 + (ys - py) ** 2) / (2.0 * sigma**2))
        target[:, :, cls] = np.maximum(target[:, :, cls], blob)
    return target


def focal_loss(
    pred: np.ndarray,
    target: np.ndarray,
    n_objects: int,
    alpha: float = 2.0,
    beta: float = 4.0,
) -> float:
    """Penalty-reduced focal loss over all pixels and classes.

    The positive branch applies only where the target is exactly 1; elsewhere
    the negative branch is down-weighted by (1 - Y)^beta. Normalized by the
    number of ground-truth objects.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    p = np.clip(pred, PRED_CLAMP, 1.0 - PRED_CLAMP)
    pos = target == 1.0
    pos_term = (1.0 - p) ** alpha * np.log(p)
    neg_term = (1.0 - target) ** beta * p**alpha * np.log(1.0 - p)
    return float(-(pos_term[pos].sum() + neg_term[~pos].sum()) / n_objects)


def focal_loss_grad(
    pred: np.ndarray,
    target: np.ndarray,
    n_objects: int,
    alpha: float = 2.0,
    beta: float = 4.0,
) -> np.ndarray:
    """d(focal_loss)/d(pred), zero where the prediction is clamped."""
    p = np.clip(pred, PRED_CLAMP, 1.0 - PRED_CLAMP)
    pos = target == 1.0
    d_pos = -alpha * (1.0 - p) ** (alpha - 1) * np.log(p) + (1.0 - p) ** alpha / p
    d_neg = (1.0 - target) ** beta * (
        alpha * p ** (alpha - 1) * np.log(1.0 - p) - p**alpha / (1.0 - p)
    )
    grad = np.where(pos, d_pos, d_neg) / (-n_objects)
    grad[(pred <= PRED_CLAMP) | (pred >= 1.0 - PRED_CLAMP)] = 0.0
    return grad


def extract_peaks(pred: np.ndarray, tau: float = DEFAULT_TAU) -> list[Detection]:
    """Local maxima of each class channel under a border-clamped 3x3 window.

    A pixel is a detection iff its value equals its 3x3 neighborhood maximum
    and is >= tau; equal-valued ties within a neighborhood keep only the
    lexicographically smallest (y, x).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    hh, ww, cc = pred.shape
    detections: list[Detection] = []
    for c in range(cc):
        chan = pred[:, :, c]
        padded = np.pad(chan, 1, mode="edge")
        neigh = np.max(
            [padded[dy:dy + hh, dx:dx + ww] for dy in range(3) for dx in range(3)],
            axis=0,
        )
        candidates = np.argwhere((chan == neigh) & (chan >= tau))
        kept: list[tuple[int, int]] = []
        for y, x in candidates:  # argwhere yields lexicographic (y, x) order
            if any(abs(y - ky) <= 1 and abs(x - kx) <= 1 and chan[ky, kx] == chan[y, x]
                   for ky, kx in kept):
                continue
            kept.append((int(y), int(x)))
            detections.append(Detection(int(x), int(y), c, float(chan[y, x])))
    return detections
