"""Fold-accuracy scoring: color segmentation, mask IoU, and alignment.

A trial is scored by segmenting a top-down image into a binary cloth
mask (or taking a rendered mask directly), translating the result mask
within a bounded search window to best overlap the goal mask, and
reporting the aligned intersection-over-union.  Completion time comes
from the demonstration log's first session_start and last fold_complete
events.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (DimensionMismatch, EmptyImage, NoFoldCompleted,
                     SchemaError)
from .mask import Mask, translate

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .session import DemonstrationLog

DEFAULT_ALIGN_RADIUS = 20  # pixels, ~4% of a 256-px frame


@dataclass(frozen=True)
class HsvRange:
    """Inclusive HSV box; the hue interval may wrap past 360 degrees."""

    hue: tuple[float, float] = (0.0, 360.0)
    saturation: tuple[float, float] = (0.0, 1.0)
    value: tuple[float, float] = (0.0, 1.0)

    def validate(self) -> None:
        h0, h1 = self.hue
        if not (0.0 <= h0 <= 360.0 and 0.0 <= h1 <= 360.0):
            raise ValueError("hue bounds must lie in [0, 360]")
        for name in ("saturation", "value"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} bounds must satisfy 0 <= lo <= hi <= 1")

    def contains(self, h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Boolean array of which HSV triples fall inside the range."""
        h0, h1 = self.hue
        if h0 <= h1:
            in_h = (h >= h0) & (h <= h1)
        else:  # wraparound, e.g. (350, 10) covers 350..360 and 0..10
            in_h = (h >= h0) | (h <= h1)
        s0, s1 = self.saturation
        v0, v1 = self.value
        return in_h & (s >= s0) & (s <= s1) & (v >= v0) & (v <= v1)


@dataclass(frozen=True)
class TrialScore:
    """Aligned IoU of one trial, with the offset that produced it."""

    iou: float
    offset: tuple[int, int]
    completion_time: float | None = None


def rgb_to_hsv(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert an (h, w, 3) uint8 RGB image to H (degrees), S, V arrays."""
    rgb = image.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    lo = rgb.min(axis=-1)
    delta = v - lo
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    h = np.zeros_like(v)
    nz = delta > 0
    rmax = nz & (v == r)
    gmax = nz & (v == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    d = np.where(nz, delta, 1.0)
    h[rmax] = (60.0 * ((g - b) / d))[rmax] % 360.0
    h[gmax] = (60.0 * ((b - r) / d) + 120.0)[gmax]
    h[bmax] = (60.0 * ((r - g) / d) + 240.0)[bmax]
    return h, s, v


def segment_hsv(image: np.ndarray, hsv_range: HsvRange) -> Mask:
    """Binary mask of the pixels whose HSV triple lies in ``hsv_range``."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise EmptyImage("expected a non-empty (h, w, 3) RGB image")
    hsv_range.validate()
    h, s, v = rgb_to_hsv(image)
    return Mask(hsv_range.contains(h, s, v))


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    if not a.same_shape(b):
        raise DimensionMismatch(
            f"mask shapes differ: {a.height}x{a.width} vs {b.height}x{b.width}")
    union = int((a.bits | b.bits).sum())
    if union == 0:
        return 1.0
    inter = int((a.bits & b.bits).sum())
    return inter / union


def align(a: Mask, b: Mask, radius: int) -> tuple[tuple[int, int], float]:
    """Translate ``b`` within ``radius`` pixels to best overlap ``a``.

    Returns ``((dx, dy), aligned_iou)`` where applying ``translate(b, dx,
    dy)`` maximizes IoU against ``a``.  Ties go to the smallest offset
    norm, then lexicographically by (dx, dy).  Comparisons are exact:
    candidates are ranked by integer cross-multiplication of the
    intersection/union counts, never by floating-point ratios.
    """
    if not a.same_shape(b):
        raise DimensionMismatch(
            f"mask shapes differ: {a.height}x{a.width} vs {b.height}x{b.width}")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    a_bits = a.bits
    best = (0, 0)
    best_inter, best_union = 0, 0  # 0/0 ranks below any real candidate
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            shifted = translate(b, dx, dy).bits
            inter = int((a_bits & shifted).sum())
            union = int((a_bits | shifted).sum())
            if union == 0:
                inter, union = 1, 1  # empty vs empty counts as perfect
            better = inter * best_union > best_inter * union
            if not better and inter * best_union == best_inter * union and best_union > 0:
                old_n = best[0] * best[0] + best[1] * best[1]
                new_n = dx * dx + dy * dy
                better = new_n < old_n or (new_n == old_n and (dx, dy) < best)
            if better or best_union == 0:
                best = (dx, dy)
                best_inter, best_union = inter, union
    return best, best_inter / best_union


def score_trial(result: Mask, goal: Mask, radius: int = DEFAULT_ALIGN_RADIUS,
                completion_time_s: float | None = None) -> TrialScore:
    """Align ``result`` onto ``goal`` and report the aligned IoU."""
    offset, value = align(goal, result, radius)
    return TrialScore(iou=value, offset=offset, completion_time=completion_time_s)


def completion_time(log: "DemonstrationLog") -> float:
    """Seconds from session_start to the last fold_complete in ``log``."""
    start_ms = None
    end_ms = None
    for event in log.events:
        if event.event == "session_start" and start_ms is None:
            start_ms = event.t_ms
        elif event.event == "fold_complete":
            end_ms = event.t_ms
    if start_ms is None:
        raise SchemaError("log has no session_start event")
    if end_ms is None:
        raise NoFoldCompleted("log has no fold_complete event")
    return (end_ms - start_ms) / 1000.0
