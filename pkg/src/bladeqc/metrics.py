"""Damage-level detection metrics.

A ground truth counts as detected when its IoU with the union of one or
many predictions clears a threshold; pixel-level scores are deliberately
not computed. The union is grown greedily — seed with the single best
prediction, keep adding whichever candidate raises the union IoU most,
stop at the first non-improvement — which is deterministic and O(k^2) per
ground truth. An exhaustive small-case oracle exists alongside for
verification.

Precision counts a prediction as a true positive when it contributes to
any matched ground truth; one prediction may serve several ground truths.
The denominator is every ingested prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import ValidationError
from .geometry import Polygon, _raster_window, aabb
from .masks import RleMask

DEFAULT_IOU_THRESHOLD = 0.3

Shape = Union[RleMask, Polygon]


@dataclass(frozen=True)
class EvalPrediction:
    id: str
    shape: Shape
    score: float

    @classmethod
    def from_wire(cls, obj: dict) -> "EvalPrediction":
        if "mask" in obj and obj["mask"] is not None:
            shape: Shape = RleMask.from_wire(obj["mask"])
        elif "polygon" in obj and obj["polygon"] is not None:
            shape = Polygon.from_flat(obj["polygon"])
        else:
            raise ValidationError(f"prediction {obj.get('id')!r} carries neither mask nor polygon")
        return cls(id=str(obj["id"]), shape=shape, score=float(obj.get("score", 1.0)))


@dataclass(frozen=True)
class EvalImage:
    """One image's ground truths and predictions, ready for matching."""

    image_id: str
    frame: tuple[int, int]
    ground_truths: tuple[Polygon, ...]
    predictions: tuple[EvalPrediction, ...]

    def __post_init__(self):
        w, h = self.frame
        if w < 1 or h < 1:
            raise ValidationError(f"image {self.image_id}: bad frame {self.frame}")
        object.__setattr__(self, "frame", (int(w), int(h)))
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))
        object.__setattr__(self, "predictions", tuple(self.predictions))
        for g in self.ground_truths:
            _check_shape_in_frame(g, self.frame, self.image_id)
        for p in self.predictions:
            _check_shape_in_frame(p.shape, self.frame, self.image_id)

    @classmethod
    def from_wire(cls, obj: dict) -> "EvalImage":
        return cls(
            image_id=str(obj["image_id"]),
            frame=tuple(obj["frame"]),
            ground_truths=tuple(Polygon.from_flat(g) for g in obj.get("ground_truths", [])),
            predictions=tuple(EvalPrediction.from_wire(p) for p in obj.get("predictions", [])),
        )


def _check_shape_in_frame(shape: Shape, frame: tuple[int, int], image_id: str):
    w, h = frame
    if isinstance(shape, RleMask):
        if (shape.width, shape.height) != (w, h):
            raise ValidationError(
                f"image {image_id}: mask {shape.width}x{shape.height} does not match frame {w}x{h}"
            )
        return
    box = aabb(shape)
    if box.x_min < 0 or box.y_min < 0 or box.x_max > w or box.y_max > h:
        raise ValidationError(f"image {image_id}: polygon exceeds the {w}x{h} frame")


@dataclass(frozen=True)
class GroundTruthMatch:
    index: int
    matched: bool
    union_iou: float
    contributors: tuple[str, ...]


@dataclass(frozen=True)
class MatchResult:
    image_id: str
    iou_threshold: float
    ground_truths: tuple[GroundTruthMatch, ...]
    prediction_tp: dict[str, bool]

    def to_wire(self) -> dict:
        return {
            "image_id": self.image_id,
            "iou_threshold": self.iou_threshold,
            "ground_truths": [
                {
                    "index": g.index,
                    "matched": g.matched,
                    "union_iou": g.union_iou,
                    "contributors": list(g.contributors),
                }
                for g in self.ground_truths
            ],
            "prediction_tp": dict(self.prediction_tp),
        }


@dataclass(frozen=True)
class MetricsReport:
    iou_threshold: float
    n_images: int
    n_ground_truths: int
    n_predictions: int
    tp_ground_truths: int
    tp_predictions: int
    damage_recall: Optional[float]
    damage_precision: Optional[float]

    NOTES = {
        "prediction_reuse": "a prediction may contribute to several ground truths",
        "precision_denominator": "all ingested predictions",
    }

    def to_wire(self) -> dict:
        return {
            "iou_threshold": self.iou_threshold,
            "n_images": self.n_images,
            "n_ground_truths": self.n_ground_truths,
            "n_predictions": self.n_predictions,
            "tp_ground_truths": self.tp_ground_truths,
            "tp_predictions": self.tp_predictions,
            "damage_recall": self.damage_recall,
            "damage_precision": self.damage_precision,
            "notes": dict(self.NOTES),
        }

    def format_text(self) -> str:
        recall = "n/a" if self.damage_recall is None else f"{100 * self.damage_recall:.2f}%"
        precision = "n/a" if self.damage_precision is None else f"{100 * self.damage_precision:.2f}%"
        lines = [
            f"iou_threshold      {self.iou_threshold:g}",
            f"images             {self.n_images}",
            f"ground truths      {self.n_ground_truths}  (matched: {self.tp_ground_truths})",
            f"predictions        {self.n_predictions}  (true positive: {self.tp_predictions})",
            f"damage recall      {recall}",
            f"damage precision   {precision}",
        ]
        return "\n".join(lines)


class _Region:
    """Foreground pixel set of a shape, stored as a windowed boolean grid."""

    __slots__ = ("x0", "y0", "arr", "count")

    def __init__(self, x0: int, y0: int, arr: np.ndarray):
        self.x0 = x0
        self.y0 = y0
        self.arr = arr
        self.count = int(arr.sum())


def _region_of(shape: Shape, frame: tuple[int, int]) -> _Region:
    w, h = frame
    if isinstance(shape, Polygon):
        x0, y0, arr = _raster_window(shape.coords, w, h)
        return _Region(x0, y0, arr)
    pixels = shape.foreground_pixels()
    if len(pixels) == 0:
        return _Region(0, 0, np.zeros((0, 0), dtype=bool))
    x0, y0 = pixels.min(axis=0)
    x1, y1 = pixels.max(axis=0)
    arr = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
    arr[pixels[:, 1] - y0, pixels[:, 0] - x0] = True
    return _Region(int(x0), int(y0), arr)


def _window_of(regions: list[_Region]) -> tuple[int, int, int, int]:
    xs0 = [r.x0 for r in regions if r.count]
    ys0 = [r.y0 for r in regions if r.count]
    xs1 = [r.x0 + r.arr.shape[1] for r in regions if r.count]
    ys1 = [r.y0 + r.arr.shape[0] for r in regions if r.count]
    if not xs0:
        return 0, 0, 0, 0
    return min(xs0), min(ys0), max(xs1), max(ys1)


def _place(region: _Region, window: tuple[int, int, int, int]) -> np.ndarray:
    x0, y0, x1, y1 = window
    out = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    if region.count:
        oy = region.y0 - y0
        ox = region.x0 - x0
        out[oy : oy + region.arr.shape[0], ox : ox + region.arr.shape[1]] = region.arr
    return out


def _intersection_count(a: _Region, b: _Region) -> int:
    if a.count == 0 or b.count == 0:
        return 0
    x_lo = max(a.x0, b.x0)
    y_lo = max(a.y0, b.y0)
    x_hi = min(a.x0 + a.arr.shape[1], b.x0 + b.arr.shape[1])
    y_hi = min(a.y0 + a.arr.shape[0], b.y0 + b.arr.shape[0])
    if x_lo >= x_hi or y_lo >= y_hi:
        return 0
    sa = a.arr[y_lo - a.y0 : y_hi - a.y0, x_lo - a.x0 : x_hi - a.x0]
    sb = b.arr[y_lo - b.y0 : y_hi - b.y0, x_lo - b.x0 : x_hi - b.x0]
    return int((sa & sb).sum())


def _union_iou_arrays(g: np.ndarray, g_count: int, union: np.ndarray) -> float:
    inter = int((g & union).sum())
    u_count = int(union.sum())
    denom = g_count + u_count - inter
    if denom == 0:
        return 0.0
    return inter / denom


def _greedy_profile(
    g_region: _Region, pred_regions: list[_Region]
) -> tuple[float, list[int]]:
    """Greedy union growth for one ground truth.

    Only predictions whose pixels intersect the ground truth are candidates.
    Returns the final union IoU and the selected prediction indices.
    """
    candidates = [
        i for i, r in enumerate(pred_regions) if _intersection_count(g_region, r) > 0
    ]
    if not candidates or g_region.count == 0:
        return 0.0, []
    window = _window_of([g_region] + [pred_regions[i] for i in candidates])
    g_arr = _place(g_region, window)
    placed = {i: _place(pred_regions[i], window) for i in candidates}

    best_i = -1
    best_iou = -1.0
    for i in candidates:
        v = _union_iou_arrays(g_arr, g_region.count, placed[i])
        if v > best_iou:
            best_iou, best_i = v, i
    selected = [best_i]
    union = placed[best_i].copy()
    current = best_iou
    remaining = [i for i in candidates if i != best_i]
    while remaining:
        gain_i = -1
        gain_iou = current
        for i in remaining:
            v = _union_iou_arrays(g_arr, g_region.count, union | placed[i])
            if v > gain_iou:
                gain_iou, gain_i = v, i
        if gain_i < 0:
            break
        union |= placed[gain_i]
        selected.append(gain_i)
        current = gain_iou
        remaining.remove(gain_i)
    return current, sorted(selected)


def _image_profiles(img: EvalImage) -> list[tuple[float, list[int]]]:
    """Threshold-independent match profile: (union_iou, contributor indices) per GT."""
    pred_regions = [_region_of(p.shape, img.frame) for p in img.predictions]
    return [
        _greedy_profile(_region_of(g, img.frame), pred_regions)
        for g in img.ground_truths
    ]


def _result_from_profiles(
    img: EvalImage, profiles: list[tuple[float, list[int]]], iou_threshold: float
) -> MatchResult:
    gts = []
    tp_ids: set[str] = set()
    for idx, (union_iou, sel) in enumerate(profiles):
        matched = union_iou >= iou_threshold
        contributors = tuple(img.predictions[i].id for i in sel) if union_iou > 0 else ()
        gts.append(GroundTruthMatch(idx, matched, union_iou, contributors))
        if matched:
            tp_ids.update(contributors)
    prediction_tp = {p.id: p.id in tp_ids for p in img.predictions}
    return MatchResult(img.image_id, iou_threshold, tuple(gts), prediction_tp)


def _check_threshold(iou_threshold: float):
    if not (0.0 < iou_threshold <= 1.0):
        raise ValidationError(f"IoU threshold {iou_threshold} outside (0, 1]")


def match_image(img: EvalImage, iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> MatchResult:
    """Match one image's ground truths against its predictions."""
    _check_threshold(iou_threshold)
    return _result_from_profiles(img, _image_profiles(img), iou_threshold)


def _aggregate(results: list[MatchResult], images: list[EvalImage], iou_threshold: float) -> MetricsReport:
    n_gt = sum(len(r.ground_truths) for r in results)
    n_pred = sum(len(img.predictions) for img in images)
    tp_gt = sum(1 for r in results for g in r.ground_truths if g.matched)
    tp_pred = sum(1 for r in results for tp in r.prediction_tp.values() if tp)
    return MetricsReport(
        iou_threshold=iou_threshold,
        n_images=len(images),
        n_ground_truths=n_gt,
        n_predictions=n_pred,
        tp_ground_truths=tp_gt,
        tp_predictions=tp_pred,
        damage_recall=(tp_gt / n_gt) if n_gt else None,
        damage_precision=(tp_pred / n_pred) if n_pred else None,
    )


def evaluate_dataset(
    images: list[EvalImage], iou_threshold: float = DEFAULT_IOU_THRESHOLD
) -> MetricsReport:
    """Micro-aggregated damage recall/precision: counts summed before division."""
    _check_threshold(iou_threshold)
    if not images:
        raise ValidationError("evaluate_dataset needs at least one image")
    results = [match_image(img, iou_threshold) for img in images]
    return _aggregate(results, list(images), iou_threshold)


def threshold_sweep(
    images: list[EvalImage], thresholds: list[float]
) -> list[tuple[float, MetricsReport]]:
    """One report per threshold; match profiles are computed once per image."""
    if not images:
        raise ValidationError("threshold_sweep needs at least one image")
    if not thresholds:
        raise ValidationError("threshold_sweep needs at least one threshold")
    for a, b in zip(thresholds, thresholds[1:]):
        if not a < b:
            raise ValidationError(f"thresholds must be strictly increasing, got {thresholds}")
    for t in thresholds:
        _check_threshold(t)
    profiles = [(img, _image_profiles(img)) for img in images]
    out = []
    for t in thresholds:
        results = [_result_from_profiles(img, prof, t) for img, prof in profiles]
        out.append((t, _aggregate(results, list(images), t)))
    return out


def best_subset_oracle(
    g: Polygon, candidates: list[EvalPrediction], frame: tuple[int, int]
) -> tuple[tuple[int, ...], float]:
    """Exhaustively find the prediction subset maximizing union IoU with g.

    Test oracle for the greedy rule; capped at 12 candidates. Candidates
    whose pixels never touch g only dilute the union and cannot raise the
    optimum, so enumeration runs over the touching ones; the maximum is
    still the true maximum over all subsets. Returns the selected candidate
    indices (positions in the input list) and the best union IoU; on ties
    the first subset in exclusion-first enumeration order wins, so smaller
    subsets are preferred.
    """
    if len(candidates) > 12:
        raise ValidationError(f"oracle is exhaustive; {len(candidates)} candidates exceed 12")
    g_region = _region_of(g, frame)
    regions = [_region_of(c.shape, frame) for c in candidates]
    touching = [i for i, r in enumerate(regions) if _intersection_count(g_region, r) > 0]
    if not touching:
        return (), 0.0
    window = _window_of([g_region] + [regions[i] for i in touching])
    g_arr = _place(g_region, window)
    placed = {i: _place(regions[i], window) for i in touching}

    best_iou = 0.0
    best_subset: tuple[int, ...] = ()

    def recurse(k: int, union: np.ndarray, chosen: tuple[int, ...]):
        nonlocal best_iou, best_subset
        if k == len(touching):
            v = _union_iou_arrays(g_arr, g_region.count, union)
            if v > best_iou:
                best_iou, best_subset = v, chosen
            return
        i = touching[k]
        recurse(k + 1, union, chosen)
        recurse(k + 1, union | placed[i], chosen + (i,))

    recurse(0, np.zeros_like(g_arr), ())
    return best_subset, best_iou
