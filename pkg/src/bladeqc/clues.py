"""Turn model predictions into analyst-facing clues.

A clue is the minimum-area rotated rectangle around everything a predicted
instance marked as damage. The rectangle is computed over pixel corners,
not centers, so the drawn rectangle visually encloses the rendered mask.
Rectangles always live in the image's full-resolution frame; masks emitted
at the downsampled working resolution have their pixel corners scaled up
before the rectangle is fitted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from .exceptions import ValidationError
from .geometry import RotatedRect, convex_hull, min_area_rect
from .masks import RleMask

DEFAULT_SCORE_THRESHOLD = 0.5


class ClueStatus(str, enum.Enum):
    PROPOSED = "proposed"
    CONVERTED = "converted"
    MODIFIED = "modified"
    DISMISSED = "dismissed"


@dataclass(frozen=True)
class PredictionInstance:
    """One instance produced by the external segmentation model."""

    id: str
    image_id: str
    mask: RleMask
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"instance {self.id}: score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class Clue:
    """A suggested damage region awaiting analyst review."""

    id: str
    image_id: str
    rect: RotatedRect
    score: float
    source_instance: str
    status: ClueStatus = ClueStatus.PROPOSED

    def with_status(self, status: ClueStatus) -> "Clue":
        allowed = self.status is ClueStatus.PROPOSED and status is not ClueStatus.PROPOSED
        if not allowed:
            raise ValidationError(
                f"clue {self.id}: illegal status change {self.status.value} -> {status.value}"
            )
        return replace(self, status=status)

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "image_id": self.image_id,
            "corners": self.rect.to_flat(),
            "score": self.score,
            "source_instance": self.source_instance,
            "status": self.status.value,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "Clue":
        return cls(
            id=obj["id"],
            image_id=obj["image_id"],
            rect=RotatedRect.from_flat(obj["corners"]),
            score=float(obj["score"]),
            source_instance=obj["source_instance"],
            status=ClueStatus(obj["status"]),
        )


def _corner_scale(instance: PredictionInstance, images: Optional[Mapping]) -> tuple[float, float]:
    """Per-axis factor taking the mask's pixel lattice into the native frame.

    `images` maps image_id to any object exposing native_resolution and
    working_resolution; without it the mask is taken to be native already.
    """
    if images is None:
        return 1.0, 1.0
    record = images.get(instance.image_id)
    if record is None:
        raise ValidationError(f"instance {instance.id}: image {instance.image_id!r} is unknown")
    dims = (instance.mask.width, instance.mask.height)
    native = tuple(record.native_resolution)
    working = tuple(record.working_resolution)
    if dims == native:
        return 1.0, 1.0
    if dims == working:
        return native[0] / working[0], native[1] / working[1]
    raise ValidationError(
        f"instance {instance.id}: mask is {dims[0]}x{dims[1]} but image "
        f"{instance.image_id!r} declares native {native} / working {working}"
    )


def _instance_corners(instance: PredictionInstance, images: Optional[Mapping]) -> np.ndarray:
    pixels = instance.mask.foreground_pixels()
    if len(pixels) == 0:
        return pixels
    offs = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
    corners = np.unique((pixels[:, None, :] + offs[None, :, :]).reshape(-1, 2), axis=0)
    sx, sy = _corner_scale(instance, images)
    return corners * np.array([sx, sy], dtype=np.float64)


def generate_clues(
    instances: list[PredictionInstance],
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
    images: Optional[Mapping] = None,
) -> list[Clue]:
    """One clue per instance scoring at or above the threshold.

    The rectangle encloses the corners of every foreground pixel of the
    instance — all connected blobs of one instance share a single clue.
    Instances below threshold or with empty masks produce nothing. Output
    is ordered by descending score, ties broken by instance id, regardless
    of input order.
    """
    if not (0.0 <= score_threshold <= 1.0):
        raise ValidationError(f"score threshold {score_threshold} outside [0, 1]")
    clues = []
    for instance in sorted(instances, key=lambda i: (-i.score, i.id)):
        if instance.score < score_threshold:
            continue
        corners = _instance_corners(instance, images)
        if len(corners) == 0:
            continue
        rect = min_area_rect(convex_hull(corners))
        clues.append(
            Clue(
                id=f"clue:{instance.id}",
                image_id=instance.image_id,
                rect=rect,
                score=instance.score,
                source_instance=instance.id,
            )
        )
    return clues


def clue_containment_check(
    c: Clue,
    instance: PredictionInstance,
    images: Optional[Mapping] = None,
    tol: float = 1e-6,
) -> bool:
    """Integrity audit: every foreground pixel corner lies in the clue's rectangle."""
    if c.source_instance != instance.id or c.image_id != instance.image_id:
        raise ValidationError(
            f"clue {c.id} (instance {c.source_instance!r}) does not belong to "
            f"instance {instance.id!r}"
        )
    corners = _instance_corners(instance, images)
    if len(corners) == 0:
        raise ValidationError(f"instance {instance.id} has an empty mask; no clue should exist")
    return c.rect.contains_points(corners, tol=tol)
