"""Data model, ingestion, coordinate transforms and event-sourced persistence.

Everything that happens to a job — ingestion, prediction upload, clue
review, QC stage changes — is an appended journal event, and the store
state is a pure fold over those events. The production analytics are facts
about who did what when; a mutable-row store would have to reconstruct
timing data it never kept.

All persisted geometry lives in the native full-resolution frame; the
downsampled working frame exists only as a linear transform. Converted
clue rectangles are kept bit-exact even when a rotated rectangle's corner
juts marginally outside the frame, so conversions round-trip identically.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from .clues import Clue, ClueStatus, PredictionInstance, generate_clues
from .exceptions import ConflictError, NotFoundError, ValidationError
from .geometry import Polygon, rasterize
from .journal import EventRecord, Journal, journal_filename, read_journal_file
from .masks import RleMask, rle_encode
from .workflow import (
    DEFAULT_CONTROL_RATIO,
    Action,
    Arm,
    ImageWorkflow,
    Stage,
    apply_event,
    assign_arm,
    check_transition,
)

DEFAULT_NATIVE_RESOLUTION = (5456, 3632)
DEFAULT_WORKING_RESOLUTION = (1500, 998)

JOB_INGESTED = "job_ingested"

_STAGE_ORDER = {
    Stage.INGESTED: 0,
    Stage.PREDICTED: 1,
    Stage.QC1_OPEN: 2,
    Stage.QC1_DONE: 3,
    Stage.QC2_OPEN: 4,
    Stage.QC2_DONE: 5,
}


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    job_id: str
    file_ref: str
    native_resolution: tuple[int, int] = DEFAULT_NATIVE_RESOLUTION
    working_resolution: tuple[int, int] = DEFAULT_WORKING_RESOLUTION
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "native_resolution", tuple(int(v) for v in self.native_resolution))
        object.__setattr__(self, "working_resolution", tuple(int(v) for v in self.working_resolution))
        for name, (w, h) in (
            ("native", self.native_resolution),
            ("working", self.working_resolution),
        ):
            if w <= 0 or h <= 0:
                raise ValidationError(
                    f"image {self.image_id}: {name} resolution {w}x{h} must be positive"
                )
        nat_ar = self.native_resolution[0] / self.native_resolution[1]
        work_ar = self.working_resolution[0] / self.working_resolution[1]
        if abs(nat_ar - work_ar) > 0.01 * nat_ar:
            raise ValidationError(
                f"image {self.image_id}: native and working aspect ratios differ by more than 1%"
            )

    def to_wire(self) -> dict:
        return {
            "image_id": self.image_id,
            "job_id": self.job_id,
            "file_ref": self.file_ref,
            "native_resolution": list(self.native_resolution),
            "working_resolution": list(self.working_resolution),
            "metadata": dict(self.metadata),
        }


@dataclass(frozen=True)
class InspectionJob:
    job_id: str
    turbine_id: str
    arm: Arm
    image_ids: tuple[str, ...]
    created_at: int

    def to_wire(self) -> dict:
        return {
            "job_id": self.job_id,
            "turbine_id": self.turbine_id,
            "arm": self.arm.value,
            "image_ids": list(self.image_ids),
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class Provenance:
    kind: str  # manual | clue_converted | clue_modified
    clue_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("manual", "clue_converted", "clue_modified"):
            raise ValidationError(f"unknown provenance kind {self.kind!r}")
        if (self.kind == "manual") != (self.clue_id is None):
            raise ValidationError("clue provenance needs a clue_id; manual must not carry one")

    @property
    def from_clue(self) -> bool:
        return self.kind != "manual"

    def to_wire(self) -> dict:
        out = {"kind": self.kind}
        if self.clue_id is not None:
            out["clue_id"] = self.clue_id
        return out

    @classmethod
    def from_wire(cls, obj: dict) -> "Provenance":
        return cls(kind=obj["kind"], clue_id=obj.get("clue_id"))


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    image_id: str
    polygon: Polygon
    provenance: Provenance
    author: str
    stage: str  # qc1 | qc2
    created_at: int
    damage_label: Optional[str] = None  # always human-assigned, never by the model

    def to_wire(self) -> dict:
        return {
            "id": self.annotation_id,
            "image_id": self.image_id,
            "polygon": self.polygon.to_flat(),
            "provenance": self.provenance.to_wire(),
            "damage_label": self.damage_label,
            "author": self.author,
            "stage": self.stage,
            "created_at": self.created_at,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "Annotation":
        return cls(
            annotation_id=obj["id"],
            image_id=obj["image_id"],
            polygon=Polygon.from_flat(obj["polygon"]),
            provenance=Provenance.from_wire(obj["provenance"]),
            damage_label=obj.get("damage_label"),
            author=obj["author"],
            stage=obj["stage"],
            created_at=int(obj["created_at"]),
        )


@dataclass(frozen=True)
class DatasetSplit:
    assignment: dict  # image_id -> train | val | test
    seed: int
    ratios: tuple[float, float, float]


SPLIT_NAMES = ("train", "val", "test")


def split_dataset(image_ids, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then largest-remainder cut into train/val/test.

    Deterministic for a given (ids, seed); each split size differs from the
    exact ratio share by less than one.
    """
    ids = list(image_ids)
    if not ids:
        raise ValidationError("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate image ids in split input")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLIT_NAMES):
        raise ValidationError(f"need {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValidationError("split ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios must sum to 1, got {sum(ratios)}")

    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    exact = [r * n for r in ratios]
    counts = [math.floor(e) for e in exact]
    remainder = n - sum(counts)
    by_fraction = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in by_fraction[:remainder]:
        counts[i] += 1

    assignment = {}
    cursor = 0
    for name, count in zip(SPLIT_NAMES, counts):
        for image_id in ids[cursor : cursor + count]:
            assignment[image_id] = name
        cursor += count
    return DatasetSplit(assignment=assignment, seed=seed, ratios=ratios)


def _check_point_in_frame(x: float, y: float, frame: tuple[int, int], label: str):
    w, h = frame
    if not (0 <= x <= w and 0 <= y <= h):
        raise ValidationError(f"point ({x}, {y}) outside the {label} frame {w}x{h}")


def to_native(point, img: ImageRecord):
    """Map a working-frame point to the native frame (independent axis scales)."""
    from .geometry import Point2

    _check_point_in_frame(point.x, point.y, img.working_resolution, "working")
    sx = img.native_resolution[0] / img.working_resolution[0]
    sy = img.native_resolution[1] / img.working_resolution[1]
    return Point2(point.x * sx, point.y * sy)


def to_working(point, img: ImageRecord):
    """Inverse of to_native; round trips stay within half a pixel."""
    from .geometry import Point2

    _check_point_in_frame(point.x, point.y, img.native_resolution, "native")
    sx = img.working_resolution[0] / img.native_resolution[0]
    sy = img.working_resolution[1] / img.native_resolution[1]
    return Point2(point.x * sx, point.y * sy)


def _canonical_manifest(manifest: dict) -> dict:
    try:
        job_id = str(manifest["job_id"])
        turbine_id = str(manifest["turbine_id"])
        raw_images = manifest["images"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"manifest needs job_id, turbine_id and images: {exc}") from exc
    if not isinstance(raw_images, list) or not raw_images:
        raise ValidationError("manifest needs a non-empty images list")
    images = []
    for entry in raw_images:
        try:
            images.append(
                {
                    "image_id": str(entry["image_id"]),
                    "file_ref": str(entry["file_ref"]),
                    "native_resolution": [
                        int(v) for v in entry.get("native_resolution", DEFAULT_NATIVE_RESOLUTION)
                    ],
                    "working_resolution": [
                        int(v) for v in entry.get("working_resolution", DEFAULT_WORKING_RESOLUTION)
                    ],
                    "metadata": dict(entry.get("metadata", {})),
                }
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed manifest image entry {entry!r}") from exc
    ids = [img["image_id"] for img in images]
    if len(set(ids)) != len(ids):
        raise ValidationError("manifest lists duplicate image ids")
    return {"job_id": job_id, "turbine_id": turbine_id, "images": images}


class InspectionStore:
    """Journal-backed state for jobs, images, predictions, clues and annotations.

    Mutations validate against current state, append exactly one event to
    the owning job's journal, then fold that event into state. Replaying
    the journals from an empty store rebuilds the same state byte for byte.
    """

    def __init__(
        self,
        data_dir: Optional[str | Path] = None,
        *,
        control_ratio: float = DEFAULT_CONTROL_RATIO,
        salt: str = "",
        clock: Optional[Callable[[], int]] = None,
    ):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        self.control_ratio = control_ratio
        self.salt = salt
        self.clock = clock or (lambda: int(time.time() * 1000))

        self.jobs: dict[str, InspectionJob] = {}
        self.images: dict[str, ImageRecord] = {}
        self.workflows: dict[str, ImageWorkflow] = {}
        self.predictions: dict[str, list[PredictionInstance]] = {}
        self.prediction_frames: dict[str, dict[str, str]] = {}
        self.clues: dict[str, dict[str, Clue]] = {}
        self.annotations: dict[str, dict[str, Annotation]] = {}
        self.approved: dict[str, list[str]] = {}
        self.misses: dict[str, int] = {}
        self.image_events: dict[str, list[EventRecord]] = {}
        self.journals: dict[str, Journal] = {}
        self._manifests: dict[str, str] = {}

    # ---------------------------------------------------------------- journal

    def _journal(self, job_id: str) -> Journal:
        journal = self.journals.get(job_id)
        if journal is None:
            path = None
            if self.data_dir is not None:
                path = self.data_dir / journal_filename(job_id)
            journal = Journal(job_id, path=path)
            self.journals[job_id] = journal
        return journal

    def append_event(self, record: EventRecord, expected_seq: Optional[int] = None) -> int:
        """Validate, append and fold one event; returns its sequence number."""
        self._validate(record)
        seq = self._journal(record.job_id).append(record, expected_seq=expected_seq)
        self._apply(record)
        return seq

    def _emit(
        self,
        job_id: str,
        action: str,
        payload: dict,
        actor: str,
        timestamp: Optional[int] = None,
    ) -> EventRecord:
        journal = self._journal(job_id)
        record = EventRecord(
            seq=journal.last_seq + 1,
            job_id=job_id,
            timestamp=int(timestamp) if timestamp is not None else self.clock(),
            actor=actor,
            action=action,
            payload=payload,
        )
        journal.append(record)
        self._apply(record)
        return record

    # ---------------------------------------------------------------- ingest

    def ingest_job(self, manifest: dict, actor: str = "system", timestamp: Optional[int] = None) -> InspectionJob:
        """Register a job and its images; assigns the A/B arm at creation.

        Idempotent: re-ingesting a byte-identical manifest is a no-op; the
        same job_id with different content is a conflict.
        """
        canonical = _canonical_manifest(manifest)
        job_id = canonical["job_id"]
        fingerprint = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
        if job_id in self.jobs:
            if self._manifests.get(job_id) == fingerprint:
                return self.jobs[job_id]
            raise ConflictError(f"job {job_id} already ingested with different content")
        for entry in canonical["images"]:
            # raises on bad resolutions before any event is written
            ImageRecord(
                image_id=entry["image_id"],
                job_id=job_id,
                file_ref=entry["file_ref"],
                native_resolution=tuple(entry["native_resolution"]),
                working_resolution=tuple(entry["working_resolution"]),
                metadata=entry["metadata"],
            )
            if entry["image_id"] in self.images:
                raise ConflictError(f"image {entry['image_id']} already belongs to another job")
        arm = assign_arm(job_id, self.control_ratio, self.salt)
        payload = {
            "manifest": canonical,
            "arm": arm.value,
            "control_ratio": self.control_ratio,
            "salt": self.salt,
        }
        self._emit(job_id, JOB_INGESTED, payload, actor, timestamp)
        return self.jobs[job_id]

    def ingest_predictions(
        self,
        prediction_file: dict | list,
        score_threshold: float = 0.5,
        actor: str = "model-adapter",
        timestamp: Optional[int] = None,
        job_id: Optional[str] = None,
    ) -> list[Clue]:
        """Store model output for one or more images and derive clues.

        Masks may arrive at native or working resolution (or as polygons in
        either frame); the received frame is recorded per instance. Clues
        are generated for treatment-arm images only — control-arm analysts
        never see them. When job_id is given, every image must belong to it.
        """
        records = prediction_file if isinstance(prediction_file, list) else [prediction_file]
        out: list[Clue] = []
        for entry in records:
            out.extend(self._ingest_predictions_one(entry, score_threshold, actor, timestamp, job_id))
        return out

    def _ingest_predictions_one(self, entry, score_threshold, actor, timestamp, job_id=None) -> list[Clue]:
        try:
            image_id = str(entry["image_id"])
            raw_instances = list(entry.get("instances", []))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed prediction file entry: {exc}") from exc
        image = self.image(image_id)
        if job_id is not None and image.job_id != job_id:
            raise ValidationError(f"image {image_id} belongs to job {image.job_id}, not {job_id}")
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], Action.PREDICTIONS_INGESTED, job.arm)

        instances = []
        frames = {}
        for raw in raw_instances:
            instance, frame = self._parse_instance(raw, image)
            instances.append(instance)
            frames[instance.id] = frame
        if len({i.id for i in instances}) != len(instances):
            raise ValidationError(f"image {image_id}: duplicate prediction instance ids")

        clue_list = []
        if job.arm is Arm.TREATMENT:
            clue_list = generate_clues(instances, score_threshold, images={image_id: image})
        payload = {
            "image_id": image_id,
            "score_threshold": score_threshold,
            "instances": [
                {
                    "id": i.id,
                    "score": i.score,
                    "mask": i.mask.to_wire(),
                    "frame": frames[i.id],
                }
                for i in instances
            ],
            "clues": [c.to_wire() for c in clue_list],
        }
        self._emit(job.job_id, Action.PREDICTIONS_INGESTED.value, payload, actor, timestamp)
        return clue_list

    def _parse_instance(self, raw: dict, image: ImageRecord) -> tuple[PredictionInstance, str]:
        try:
            instance_id = str(raw["id"])
            score = float(raw["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed prediction instance {raw!r}") from exc
        frame = raw.get("frame", "native")
        if frame not in ("native", "working"):
            raise ValidationError(f"instance {instance_id}: unknown frame {frame!r}")
        resolution = image.native_resolution if frame == "native" else image.working_resolution
        if raw.get("mask") is not None:
            mask = RleMask.from_wire(raw["mask"])
            if (mask.width, mask.height) != resolution:
                raise ValidationError(
                    f"instance {instance_id}: mask {mask.width}x{mask.height} does not match "
                    f"the declared {frame} frame {resolution[0]}x{resolution[1]} of image {image.image_id}"
                )
        elif raw.get("polygon") is not None:
            poly = Polygon.from_flat(raw["polygon"])
            mask = rle_encode(rasterize(poly, resolution[0], resolution[1]))
        else:
            raise ValidationError(f"instance {instance_id} carries neither mask nor polygon")
        return PredictionInstance(id=instance_id, image_id=image.image_id, mask=mask, score=score), frame

    # ------------------------------------------------------------- qc actions

    def _image_action(
        self,
        image_id: str,
        action: Action,
        actor: str,
        timestamp: Optional[int],
        extra_payload: Optional[dict] = None,
    ) -> EventRecord:
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], action, job.arm)
        payload = {"image_id": image_id}
        if extra_payload:
            payload.update(extra_payload)
        return self._emit(job.job_id, action.value, payload, actor, timestamp)

    def open_qc1(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC1_OPEN, actor, timestamp)

    def close_qc1(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC1_CLOSE, actor, timestamp)

    def complete_qc1(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC1_COMPLETE, actor, timestamp)

    def open_qc2(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC2_OPEN, actor, timestamp)

    def close_qc2(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC2_CLOSE, actor, timestamp)

    def complete_qc2(self, image_id, actor="analyst", timestamp=None):
        return self._image_action(image_id, Action.QC2_COMPLETE, actor, timestamp)

    def flag_missed(self, image_id, actor="analyst", timestamp=None, note=None):
        extra = {"note": note} if note is not None else {}
        return self._image_action(image_id, Action.MISSED_DAMAGE_FLAGGED, actor, timestamp, extra)

    def convert_clue(
        self,
        image_id: str,
        clue_id: str,
        edited_polygon: Optional[Polygon] = None,
        actor: str = "analyst",
        timestamp: Optional[int] = None,
        damage_label: Optional[str] = None,
    ) -> Annotation:
        """Turn a proposed clue into an annotation.

        Without an edit the annotation polygon is exactly the clue's four
        corners (provenance clue_converted); with an edited polygon the
        provenance is clue_modified.
        """
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        action = Action.CLUE_CONVERTED if edited_polygon is None else Action.CLUE_MODIFIED
        check_transition(self.workflows[image_id], action, job.arm)
        clue = self._clue(image_id, clue_id)
        if clue.status is not ClueStatus.PROPOSED:
            raise ConflictError(f"clue {clue_id} already {clue.status.value}")
        if edited_polygon is None:
            polygon = clue.rect.to_polygon()
            provenance = Provenance("clue_converted", clue_id)
        else:
            self._check_polygon_in_native(edited_polygon, image)
            polygon = edited_polygon
            provenance = Provenance("clue_modified", clue_id)
        ts = int(timestamp) if timestamp is not None else self.clock()
        seq = self._journal(job.job_id).last_seq + 1
        annotation = Annotation(
            annotation_id=f"a{seq:06d}",
            image_id=image_id,
            polygon=polygon,
            provenance=provenance,
            damage_label=damage_label,
            author=actor,
            stage="qc1",
            created_at=ts,
        )
        payload = {"image_id": image_id, "clue_id": clue_id, "annotation": annotation.to_wire()}
        self._emit(job.job_id, action.value, payload, actor, ts)
        return annotation

    def dismiss_clue(self, image_id: str, clue_id: str, actor="analyst", timestamp=None) -> Clue:
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], Action.CLUE_DISMISSED, job.arm)
        clue = self._clue(image_id, clue_id)
        if clue.status is not ClueStatus.PROPOSED:
            raise ConflictError(f"clue {clue_id} already {clue.status.value}")
        self._emit(
            job.job_id,
            Action.CLUE_DISMISSED.value,
            {"image_id": image_id, "clue_id": clue_id},
            actor,
            timestamp,
        )
        return self.clues[image_id][clue_id]

    def draw_annotation(
        self,
        image_id: str,
        polygon: Polygon,
        actor: str = "analyst",
        timestamp: Optional[int] = None,
        damage_label: Optional[str] = None,
    ) -> Annotation:
        """Manually drawn annotation; stage is wherever the image is open."""
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], Action.ANNOTATION_DRAWN, job.arm)
        self._check_polygon_in_native(polygon, image)
        stage = "qc1" if self.workflows[image_id].stage is Stage.QC1_OPEN else "qc2"
        ts = int(timestamp) if timestamp is not None else self.clock()
        seq = self._journal(job.job_id).last_seq + 1
        annotation = Annotation(
            annotation_id=f"a{seq:06d}",
            image_id=image_id,
            polygon=polygon,
            provenance=Provenance("manual"),
            damage_label=damage_label,
            author=actor,
            stage=stage,
            created_at=ts,
        )
        payload = {"image_id": image_id, "annotation": annotation.to_wire()}
        self._emit(job.job_id, Action.ANNOTATION_DRAWN.value, payload, actor, ts)
        return annotation

    def edit_annotation(
        self,
        image_id: str,
        annotation_id: str,
        polygon: Polygon,
        actor: str = "analyst",
        timestamp: Optional[int] = None,
    ) -> Annotation:
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], Action.ANNOTATION_EDITED, job.arm)
        if annotation_id not in self.annotations.get(image_id, {}):
            raise NotFoundError(f"annotation {annotation_id} unknown on image {image_id}")
        self._check_polygon_in_native(polygon, image)
        payload = {
            "image_id": image_id,
            "annotation_id": annotation_id,
            "polygon": polygon.to_flat(),
        }
        self._emit(job.job_id, Action.ANNOTATION_EDITED.value, payload, actor, timestamp)
        return self.annotations[image_id][annotation_id]

    def approve_annotation(self, image_id: str, annotation_id: str, actor="analyst", timestamp=None):
        image = self.image(image_id)
        job = self.jobs[image.job_id]
        check_transition(self.workflows[image_id], Action.ANNOTATION_APPROVED, job.arm)
        if annotation_id not in self.annotations.get(image_id, {}):
            raise NotFoundError(f"annotation {annotation_id} unknown on image {image_id}")
        return self._emit(
            job.job_id,
            Action.ANNOTATION_APPROVED.value,
            {"image_id": image_id, "annotation_id": annotation_id},
            actor,
            timestamp,
        )

    def _check_polygon_in_native(self, polygon: Polygon, image: ImageRecord):
        w, h = image.native_resolution
        coords = polygon.coords
        if coords[:, 0].min() < 0 or coords[:, 1].min() < 0 or coords[:, 0].max() > w or coords[:, 1].max() > h:
            raise ValidationError(
                f"annotation polygon exceeds the native frame {w}x{h} of image {image.image_id}"
            )

    # ----------------------------------------------------------------- apply

    def _validate(self, record: EventRecord):
        if record.action == JOB_INGESTED:
            return
        action = self._action_of(record)
        image_id = record.payload.get("image_id")
        if image_id is None:
            raise ValidationError(f"{action.value} event lacks an image_id")
        image = self.image(str(image_id))
        if image.job_id != record.job_id:
            raise ValidationError(
                f"image {image_id} belongs to job {image.job_id}, not {record.job_id}"
            )
        check_transition(self.workflows[str(image_id)], action, self.jobs[image.job_id].arm)

    def _action_of(self, record: EventRecord) -> Action:
        try:
            return Action(record.action)
        except ValueError as exc:
            raise ValidationError(f"unknown action {record.action!r}") from exc

    def _apply(self, record: EventRecord):
        if record.action == JOB_INGESTED:
            self._apply_job_ingested(record)
            return
        action = self._action_of(record)
        image_id = str(record.payload["image_id"])
        image = self.images.get(image_id)
        if image is None:
            raise NotFoundError(f"image {image_id} unknown")
        job = self.jobs[image.job_id]
        self.workflows[image_id] = apply_event(self.workflows[image_id], record, job.arm)
        self.image_events[image_id].append(record)

        if action is Action.PREDICTIONS_INGESTED:
            instances = [
                PredictionInstance(
                    id=i["id"],
                    image_id=image_id,
                    mask=RleMask.from_wire(i["mask"]),
                    score=float(i["score"]),
                )
                for i in record.payload["instances"]
            ]
            self.predictions[image_id] = instances
            self.prediction_frames[image_id] = {
                i["id"]: i["frame"] for i in record.payload["instances"]
            }
            self.clues[image_id] = {
                c["id"]: Clue.from_wire(c) for c in record.payload["clues"]
            }
        elif action in (Action.CLUE_CONVERTED, Action.CLUE_MODIFIED):
            clue_id = record.payload["clue_id"]
            status = ClueStatus.CONVERTED if action is Action.CLUE_CONVERTED else ClueStatus.MODIFIED
            self.clues[image_id][clue_id] = self.clues[image_id][clue_id].with_status(status)
            annotation = Annotation.from_wire(record.payload["annotation"])
            self.annotations[image_id][annotation.annotation_id] = annotation
        elif action is Action.CLUE_DISMISSED:
            clue_id = record.payload["clue_id"]
            self.clues[image_id][clue_id] = self.clues[image_id][clue_id].with_status(
                ClueStatus.DISMISSED
            )
        elif action is Action.ANNOTATION_DRAWN:
            annotation = Annotation.from_wire(record.payload["annotation"])
            self.annotations[image_id][annotation.annotation_id] = annotation
        elif action is Action.ANNOTATION_EDITED:
            annotation_id = record.payload["annotation_id"]
            current = self.annotations[image_id][annotation_id]
            updated = Annotation(
                annotation_id=current.annotation_id,
                image_id=current.image_id,
                polygon=Polygon.from_flat(record.payload["polygon"]),
                provenance=current.provenance,
                damage_label=current.damage_label,
                author=current.author,
                stage=current.stage,
                created_at=current.created_at,
            )
            self.annotations[image_id][annotation_id] = updated
        elif action is Action.ANNOTATION_APPROVED:
            annotation_id = record.payload["annotation_id"]
            if annotation_id not in self.approved[image_id]:
                self.approved[image_id].append(annotation_id)
        elif action is Action.MISSED_DAMAGE_FLAGGED:
            self.misses[image_id] += 1

    def _apply_job_ingested(self, record: EventRecord):
        payload = record.payload
        canonical = payload["manifest"]
        job_id = canonical["job_id"]
        if job_id in self.jobs:
            raise ConflictError(f"job {job_id} already exists")
        arm = Arm(payload["arm"])
        image_ids = []
        for entry in canonical["images"]:
            image = ImageRecord(
                image_id=entry["image_id"],
                job_id=job_id,
                file_ref=entry["file_ref"],
                native_resolution=tuple(entry["native_resolution"]),
                working_resolution=tuple(entry["working_resolution"]),
                metadata=entry["metadata"],
            )
            if image.image_id in self.images:
                raise ConflictError(f"image {image.image_id} already exists")
            self.images[image.image_id] = image
            self.workflows[image.image_id] = ImageWorkflow(image_id=image.image_id)
            self.predictions[image.image_id] = []
            self.prediction_frames[image.image_id] = {}
            self.clues[image.image_id] = {}
            self.annotations[image.image_id] = {}
            self.approved[image.image_id] = []
            self.misses[image.image_id] = 0
            self.image_events[image.image_id] = []
            image_ids.append(image.image_id)
        self.jobs[job_id] = InspectionJob(
            job_id=job_id,
            turbine_id=canonical["turbine_id"],
            arm=arm,
            image_ids=tuple(image_ids),
            created_at=record.timestamp,
        )
        self._manifests[job_id] = json.dumps(canonical, sort_keys=True, separators=(",", ":"))

    # ---------------------------------------------------------------- queries

    def job(self, job_id: str) -> InspectionJob:
        if job_id not in self.jobs:
            raise NotFoundError(f"job {job_id} unknown")
        return self.jobs[job_id]

    def image(self, image_id: str) -> ImageRecord:
        if image_id not in self.images:
            raise NotFoundError(f"image {image_id} unknown")
        return self.images[image_id]

    def _clue(self, image_id: str, clue_id: str) -> Clue:
        clue = self.clues.get(image_id, {}).get(clue_id)
        if clue is None:
            raise NotFoundError(f"clue {clue_id} unknown on image {image_id}")
        return clue

    def clues_for(self, image_id: str) -> list[Clue]:
        self.image(image_id)
        return list(self.clues[image_id].values())

    def annotations_for_image(self, image_id: str) -> list[Annotation]:
        self.image(image_id)
        return list(self.annotations[image_id].values())

    def annotations_for_job(self, job_id: str) -> list[Annotation]:
        job = self.job(job_id)
        out = []
        for image_id in job.image_ids:
            out.extend(self.annotations[image_id].values())
        return out

    def events_for_image(self, image_id: str) -> list[EventRecord]:
        self.image(image_id)
        return list(self.image_events[image_id])

    def job_stage_index(self, job_id: str) -> int:
        """The least-advanced image decides how far the job has come."""
        job = self.job(job_id)
        return min(_STAGE_ORDER[self.workflows[i].stage] for i in job.image_ids)

    def job_reached(self, job_id: str, stage: Stage) -> bool:
        return self.job_stage_index(job_id) >= _STAGE_ORDER[stage]

    def job_terminal(self, job_id: str) -> bool:
        return self.job_reached(job_id, Stage.QC2_DONE)

    def miss_count(self, job_id: str) -> int:
        job = self.job(job_id)
        return sum(self.misses[i] for i in job.image_ids)

    def export_annotations(self, image_id: str) -> dict:
        return {
            "image_id": image_id,
            "annotations": [a.to_wire() for a in self.annotations_for_image(image_id)],
        }

    # -------------------------------------------------------------- snapshots

    def snapshot(self) -> dict:
        """Canonical view of the entire derived state, for replay comparison."""
        return {
            "jobs": {j.job_id: j.to_wire() for j in self.jobs.values()},
            "images": {i.image_id: i.to_wire() for i in self.images.values()},
            "workflows": {
                image_id: {
                    "stage": wf.stage.value,
                    "qc1_opens": wf.qc1_opens,
                    "qc1_closes": wf.qc1_closes,
                    "qc2_opens": wf.qc2_opens,
                    "qc2_closes": wf.qc2_closes,
                }
                for image_id, wf in self.workflows.items()
            },
            "predictions": {
                image_id: [
                    {"id": p.id, "score": p.score, "mask": p.mask.to_wire(),
                     "frame": self.prediction_frames[image_id].get(p.id)}
                    for p in instances
                ]
                for image_id, instances in self.predictions.items()
            },
            "clues": {
                image_id: [c.to_wire() for c in clue_map.values()]
                for image_id, clue_map in self.clues.items()
            },
            "annotations": {
                image_id: [a.to_wire() for a in ann_map.values()]
                for image_id, ann_map in self.annotations.items()
            },
            "approved": {image_id: list(ids) for image_id, ids in self.approved.items()},
            "misses": dict(self.misses),
            "journal_seq": {job_id: j.last_seq for job_id, j in self.journals.items()},
        }

    def canonical_state(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))

    def state_digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.canonical_state().encode("utf-8")).hexdigest()

    # ----------------------------------------------------------------- replay

    @classmethod
    def replay_records(
        cls, records: Iterable[EventRecord], data_dir: Optional[str | Path] = None, **kwargs
    ) -> "InspectionStore":
        """Rebuild a store by folding the given records in order."""
        store = cls(data_dir=data_dir, **kwargs)
        for record in records:
            store._journal(record.job_id).append(record)
            store._apply(record)
        return store

    @classmethod
    def replay_journal_file(cls, path: str | Path, **kwargs) -> "InspectionStore":
        return cls.replay_records(read_journal_file(Path(path)), **kwargs)

    @classmethod
    def load(cls, data_dir: str | Path, **kwargs) -> "InspectionStore":
        """Rebuild from every per-job journal file under data_dir."""
        data_dir = Path(data_dir)
        store = cls(data_dir=None, **kwargs)
        for path in sorted(data_dir.glob("job-*.jsonl")):
            journal = Journal.load(path)
            store.journals[journal.job_id] = journal
            for record in journal:
                store._apply(record)
        store.data_dir = data_dir
        return store
