"""Production dashboard computations over the journal.

Two views: per-job clue conversion rates, and per-arm productivity (QC
minutes per picture, missed damages per inspection) with a control-vs-
treatment comparison. Numeric display precision is pinned — times at 3
decimals, misses at 4, percentages at 1 — so downstream consumers can
rely on exact strings. Averages weight every picture equally across the
whole selection rather than averaging per job first; the choice travels
with the report as `weighting`.

An inspection is a job: one turbine visit flowing through QC as a unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

from .exceptions import NotFoundError, ValidationError
from .store import InspectionStore
from .workflow import Arm, Stage, qc_durations

WEIGHTING = "global-per-picture"


def round_half_up(value: float, decimals: int) -> float:
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def format_percent(value: Optional[float]) -> str:
    """1-decimal percentage; integral values drop the decimal (97.3%, 100%)."""
    if value is None:
        return "n/a"
    rounded = round_half_up(value, 1)
    if rounded == int(rounded):
        return f"{int(rounded)}%"
    return f"{rounded:.1f}%"


def format_minutes(value: float) -> str:
    return f"{value:.3f}"


def format_misses(value: float) -> str:
    return f"{value:.4f}"


@dataclass(frozen=True)
class ConversionRow:
    job_id: str
    n_annotations: int
    n_from_clues: int
    pct_converted: Optional[float]  # rounded half-up to 1 decimal, None when no annotations

    def to_wire(self) -> dict:
        return {
            "job_id": self.job_id,
            "n_annotations": self.n_annotations,
            "n_from_clues": self.n_from_clues,
            "pct_converted": self.pct_converted,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "ConversionRow":
        return cls(
            job_id=obj["job_id"],
            n_annotations=int(obj["n_annotations"]),
            n_from_clues=int(obj["n_from_clues"]),
            pct_converted=obj.get("pct_converted"),
        )


@dataclass(frozen=True)
class ProductivityReport:
    arm: str
    avg_qc1_min_per_picture: float
    avg_qc2_min_per_picture: float
    avg_missed_per_inspection: float
    n_pictures: int
    n_inspections: int
    weighting: str = WEIGHTING

    def to_wire(self) -> dict:
        return {
            "arm": self.arm,
            "avg_qc1_min_per_picture": self.avg_qc1_min_per_picture,
            "avg_qc2_min_per_picture": self.avg_qc2_min_per_picture,
            "avg_missed_per_inspection": self.avg_missed_per_inspection,
            "n_pictures": self.n_pictures,
            "n_inspections": self.n_inspections,
            "weighting": self.weighting,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "ProductivityReport":
        return cls(
            arm=obj["arm"],
            avg_qc1_min_per_picture=float(obj["avg_qc1_min_per_picture"]),
            avg_qc2_min_per_picture=float(obj["avg_qc2_min_per_picture"]),
            avg_missed_per_inspection=float(obj["avg_missed_per_inspection"]),
            n_pictures=int(obj["n_pictures"]),
            n_inspections=int(obj["n_inspections"]),
            weighting=obj.get("weighting", WEIGHTING),
        )


@dataclass(frozen=True)
class ArmComparison:
    control: ProductivityReport
    treatment: ProductivityReport

    @property
    def deltas(self) -> dict:
        return {
            "avg_qc1_min_per_picture": self.treatment.avg_qc1_min_per_picture
            - self.control.avg_qc1_min_per_picture,
            "avg_qc2_min_per_picture": self.treatment.avg_qc2_min_per_picture
            - self.control.avg_qc2_min_per_picture,
            "avg_missed_per_inspection": self.treatment.avg_missed_per_inspection
            - self.control.avg_missed_per_inspection,
        }

    def to_wire(self) -> dict:
        return {
            "control": self.control.to_wire(),
            "treatment": self.treatment.to_wire(),
            "deltas": self.deltas,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "ArmComparison":
        return cls(
            control=ProductivityReport.from_wire(obj["control"]),
            treatment=ProductivityReport.from_wire(obj["treatment"]),
        )


def conversion_table(store: InspectionStore, job_ids: Optional[list[str]] = None) -> list[ConversionRow]:
    """One row per job: annotations, clue-sourced annotations, conversion rate.

    Annotations whose provenance is clue_converted or clue_modified both
    count as conversions — the analyst started from the clue either way.
    Jobs are included once their first QC pass is complete; explicitly
    requesting an earlier job is an error.
    """
    if job_ids is None:
        selected = [
            job_id for job_id in sorted(store.jobs) if store.job_reached(job_id, Stage.QC1_DONE)
        ]
    else:
        selected = []
        for job_id in job_ids:
            store.job(job_id)
            if not store.job_reached(job_id, Stage.QC1_DONE):
                raise ValidationError(f"job {job_id} has not completed QC1 yet")
            selected.append(job_id)
    rows = []
    for job_id in selected:
        annotations = store.annotations_for_job(job_id)
        n = len(annotations)
        from_clues = sum(1 for a in annotations if a.provenance.from_clue)
        pct = round_half_up(100.0 * from_clues / n, 1) if n else None
        rows.append(ConversionRow(job_id, n, from_clues, pct))
    return rows


def productivity_report(
    store: InspectionStore, arm: Arm | str, job_ids: Optional[list[str]] = None
) -> ProductivityReport:
    """Per-picture QC times and misses per inspection over terminal jobs of one arm."""
    arm = Arm(arm)
    if job_ids is None:
        selected = [
            job_id
            for job_id in sorted(store.jobs)
            if store.jobs[job_id].arm is arm and store.job_terminal(job_id)
        ]
    else:
        selected = []
        for job_id in job_ids:
            job = store.job(job_id)
            if job.arm is not arm:
                raise ValidationError(f"job {job_id} is in the {job.arm.value} arm, not {arm.value}")
            if not store.job_terminal(job_id):
                raise ValidationError(f"job {job_id} has not finished QC2 yet")
            selected.append(job_id)
    if not selected:
        raise NotFoundError(f"no completed jobs in the {arm.value} arm")

    qc1_total = 0.0
    qc2_total = 0.0
    n_pictures = 0
    misses = 0
    for job_id in selected:
        job = store.jobs[job_id]
        for image_id in job.image_ids:
            qc1, qc2 = qc_durations(store.events_for_image(image_id))
            qc1_total += qc1
            qc2_total += qc2
            n_pictures += 1
        misses += store.miss_count(job_id)
    return ProductivityReport(
        arm=arm.value,
        avg_qc1_min_per_picture=qc1_total / n_pictures,
        avg_qc2_min_per_picture=qc2_total / n_pictures,
        avg_missed_per_inspection=misses / len(selected),
        n_pictures=n_pictures,
        n_inspections=len(selected),
    )


def arm_comparison(store: InspectionStore) -> ArmComparison:
    """Control vs treatment productivity with per-field treatment-minus-control deltas."""
    reports = {}
    for arm in (Arm.CONTROL, Arm.TREATMENT):
        try:
            reports[arm] = productivity_report(store, arm)
        except NotFoundError as exc:
            raise NotFoundError(f"{arm.value} arm is empty: {exc}") from exc
    return ArmComparison(control=reports[Arm.CONTROL], treatment=reports[Arm.TREATMENT])


# ------------------------------------------------------------------- export


def _conversion_text(rows: list[ConversionRow]) -> str:
    header = f"{'Job':<16} {'Annotations':>12} {'From clues':>11} {'% converted':>12}"
    lines = [header, "-" * len(header)]
    for row in rows:
        pct = format_percent(row.pct_converted)
        lines.append(
            f"{row.job_id:<16} {row.n_annotations:>12} {row.n_from_clues:>11} {pct:>12}"
        )
    return "\n".join(lines)


def _productivity_text(report: ProductivityReport) -> str:
    header = (
        f"{'Arm':<12} {'QC1 min/picture':>16} {'QC2 min/picture':>16} "
        f"{'Missed/inspection':>18} {'Pictures':>9} {'Jobs':>6}"
    )
    lines = [header, "-" * len(header), _productivity_row(report)]
    return "\n".join(lines)


def _productivity_row(report: ProductivityReport) -> str:
    return (
        f"{report.arm:<12} {format_minutes(report.avg_qc1_min_per_picture):>16} "
        f"{format_minutes(report.avg_qc2_min_per_picture):>16} "
        f"{format_misses(report.avg_missed_per_inspection):>18} "
        f"{report.n_pictures:>9} {report.n_inspections:>6}"
    )


def _comparison_text(cmp: ArmComparison) -> str:
    header = (
        f"{'Arm':<12} {'QC1 min/picture':>16} {'QC2 min/picture':>16} "
        f"{'Missed/inspection':>18} {'Pictures':>9} {'Jobs':>6}"
    )
    deltas = cmp.deltas
    delta_line = (
        f"{'delta':<12} {format_minutes(deltas['avg_qc1_min_per_picture']):>16} "
        f"{format_minutes(deltas['avg_qc2_min_per_picture']):>16} "
        f"{format_misses(deltas['avg_missed_per_inspection']):>18} "
        f"{'':>9} {'':>6}"
    )
    return "\n".join(
        [header, "-" * len(header), _productivity_row(cmp.control), _productivity_row(cmp.treatment), delta_line]
    )


def export_report(report, format: str = "tabular") -> str:
    """Render a report as a fixed-width table or a round-trippable JSON document."""
    if format == "structured":
        if isinstance(report, list):
            return json.dumps({"rows": [r.to_wire() for r in report]}, indent=2, sort_keys=True)
        return json.dumps(report.to_wire(), indent=2, sort_keys=True)
    if format == "tabular":
        if isinstance(report, list):
            return _conversion_text(report)
        if isinstance(report, ProductivityReport):
            return _productivity_text(report)
        if isinstance(report, ArmComparison):
            return _comparison_text(report)
        raise ValidationError(f"cannot format report of type {type(report).__name__}")
    raise ValidationError(f"unknown report format {format!r}")


def parse_structured_report(text: str):
    """Inverse of export_report(format='structured')."""
    obj = json.loads(text)
    if "rows" in obj:
        return [ConversionRow.from_wire(r) for r in obj["rows"]]
    if "control" in obj and "treatment" in obj:
        return ArmComparison.from_wire(obj)
    return ProductivityReport.from_wire(obj)
