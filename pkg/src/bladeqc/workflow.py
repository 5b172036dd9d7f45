"""Per-image QC state machine and A/B arm assignment.

Every image walks INGESTED -> PREDICTED -> QC1_OPEN -> QC1_DONE ->
QC2_OPEN -> QC2_DONE. Control-arm images never see clues but still pass
both human QC stages; for them INGESTED counts as PREDICTED, which is the
only permitted shortcut. QC stage timers are explicit open/close events
emitted by the client — only the client knows when an image is actually on
screen — and they must strictly alternate per stage.

Arm assignment is a pure function of (salt, job_id): reproducible
experiments, idempotent re-ingestion.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, replace

from .exceptions import TransitionError, ValidationError
from .journal import EventRecord

DEFAULT_CONTROL_RATIO = 0.8


class Arm(str, enum.Enum):
    CONTROL = "control"
    TREATMENT = "treatment"


class Stage(str, enum.Enum):
    INGESTED = "INGESTED"
    PREDICTED = "PREDICTED"
    QC1_OPEN = "QC1_OPEN"
    QC1_DONE = "QC1_DONE"
    QC2_OPEN = "QC2_OPEN"
    QC2_DONE = "QC2_DONE"


class Action(str, enum.Enum):
    PREDICTIONS_INGESTED = "predictions_ingested"
    QC1_OPEN = "qc1_open"
    CLUE_CONVERTED = "clue_converted"
    CLUE_MODIFIED = "clue_modified"
    CLUE_DISMISSED = "clue_dismissed"
    ANNOTATION_DRAWN = "annotation_drawn"
    ANNOTATION_EDITED = "annotation_edited"
    QC1_CLOSE = "qc1_close"
    QC1_COMPLETE = "qc1_complete"
    QC2_OPEN = "qc2_open"
    ANNOTATION_APPROVED = "annotation_approved"
    MISSED_DAMAGE_FLAGGED = "missed_damage_flagged"
    QC2_CLOSE = "qc2_close"
    QC2_COMPLETE = "qc2_complete"


CLUE_ACTIONS = frozenset(
    {Action.CLUE_CONVERTED, Action.CLUE_MODIFIED, Action.CLUE_DISMISSED}
)

# guards: "treatment_arm" / "control_arm" restrict by arm;
# "closed_qc1_interval" requires at least one completed open/close pair.
_TABLE: dict[tuple[Stage, Action], tuple[Stage, frozenset[str]]] = {}


def _rule(stage: Stage, action: Action, nxt: Stage, *guards: str):
    _TABLE[(stage, action)] = (nxt, frozenset(guards))


_rule(Stage.INGESTED, Action.PREDICTIONS_INGESTED, Stage.PREDICTED)
_rule(Stage.INGESTED, Action.QC1_OPEN, Stage.QC1_OPEN, "control_arm")
_rule(Stage.PREDICTED, Action.QC1_OPEN, Stage.QC1_OPEN)
_rule(Stage.QC1_OPEN, Action.CLUE_CONVERTED, Stage.QC1_OPEN, "treatment_arm")
_rule(Stage.QC1_OPEN, Action.CLUE_MODIFIED, Stage.QC1_OPEN, "treatment_arm")
_rule(Stage.QC1_OPEN, Action.CLUE_DISMISSED, Stage.QC1_OPEN, "treatment_arm")
_rule(Stage.QC1_OPEN, Action.ANNOTATION_DRAWN, Stage.QC1_OPEN)
_rule(Stage.QC1_OPEN, Action.ANNOTATION_EDITED, Stage.QC1_OPEN)
_rule(Stage.QC1_OPEN, Action.QC1_CLOSE, Stage.PREDICTED)
_rule(Stage.PREDICTED, Action.QC1_COMPLETE, Stage.QC1_DONE, "closed_qc1_interval")
_rule(Stage.QC1_DONE, Action.QC2_OPEN, Stage.QC2_OPEN)
_rule(Stage.QC2_OPEN, Action.ANNOTATION_DRAWN, Stage.QC2_OPEN)
_rule(Stage.QC2_OPEN, Action.ANNOTATION_EDITED, Stage.QC2_OPEN)
_rule(Stage.QC2_OPEN, Action.ANNOTATION_APPROVED, Stage.QC2_OPEN)
_rule(Stage.QC2_OPEN, Action.MISSED_DAMAGE_FLAGGED, Stage.QC2_OPEN)
_rule(Stage.QC2_OPEN, Action.QC2_CLOSE, Stage.QC1_DONE)
# completing QC2 needs a finished QC1 (the QC1_DONE state) but not
# necessarily any QC2 screen time
_rule(Stage.QC1_DONE, Action.QC2_COMPLETE, Stage.QC2_DONE)


def transition_table() -> list[dict]:
    """Machine-readable transition table, for clients to disable illegal actions."""
    rows = []
    for (stage, action), (nxt, guards) in _TABLE.items():
        rows.append(
            {
                "state": stage.value,
                "action": action.value,
                "next": nxt.value,
                "guards": sorted(guards),
            }
        )
    rows.sort(key=lambda r: (r["state"], r["action"]))
    return rows


@dataclass(frozen=True)
class ImageWorkflow:
    """Workflow position of a single image."""

    image_id: str
    stage: Stage = Stage.INGESTED
    qc1_opens: int = 0
    qc1_closes: int = 0
    qc2_opens: int = 0
    qc2_closes: int = 0

    @property
    def terminal(self) -> bool:
        return self.stage is Stage.QC2_DONE


def assign_arm(job_id: str, ratio: float = DEFAULT_CONTROL_RATIO, salt: str = "") -> Arm:
    """Deterministic A/B bucketing: hash of (salt, job_id) scaled to [0, 1).

    Values below ratio land in control (the clue-less legacy process);
    the rest get clues.
    """
    if not (0.0 < ratio < 1.0):
        raise ValidationError(f"arm ratio must be in (0, 1), got {ratio}")
    digest = hashlib.blake2b(f"{salt}:{job_id}".encode("utf-8"), digest_size=8).digest()
    unit = int.from_bytes(digest, "big") / 2**64
    return Arm.CONTROL if unit < ratio else Arm.TREATMENT


def check_transition(state: ImageWorkflow, action: Action, arm: Arm) -> Stage:
    """Next stage for an action, or TransitionError naming state and action.

    The control-arm shortcut (qc1_open straight from INGESTED, since those
    images never receive predictions) is an explicit guarded table row.
    """
    rule = _TABLE.get((state.stage, action))
    if rule is None:
        raise TransitionError(
            f"image {state.image_id}: action {action.value!r} is illegal in state {state.stage.value}"
        )
    nxt, guards = rule
    if "treatment_arm" in guards and arm is not Arm.TREATMENT:
        raise TransitionError(
            f"image {state.image_id}: {action.value!r} requires the treatment arm (job is {arm.value})"
        )
    if "control_arm" in guards and arm is not Arm.CONTROL:
        raise TransitionError(
            f"image {state.image_id}: {action.value!r} from state {state.stage.value} "
            f"is only a control-arm shortcut"
        )
    if "closed_qc1_interval" in guards and not (state.qc1_closes >= 1 and state.qc1_opens == state.qc1_closes):
        raise TransitionError(
            f"image {state.image_id}: {action.value!r} needs a completed qc1 open/close pair"
        )
    return nxt


def apply_event(state: ImageWorkflow, event: EventRecord, arm: Arm) -> ImageWorkflow:
    """Advance one image's workflow by one event; raises on illegal transitions."""
    action = Action(event.action)
    nxt = check_transition(state, action, arm)
    updates: dict = {"stage": nxt}
    if action is Action.QC1_OPEN:
        updates["qc1_opens"] = state.qc1_opens + 1
    elif action is Action.QC1_CLOSE:
        updates["qc1_closes"] = state.qc1_closes + 1
    elif action is Action.QC2_OPEN:
        updates["qc2_opens"] = state.qc2_opens + 1
    elif action is Action.QC2_CLOSE:
        updates["qc2_closes"] = state.qc2_closes + 1
    return replace(state, **updates)


def qc_durations(events: list[EventRecord]) -> tuple[float, float]:
    """Sum of (close - open) intervals per QC stage for one image, in minutes.

    Raises if an open interval never closes — the image is still on screen.
    """
    totals = {Action.QC1_OPEN: 0, Action.QC2_OPEN: 0}
    open_ts: dict[Action, int] = {}
    pairs = {
        Action.QC1_CLOSE: Action.QC1_OPEN,
        Action.QC2_CLOSE: Action.QC2_OPEN,
    }
    for event in events:
        action = Action(event.action)
        if action in (Action.QC1_OPEN, Action.QC2_OPEN):
            if action in open_ts:
                raise ValidationError(f"{action.value} repeated without a close")
            open_ts[action] = event.timestamp
        elif action in pairs:
            opener = pairs[action]
            if opener not in open_ts:
                raise ValidationError(f"{action.value} without a matching open")
            totals[opener] += event.timestamp - open_ts.pop(opener)
    if open_ts:
        dangling = ", ".join(a.value for a in open_ts)
        raise ValidationError(f"image not yet closed: dangling {dangling}")
    return totals[Action.QC1_OPEN] / 60000.0, totals[Action.QC2_OPEN] / 60000.0
