"""HTTP JSON API over the inspection store.

Every mutating endpoint maps to exactly one journal event type; responses
wrap either {"data": ...} or {"error": {"code", "message"}}. The service
itself is stateless over the journal-backed store, so crash recovery is
journal replay. Prediction ingest generates clues synchronously — the work
per image is bounded and a queue would only add moving parts.

Status mapping: validation 400, unknown entity 404, conflict 409, illegal
workflow transition 422.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import metrics, reports
from .exceptions import (
    BladeQCError,
    ConflictError,
    NotFoundError,
    TransitionError,
    ValidationError,
)
from .geometry import Polygon
from .store import InspectionStore
from .workflow import transition_table

_STATUS = [
    (TransitionError, 422, "illegal_transition"),
    (ConflictError, 409, "conflict"),
    (NotFoundError, 404, "not_found"),
    (ValidationError, 400, "validation_error"),
    (BladeQCError, 400, "validation_error"),
]


def _error_response(exc: BladeQCError) -> JSONResponse:
    for klass, status, code in _STATUS:
        if isinstance(exc, klass):
            return JSONResponse(
                status_code=status,
                content={"error": {"code": code, "message": str(exc)}},
            )
    raise exc


def create_app(
    store: Optional[InspectionStore] = None,
    data_dir: Optional[str] = None,
    ui_dir: Optional[str] = None,
    **store_kwargs,
) -> FastAPI:
    if store is None:
        if data_dir is not None and any(Path(data_dir).glob("job-*.jsonl")):
            store = InspectionStore.load(data_dir, **store_kwargs)
        else:
            store = InspectionStore(data_dir=data_dir, **store_kwargs)

    app = FastAPI(title="bladeqc", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.idempotency_cache = {}

    @app.exception_handler(BladeQCError)
    async def _bladeqc_error(request: Request, exc: BladeQCError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "validation_error", "message": str(exc.errors())}},
        )

    def actor_of(request: Request) -> str:
        return request.headers.get("X-Actor", "anonymous")

    def idempotent(request: Request, compute):
        """Replay a cached response when the client retries with the same key."""
        key = request.headers.get("Idempotency-Key")
        cache_key = (request.method, request.url.path, key)
        cache = app.state.idempotency_cache
        if key is not None and cache_key in cache:
            return JSONResponse(content=cache[cache_key])
        body = {"data": compute()}
        if key is not None:
            cache[cache_key] = body
        return JSONResponse(content=body)

    def ok(data):
        return {"data": data}

    # ------------------------------------------------------------- ingestion

    @app.post("/jobs")
    def post_job(request: Request, manifest: dict = Body(...)):
        return idempotent(
            request,
            lambda: store.ingest_job(manifest, actor=actor_of(request)).to_wire(),
        )

    @app.post("/jobs/{job_id}/predictions")
    def post_predictions(
        request: Request,
        job_id: str,
        payload=Body(...),
        score_threshold: float = Query(0.5),
    ):
        store.job(job_id)

        def compute():
            clues = store.ingest_predictions(
                payload,
                score_threshold=score_threshold,
                actor=actor_of(request),
                job_id=job_id,
            )
            return [c.to_wire() for c in clues]

        return idempotent(request, compute)

    # ----------------------------------------------------------- clue review

    @app.get("/images/{image_id}/clues")
    def get_clues(image_id: str):
        return ok([c.to_wire() for c in store.clues_for(image_id)])

    @app.post("/images/{image_id}/clues/{clue_id}/convert")
    def post_convert(request: Request, image_id: str, clue_id: str, body: dict = Body(default={})):
        def compute():
            polygon = None
            if body.get("polygon") is not None:
                polygon = Polygon.from_flat(body["polygon"])
            annotation = store.convert_clue(
                image_id,
                clue_id,
                edited_polygon=polygon,
                actor=actor_of(request),
                timestamp=body.get("timestamp"),
                damage_label=body.get("damage_label"),
            )
            return annotation.to_wire()

        return idempotent(request, compute)

    @app.post("/images/{image_id}/clues/{clue_id}/dismiss")
    def post_dismiss(request: Request, image_id: str, clue_id: str, body: dict = Body(default={})):
        return idempotent(
            request,
            lambda: store.dismiss_clue(
                image_id, clue_id, actor=actor_of(request), timestamp=body.get("timestamp")
            ).to_wire(),
        )

    @app.post("/images/{image_id}/annotations")
    def post_annotation(request: Request, image_id: str, body: dict = Body(...)):
        def compute():
            if body.get("polygon") is None:
                raise ValidationError("manual annotation needs a polygon")
            annotation = store.draw_annotation(
                image_id,
                Polygon.from_flat(body["polygon"]),
                actor=actor_of(request),
                timestamp=body.get("timestamp"),
                damage_label=body.get("damage_label"),
            )
            return annotation.to_wire()

        return idempotent(request, compute)

    @app.get("/images/{image_id}/annotations")
    def get_annotations(image_id: str):
        return ok(store.export_annotations(image_id))

    @app.post("/images/{image_id}/annotations/{annotation_id}/approve")
    def post_approve(request: Request, image_id: str, annotation_id: str, body: dict = Body(default={})):
        def compute():
            store.approve_annotation(
                image_id, annotation_id, actor=actor_of(request), timestamp=body.get("timestamp")
            )
            return _stage_payload(image_id)

        return idempotent(request, compute)

    # -------------------------------------------------------------- workflow

    def _stage_payload(image_id: str) -> dict:
        wf = store.workflows[image_id]
        return {"image_id": image_id, "stage": wf.stage.value}

    def _qc_action(request: Request, image_id: str, body: dict, method):
        def compute():
            method(image_id, actor=actor_of(request), timestamp=body.get("timestamp"))
            return _stage_payload(image_id)

        return idempotent(request, compute)

    @app.post("/images/{image_id}/qc1/open")
    def post_qc1_open(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.open_qc1)

    @app.post("/images/{image_id}/qc1/close")
    def post_qc1_close(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.close_qc1)

    @app.post("/images/{image_id}/qc1/complete")
    def post_qc1_complete(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.complete_qc1)

    @app.post("/images/{image_id}/qc2/open")
    def post_qc2_open(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.open_qc2)

    @app.post("/images/{image_id}/qc2/close")
    def post_qc2_close(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.close_qc2)

    @app.post("/images/{image_id}/qc2/complete")
    def post_qc2_complete(request: Request, image_id: str, body: dict = Body(default={})):
        return _qc_action(request, image_id, body, store.complete_qc2)

    @app.post("/images/{image_id}/missed")
    def post_missed(request: Request, image_id: str, body: dict = Body(default={})):
        def compute():
            store.flag_missed(
                image_id,
                actor=actor_of(request),
                timestamp=body.get("timestamp"),
                note=body.get("note"),
            )
            return {"image_id": image_id, "misses": store.misses[image_id]}

        return idempotent(request, compute)

    # --------------------------------------------------------------- reports

    @app.get("/reports/conversion")
    def get_conversion(job: Optional[list[str]] = Query(default=None)):
        rows = reports.conversion_table(store, job_ids=job)
        return ok({"rows": [r.to_wire() for r in rows]})

    @app.get("/reports/productivity")
    def get_productivity(arm: str = Query(...)):
        return ok(reports.productivity_report(store, arm).to_wire())

    @app.get("/reports/comparison")
    def get_comparison():
        return ok(reports.arm_comparison(store).to_wire())

    # ------------------------------------------------------------ evaluation

    @app.post("/eval")
    def post_eval(body: dict = Body(...)):
        images = [metrics.EvalImage.from_wire(obj) for obj in body.get("images", [])]
        threshold = float(body.get("iou_threshold", metrics.DEFAULT_IOU_THRESHOLD))
        report = metrics.evaluate_dataset(images, threshold)
        data = report.to_wire()
        if body.get("include_matches"):
            data["matches"] = [metrics.match_image(img, threshold).to_wire() for img in images]
        return ok(data)

    # ------------------------------------------------------------------ meta

    @app.get("/healthz")
    def get_healthz():
        return ok({"status": "ok"})

    @app.get("/transitions")
    def get_transitions():
        return ok({"transitions": transition_table()})

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
