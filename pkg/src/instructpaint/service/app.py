"""HTTP surface: sessions, steps, images, health, and model info."""

from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..config import config_to_dict
from .sessions import SessionBusy, SessionManager, SessionNotFound

SCHEMA_VERSION = 1


class DetectionOut(BaseModel):
    shape: str
    color: str
    x: float
    y: float
    confidence: float


class SessionCreated(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: str
    t: int
    image_ref: str
    image_url: str


class StepRequest(BaseModel):
    instruction: str = Field(min_length=1)


class StepOut(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: str
    t: int
    instruction: str
    image_ref: str
    image_url: str
    detections: list[DetectionOut]


class TranscriptOut(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: str
    t: int
    image_ref: str
    image_url: str
    steps: list[StepOut]


class DeleteOut(BaseModel):
    schema_version: int = SCHEMA_VERSION
    deleted: bool


class HealthOut(BaseModel):
    status: str = "ok"


class ModelInfoOut(BaseModel):
    schema_version: int = SCHEMA_VERSION
    epoch: int
    seed: int
    dataset_hash: str
    vocab_size: int
    model: dict
    catalogs: dict


def _image_url(ref: str) -> str:
    return f"/images/{ref}"


def _step_out(sid: str, step) -> StepOut:
    return StepOut(
        session_id=sid,
        t=step.t,
        instruction=step.instruction,
        image_ref=step.image_ref,
        image_url=_image_url(step.image_ref),
        detections=[DetectionOut(shape=d.shape, color=d.color, x=d.x, y=d.y,
                                 confidence=d.confidence) for d in step.detections],
    )


def create_app(manager: SessionManager, ui_dir=None) -> FastAPI:
    app = FastAPI(title="instructpaint", version="0.1.0")
    app.state.manager = manager

    @app.get("/healthz", response_model=HealthOut)
    def healthz():
        return HealthOut()

    @app.get("/model", response_model=ModelInfoOut)
    def model_info():
        b = manager.bundle
        return ModelInfoOut(
            epoch=b.epoch,
            seed=b.seed,
            dataset_hash=b.dataset_hash,
            vocab_size=len(b.vocab_tokens),
            model=config_to_dict(b.model_config),
            catalogs={"shapes": list(b.gen_config.shapes),
                      "colors": list(b.gen_config.colors)},
        )

    @app.post("/sessions", response_model=SessionCreated, status_code=201)
    def create_session():
        s = manager.create()
        return SessionCreated(session_id=s.id, t=s.t, image_ref=s.image_ref,
                              image_url=_image_url(s.image_ref))

    @app.post("/sessions/{sid}/steps", response_model=StepOut)
    def step_session(sid: str, req: StepRequest):
        try:
            record = manager.step(sid, req.instruction)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        except SessionBusy:
            raise HTTPException(status_code=409, detail="a step is already in flight")
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return _step_out(sid, record)

    @app.get("/sessions/{sid}", response_model=TranscriptOut)
    def get_session(sid: str):
        try:
            s = manager.get(sid)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return TranscriptOut(
            session_id=s.id, t=s.t, image_ref=s.image_ref,
            image_url=_image_url(s.image_ref),
            steps=[_step_out(s.id, rec) for rec in s.transcript],
        )

    @app.delete("/sessions/{sid}", response_model=DeleteOut)
    def delete_session(sid: str):
        return DeleteOut(deleted=manager.delete(sid))

    @app.get("/images/{ref}")
    def get_image(ref: str):
        try:
            data = manager.image_png(ref)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"unknown image {ref}")
        return Response(content=data, media_type="image/png")

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
