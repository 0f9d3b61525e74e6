"""In-memory manipulation sessions over a frozen checkpoint, with optional
append-only transcript persistence (replayable because inference is
deterministic in eval mode)."""

import hashlib
import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..data.render import empty_canvas
from ..rollout import step_canvas
from .checkpoint import CheckpointBundle


class SessionNotFound(KeyError):
    pass


class SessionBusy(RuntimeError):
    pass


@dataclass
class SessionStep:
    t: int
    instruction: str
    image_ref: str
    detections: list


@dataclass
class Session:
    id: str
    image: np.ndarray          # current canvas, uint8
    history: "object"          # encoder history state tensor
    t: int = 0
    image_ref: str = ""
    transcript: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionManager:
    """Owns the model, the image store, and per-session serialization.

    Model parameters are immutable for the manager's lifetime; concurrent
    steps on one session are rejected with SessionBusy, distinct sessions
    proceed independently.
    """

    def __init__(self, bundle: CheckpointBundle, persist_dir=None):
        self.bundle = bundle
        self.model = bundle.build_model()
        self.model.eval()
        self.vocab = bundle.build_vocab()
        self.localizer = bundle.build_localizer()
        self.gen_cfg = bundle.gen_config
        self.sessions: dict[str, Session] = {}
        self.images: dict[str, bytes] = {}
        self._registry_lock = threading.Lock()
        self.persist_dir = Path(persist_dir) if persist_dir else None
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)
            self._replay()

    # --- image store -----------------------------------------------------
    def _store_image(self, image_u8: np.ndarray) -> str:
        buf = io.BytesIO()
        Image.fromarray(image_u8).save(buf, format="PNG")
        data = buf.getvalue()
        ref = hashlib.sha256(data).hexdigest()[:16]
        self.images[ref] = data
        return ref

    def image_png(self, ref: str) -> bytes:
        try:
            return self.images[ref]
        except KeyError:
            raise SessionNotFound(f"unknown image {ref}")

    # --- session CRUD ----------------------------------------------------
    def create(self, session_id: str | None = None, _record: bool = True) -> Session:
        sid = session_id or uuid.uuid4().hex
        canvas = empty_canvas(self.gen_cfg.canvas_size, self.gen_cfg.palette)
        session = Session(
            id=sid,
            image=canvas,
            history=self.model.encoder.initial_history(1),
            image_ref=self._store_image(canvas),
        )
        with self._registry_lock:
            self.sessions[sid] = session
        if _record:
            self._record({"event": "create", "session": sid})
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFound(f"unknown session {session_id}")

    def delete(self, session_id: str, _record: bool = True) -> bool:
        with self._registry_lock:
            existed = self.sessions.pop(session_id, None) is not None
        if _record and existed:
            self._record({"event": "delete", "session": session_id})
        return existed

    def step(self, session_id: str, instruction: str, _record: bool = True) -> SessionStep:
        """Advance a session by one instruction; state mutates only on success."""
        if not instruction or not instruction.strip():
            raise ValueError("instruction must be non-empty")
        session = self.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id} has a step in flight")
        try:
            h_next, image_next = step_canvas(
                self.model, self.vocab, session.history, session.image, instruction)
            detections = self.localizer.detect(image_next) if self.localizer else []
            ref = self._store_image(image_next)
            record = SessionStep(
                t=session.t + 1,
                instruction=instruction,
                image_ref=ref,
                detections=detections,
            )
            # commit only after every stage succeeded
            session.history = h_next
            session.image = image_next
            session.image_ref = ref
            session.t = record.t
            session.transcript.append(record)
        finally:
            session.lock.release()
        if _record:
            self._record({"event": "step", "session": session_id, "instruction": instruction})
        return record

    # --- persistence -----------------------------------------------------
    def _events_path(self) -> Path:
        return self.persist_dir / "events.jsonl"

    def _record(self, event: dict):
        if not self.persist_dir:
            return
        with open(self._events_path(), "a") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self):
        path = self._events_path()
        if not path.exists():
            return
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event["event"]
            if kind == "create":
                self.create(session_id=event["session"], _record=False)
            elif kind == "step":
                self.step(event["session"], event["instruction"], _record=False)
            elif kind == "delete":
                self.delete(event["session"], _record=False)
