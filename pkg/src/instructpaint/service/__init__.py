from .checkpoint import (
    CheckpointBundle,
    CheckpointError,
    ensure_matches,
    load_checkpoint,
    save_checkpoint,
)
from .sessions import Session, SessionBusy, SessionManager, SessionNotFound
from .app import create_app

__all__ = [
    "CheckpointBundle", "CheckpointError", "ensure_matches",
    "load_checkpoint", "save_checkpoint",
    "Session", "SessionBusy", "SessionManager", "SessionNotFound",
    "create_app",
]
