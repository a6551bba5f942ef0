"""HTTP service for the expert classification loop.

Serves raw member and observation fields as JSON and collects accept/reject
labels from the companion browser UI. Rendering stays on the client; the
service only guarantees that every label write is serialized and that the
classification file on disk is always a complete, parseable snapshot.
"""

from __future__ import annotations

import os
import tempfile
import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .ensemble import Ensemble
from .selection import Classification, load_classification, save_classification


class SessionState:
    """One labeling session around a loaded ensemble.

    Reads never block. Label mutations and saves go through a single lock
    and reach disk via write-temp-then-rename, so a concurrent reader of
    the classification file sees either the old or the new snapshot.
    """

    def __init__(self, ensemble: Ensemble, classification_path,
                 wave_id: int = 1, annotator: str = "ui"):
        self.ensemble = ensemble
        self.classification_path = str(classification_path)
        self.wave_id = int(wave_id)
        self.annotator = annotator
        n = ensemble.outputs.n
        if os.path.exists(self.classification_path):
            existing = load_classification(self.classification_path, n=n,
                                           wave_id=self.wave_id)
            self.labels = [int(v) for v in existing.labels]
        else:
            self.labels = [0] * n
        self._lock = threading.Lock()
        # field payloads never change for a loaded ensemble
        self._member_cache: dict = {}
        self._obs_cache = None

    @property
    def n(self) -> int:
        return self.ensemble.outputs.n

    def member_values(self, index: int) -> list:
        if index not in self._member_cache:
            self._member_cache[index] = [
                float(v) for v in self.ensemble.outputs.fields[:, index]
            ]
        return self._member_cache[index]

    def observation_values(self) -> list:
        if self._obs_cache is None:
            self._obs_cache = [float(v) for v in self.ensemble.observation.z]
        return self._obs_cache

    def tally(self) -> dict:
        counts = {0: 0, 1: 0, 2: 0}
        for lab in self.labels:
            counts[lab] += 1
        return {str(k): counts[k] for k in (0, 1, 2)}

    def classification(self) -> Classification:
        return Classification(labels=self.labels, wave_id=self.wave_id,
                              annotator=self.annotator)

    def _write_file(self) -> str:
        directory = os.path.dirname(os.path.abspath(self.classification_path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        os.close(fd)
        try:
            save_classification(self.classification(), tmp)
            os.replace(tmp, self.classification_path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return self.classification_path

    def set_label(self, index: int, label: int) -> dict:
        if not 0 <= index < self.n:
            raise IndexError(f"no member with index {index}")
        if label not in (0, 1, 2):
            raise ValueError(f"label must be 0, 1 or 2, got {label}")
        with self._lock:
            self.labels[index] = int(label)
            self._write_file()
            return self.tally()

    def save(self) -> str:
        with self._lock:
            return self._write_file()


class LabelRequest(BaseModel):
    index: int
    label: int = Field(ge=0, le=2)


def create_app(state: SessionState, static_dir=None) -> FastAPI:
    """Build the FastAPI app over a session; optionally mount a built UI."""
    app = FastAPI(title="kernelhm classification service")

    @app.get("/api/meta")
    def meta():
        shape = state.ensemble.outputs.grid_shape
        return {
            "n": state.n,
            "grid_shape": list(shape) if shape is not None else None,
            "wave_id": state.wave_id,
        }

    @app.get("/api/member/{index}")
    def member(index: int):
        if not 0 <= index < state.n:
            raise HTTPException(status_code=404,
                                detail=f"no member with index {index}")
        return {
            "index": index,
            "values": state.member_values(index),
            "label": state.labels[index],
        }

    @app.get("/api/observation")
    def observation():
        return {"values": state.observation_values()}

    @app.get("/api/classification")
    def classification():
        return {
            "n": state.n,
            "labels": list(state.labels),
            "tally": state.tally(),
            "wave_id": state.wave_id,
        }

    @app.post("/api/label")
    def label(req: LabelRequest):
        try:
            tally = state.set_label(req.index, req.label)
        except IndexError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"index": req.index, "label": req.label, "tally": tally}

    @app.post("/api/save")
    def save():
        return {"path": state.save()}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app
