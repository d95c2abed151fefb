"""HTTP facade over a single active session.

All mutating routes (execute, toggle, reset) serialize behind one writer
lock; reads serve the current session snapshot. Domain errors map to
HTTP 400 with ``{error_code, message}``; requests that need a session
before one was executed get 409.
"""

from __future__ import annotations

import base64
import threading

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import InvalidParams, LimevisError
from .imaging import LabeledDataset, RgbImage, write_ppm
from .lime import explain_config_from_dict
from .predictor import PredictorHandle
from .segmentation import boundary_mask
from .session import (
    Session,
    current_prediction,
    execute_category,
    overview_cells,
    pixel_to_superpixel,
    reset_toggles,
    toggle_superpixel,
)

BOUNDARY_COLOR = (255, 255, 0)


class NoSessionError(LimevisError):
    error_code = "no_session"


def ppm_b64(image: RgbImage) -> str:
    return base64.b64encode(write_ppm(image)).decode("ascii")


def boundary_overlay(entry) -> RgbImage:
    """Original image with all superpixel borders painted yellow."""
    out = entry.original.pixels.copy()
    out[boundary_mask(entry.spmap)] = BOUNDARY_COLOR
    return RgbImage(out)


class EngineState:
    """Dataset + predictor plus the single mutable session slot."""

    def __init__(self, dataset: LabeledDataset, predictor: PredictorHandle, workers: int = 1):
        self.dataset = dataset
        self.predictor = predictor
        self.workers = workers
        self.session: Session | None = None
        self.session_id = 0
        self.lock = threading.Lock()

    def require_session(self) -> Session:
        if self.session is None:
            raise NoSessionError("no session executed yet")
        return self.session


def create_app(
    dataset: LabeledDataset,
    predictor: PredictorHandle,
    workers: int = 1,
    frontend_dir=None,
) -> FastAPI:
    app = FastAPI(title="limevis", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = EngineState(dataset, predictor, workers)
    app.state.engine = state

    @app.exception_handler(NoSessionError)
    async def _no_session(request: Request, exc: NoSessionError):
        return JSONResponse(
            status_code=409, content={"error_code": exc.error_code, "message": str(exc)}
        )

    @app.exception_handler(LimevisError)
    async def _domain_error(request: Request, exc: LimevisError):
        return JSONResponse(
            status_code=400, content={"error_code": exc.error_code, "message": str(exc)}
        )

    @app.get("/api/categories")
    def categories():
        return {"categories": list(state.dataset.category_names)}

    @app.post("/api/execute")
    def execute(payload: dict = Body(...)):
        if "category" not in payload:
            raise InvalidParams("execute needs a 'category' key")
        config = explain_config_from_dict(payload.get("config") or {})
        with state.lock:
            session = execute_category(
                state.dataset,
                payload["category"],
                config,
                state.predictor,
                workers=state.workers,
            )
            state.session = session
            state.session_id += 1
            session_id = state.session_id
        return {
            "session_id": session_id,
            "cells": [
                {"image_id": c.image_id, "row": c.row, "col": c.col, "correct": c.correct}
                for c in overview_cells(session)
            ],
        }

    @app.get("/api/overview")
    def overview(mode: str = "original"):
        if mode not in ("original", "lime"):
            raise InvalidParams(f"mode must be 'original' or 'lime', got {mode!r}")
        session = state.require_session()
        cells = []
        for cell, entry in zip(overview_cells(session), session.entries):
            image = entry.original if mode == "original" else entry.lime_image
            cells.append(
                {
                    "image_id": cell.image_id,
                    "row": cell.row,
                    "col": cell.col,
                    "correct": cell.correct,
                    "ppm_b64": ppm_b64(image),
                }
            )
        return {"cells": cells}

    @app.get("/api/embedding")
    def embedding():
        session = state.require_session()
        points = [
            {
                "image_id": entry.image_id,
                "x": float(x),
                "y": float(y),
                "correct": entry.correct,
            }
            for entry, (x, y) in zip(session.entries, np.asarray(session.embedding.coords))
        ]
        return {"points": points}

    @app.get("/api/image/{image_id}/detail")
    def detail(image_id: int):
        session = state.require_session()
        entry = session.entry(image_id)
        return {
            "image_id": image_id,
            "original": {"ppm_b64": ppm_b64(entry.original)},
            "lime": {"ppm_b64": ppm_b64(entry.lime_image)},
            "boundary_overlay": {"ppm_b64": ppm_b64(boundary_overlay(entry))},
            "spmap": entry.spmap.to_json_dict(),
            "original_probs": entry.explanation.original_probs.tolist(),
            "class_names": list(state.predictor.class_names),
            "explanation": entry.explanation.to_json_dict(session.config),
            "toggle": [int(t) for t in session.toggle_states[image_id]],
            "current_probs": current_prediction(session, image_id).tolist(),
        }

    @app.post("/api/image/{image_id}/toggle")
    def toggle(image_id: int, payload: dict = Body(...)):
        session = state.require_session()
        with state.lock:
            if "superpixel_id" in payload:
                superpixel_id = int(payload["superpixel_id"])
            elif "x" in payload and "y" in payload:
                superpixel_id = pixel_to_superpixel(
                    session, image_id, int(payload["x"]), int(payload["y"])
                )
            else:
                raise InvalidParams("toggle needs either 'superpixel_id' or 'x' and 'y'")
            toggles, masked, probs = toggle_superpixel(session, image_id, superpixel_id)
        return {
            "superpixel_id": superpixel_id,
            "toggle": [int(t) for t in toggles],
            "ppm_b64": ppm_b64(masked),
            "current_probs": probs.tolist(),
        }

    @app.post("/api/image/{image_id}/reset")
    def reset(image_id: int):
        session = state.require_session()
        with state.lock:
            toggles = reset_toggles(session, image_id)
            probs = current_prediction(session, image_id)
        return {"toggle": [int(t) for t in toggles], "current_probs": probs.tolist()}

    if frontend_dir is not None:
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="frontend")

    return app
