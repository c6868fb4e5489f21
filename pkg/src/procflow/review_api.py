"""HTTP API backing the human review UI.

The UI is a pure client: every number it shows comes from these endpoints,
with the verdict and accuracy logic living in the verify module.
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import AuthorizationError, NotFoundError, ValidationError
from .verify import ReviewItem, SessionStore, create_review_session, session_accuracy


class CreateSessionBody(BaseModel):
    sample_size: int
    annotators: list[str]
    seed: int
    session_id: str | None = None
    items: list[dict] | None = None  # explicit pool injection (tooling/tests)


class VerdictBody(BaseModel):
    item_id: str
    annotator_id: str
    verdict: str


def load_pool(path: Path) -> dict[str, ReviewItem]:
    if not path.exists():
        return {}
    data = json.loads(path.read_text(encoding="utf-8"))
    pool = {}
    for raw in data.get("items", []):
        pool[raw["id"]] = ReviewItem(item_id=raw["id"], category=raw["category"], payload=raw)
    return pool


def create_app(
    store: SessionStore,
    pool_path: Path | None = None,
    frames_dir: Path | None = None,
    ui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="procflow review")
    pool: dict[str, ReviewItem] = load_pool(pool_path) if pool_path else {}
    injected_path = store.root / "injected_items.json"
    if injected_path.exists():
        for raw in json.loads(injected_path.read_text(encoding="utf-8")):
            pool[raw["id"]] = ReviewItem(item_id=raw["id"], category=raw["category"], payload=raw)

    @app.exception_handler(NotFoundError)
    async def not_found(_req: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(AuthorizationError)
    async def unauthorized(_req: Request, exc: AuthorizationError):
        return JSONResponse(status_code=403, content={"error": str(exc)})

    @app.exception_handler(ValidationError)
    async def invalid(_req: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/sessions")
    def list_sessions():
        sessions = []
        for sid in store.list_sessions():
            session = store.load(sid)
            sessions.append({"session_id": sid, "progress": session.progress()})
        return {"sessions": sessions}

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        if body.items:
            for raw in body.items:
                pool[raw["id"]] = ReviewItem(
                    item_id=raw["id"], category=raw["category"], payload=raw
                )
            existing = (
                json.loads(injected_path.read_text(encoding="utf-8"))
                if injected_path.exists()
                else []
            )
            known = {r["id"] for r in existing}
            existing.extend(r for r in body.items if r["id"] not in known)
            injected_path.write_text(json.dumps(existing, sort_keys=True), encoding="utf-8")
        ordered = [pool[k] for k in sorted(pool)]
        session = create_review_session(
            ordered, body.sample_size, body.annotators, body.seed, session_id=body.session_id
        )
        store.save(session)
        return {"session_id": session.session_id, "progress": session.progress()}

    @app.get("/api/sessions/{session_id}/items")
    def session_items(session_id: str, annotator: str | None = None):
        session = store.load(session_id)
        effective = session.effective_verdicts()
        items = []
        for item_id in session.item_ids:
            if annotator and session.assignments[item_id] != annotator:
                continue
            items.append(
                {
                    "id": item_id,
                    "annotator": session.assignments[item_id],
                    "category": session.categories.get(item_id),
                    "verdict": effective.get(item_id),
                }
            )
        return {"items": items}

    @app.get("/api/items/{item_id}")
    def item_detail(item_id: str):
        if item_id not in pool:
            raise NotFoundError(f"unknown item {item_id!r}")
        return pool[item_id].payload

    @app.post("/api/sessions/{session_id}/verdicts")
    def post_verdict(session_id: str, body: VerdictBody):
        return store.record(session_id, body.item_id, body.annotator_id, body.verdict)

    @app.get("/api/sessions/{session_id}/stats")
    def session_stats(session_id: str):
        session = store.load(session_id)
        return {"categories": session_accuracy(session), "progress": session.progress()}

    if frames_dir is not None and frames_dir.is_dir():
        app.mount("/frames", StaticFiles(directory=str(frames_dir)), name="frames")
    if ui_dir is not None and ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def app_for_workspace(root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(root)
    store = SessionStore(root / "derived" / "sessions")
    return create_app(
        store,
        pool_path=root / "derived" / "compare" / "review_pool.json",
        frames_dir=root / "frames",
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
