"""HTTP surface for sessions, messages, event streams, and artifacts."""

from __future__ import annotations

import base64
import queue
import threading

from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.responses import Response, StreamingResponse

from .events import EVENT_TURN_DONE
from .intake import IntakeError
from .session import SessionService

CONTENT_TYPES = {
    "raster_image_b64": "image/png",
    "interactive_html": "text/html; charset=utf-8",
    "stdout": "text/plain; charset=utf-8",
    "stderr": "text/plain; charset=utf-8",
    "error_record": "text/plain; charset=utf-8",
    "file_ref": "chemical/x-pdb",
}


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="bloclaw", version="0.1.0")

    @app.post("/sessions", status_code=201)
    def create_session():
        session = service.create_session()
        return {"id": session.id}

    @app.post("/sessions/{session_id}/messages", status_code=202)
    async def post_message(session_id: str, request: Request):
        try:
            service.get_session(session_id)
        except KeyError:
            raise HTTPException(404, f"no session {session_id}")
        body = await request.body()
        text = body.decode("utf-8", errors="replace")
        worker = threading.Thread(
            target=service.handle_user_message, args=(session_id, text), daemon=True
        )
        worker.start()
        return {"status": "accepted"}

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str):
        try:
            service.get_session(session_id)
        except KeyError:
            raise HTTPException(404, f"no session {session_id}")
        q = service.subscribe(session_id)

        def generate():
            try:
                while True:
                    try:
                        event = q.get(timeout=30)
                    except queue.Empty:
                        break
                    yield event.to_json() + "\n"
                    if event.type == EVENT_TURN_DONE and q.empty():
                        break
            finally:
                service.unsubscribe(session_id, q)

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.post("/sessions/{session_id}/files", status_code=201)
    async def upload_file(session_id: str, file: UploadFile):
        try:
            service.get_session(session_id)
        except KeyError:
            raise HTTPException(404, f"no session {session_id}")
        data = await file.read()
        try:
            mounted = service.mount_file(session_id, file.filename or "upload", data)
        except IntakeError as exc:
            raise HTTPException(422, str(exc))
        return {
            "id": mounted.id,
            "logical_name": mounted.logical_name,
            "media_class": mounted.media_class,
            "byte_size": mounted.byte_size,
        }

    @app.get("/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str):
        artifact = service.artifacts.get(artifact_id)
        if artifact is None:
            raise HTTPException(404, f"no artifact {artifact_id}")
        content_type = CONTENT_TYPES.get(artifact.kind, "application/octet-stream")
        if artifact.kind == "raster_image_b64":
            return Response(base64.b64decode(artifact.payload), media_type=content_type)
        return Response(artifact.payload, media_type=content_type)

    return app
