"""HTTP annotation service: exposes the labeling loop's task queue,
patch imagery, decision submission and progress over JSON/REST."""

from __future__ import annotations

import io
import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Response

from .loop import AWAITING, COMPLETE, LabelingLoop, resolve_task
from .samples import AnnotationRecord, LandCoverClass

CLASS_MENU = [c.value for c in LandCoverClass]


@dataclass
class Session:
    annotator_id: str
    capabilities: tuple = ("annotate",)


class AnnotationService:
    """Single-writer facade over a LabelingLoop. All mutations are
    serialized through one lock; reads serve consistent snapshots."""

    def __init__(self, loop: LabelingLoop, tokens: dict[str, Session],
                 patch_fn=None):
        self.loop = loop
        self.tokens = dict(tokens)
        self.patch_fn = patch_fn
        self._lock = threading.Lock()
        # (task_id, annotator_id) -> decided class, for idempotent retries
        self._decided: dict[tuple, str] = {}

    def authenticate(self, token: str | None) -> Session:
        if token and token.startswith("Bearer "):
            token = token[len("Bearer "):]
        session = self.tokens.get(token or "")
        if session is None:
            raise HTTPException(status_code=401, detail="bad token")
        return session

    def _current(self):
        state = self.loop.current
        if state is None or state.status != AWAITING:
            return None
        return state

    def next_task(self, session: Session):
        with self._lock:
            state = self._current()
            if state is None:
                raise HTTPException(status_code=409,
                                    detail="no active iteration")
            remaining = [t for t in state.open_tasks if not t.resolved]
            for task in remaining:
                if any(d.annotator_id == session.annotator_id
                       for d in task.decisions):
                    continue
                return {
                    "task_id": task.task_id,
                    "sample_id": task.sample_id,
                    "patch_url": f"/api/patches/{task.sample_id}",
                    "proposed_label": "forest" if task.proposed_label else "non-forest",
                    "class_menu": CLASS_MENU,
                    "guideline_id": "annotation-rules-v1",
                    "remaining": len(remaining),
                }
            return None

    def submit_decision(self, session: Session, task_id: str,
                        decided_class: str):
        try:
            cls = LandCoverClass(decided_class)
        except ValueError:
            raise HTTPException(status_code=400,
                                detail=f"unknown class {decided_class!r}")
        with self._lock:
            state = self.loop.current
            if state is None:
                raise HTTPException(status_code=409,
                                    detail="no active iteration")
            try:
                task = state.task(task_id)
            except KeyError:
                raise HTTPException(status_code=404,
                                    detail=f"unknown task {task_id}")
            key = (task_id, session.annotator_id)
            if key in self._decided:
                if self._decided[key] == cls.value:   # idempotent retry
                    return self._ack(task)
                raise HTTPException(status_code=409,
                                    detail="conflicting duplicate decision")
            if task.resolved:
                raise HTTPException(status_code=409,
                                    detail="task already resolved")
            record = AnnotationRecord(annotator_id=session.annotator_id,
                                      decided_class=cls,
                                      timestamp=time.time())
            try:
                resolve_task(task, record)
            except Exception as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            self._decided[key] = cls.value
            return self._ack(task)

    @staticmethod
    def _ack(task):
        return {"resolved": task.resolved,
                "resolved_label": task.resolved_label,
                "unlabelable": task.unlabelable}

    def progress(self, session: Session):
        with self._lock:
            loop = self.loop
            state = loop.current
            ledger = loop.ledger
            tasks_total = tasks_resolved = 0
            n_cons = ledger.n_consistent_total
            n_incons = ledger.n_inconsistent_total
            iteration_index = len(loop.iterations) - 1 if loop.iterations else -1
            if state is not None and state.status == AWAITING:
                tasks_total = len(state.open_tasks)
                tasks_resolved = sum(1 for t in state.open_tasks if t.resolved)
                n_cons += len(state.consistent_set)
                n_incons += len(state.inconsistent_set)
            n_routed = n_cons + n_incons
            saved = 0.0
            if n_routed:
                saved = 1.0 - (n_cons + 3 * n_incons) / (3 * n_routed)
            excluded = sum(1 for s in loop.store if s.excluded)
            return {
                "iteration_index": iteration_index,
                "tasks_total": tasks_total,
                "tasks_resolved": tasks_resolved,
                "consistent_count": n_cons,
                "inconsistent_count": n_incons,
                "labor_saved_so_far": saved,
                "excluded_count": excluded,
                "complete": state is not None and state.status == COMPLETE
                and not loop.store.unconfirmed(),
            }

    def advance_iteration(self, session: Session):
        if "admin" not in session.capabilities:
            raise HTTPException(status_code=401, detail="admin required")
        with self._lock:
            state = self.loop.current
            if state is not None and state.status == AWAITING:
                unresolved = [t for t in state.open_tasks if not t.resolved]
                if unresolved:
                    raise HTTPException(
                        status_code=409,
                        detail=f"{len(unresolved)} tasks still open")
                self.loop.apply_corrections()
            self._decided.clear()
            new_state = self.loop.run_iteration()
            summary = {
                "iteration_index": new_state.iteration_index,
                "status": new_state.status,
                "batch_size": len(new_state.batch),
                "consistent_count": len(new_state.consistent_set),
                "inconsistent_count": len(new_state.inconsistent_set),
            }
            if new_state.status == COMPLETE:
                summary["ledger"] = self.loop.ledger.report() \
                    if self.loop.ledger.n_samples else {}
            return summary

    def patch_png(self, sample_id: str) -> bytes:
        if self.patch_fn is None:
            raise HTTPException(status_code=404, detail="no patch source")
        try:
            patch = self.patch_fn(sample_id)
        except Exception:
            raise HTTPException(status_code=404,
                                detail=f"unknown sample {sample_id}")
        from PIL import Image
        arr = np.clip(np.asarray(patch, dtype=float), 0, 1)
        img = Image.fromarray((arr * 255).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()


def create_app(service: AnnotationService, static_dir=None) -> FastAPI:
    app = FastAPI(title="consensus-labeler annotation service")

    @app.get("/api/progress")
    def progress(authorization: str | None = Header(default=None)):
        return service.progress(service.authenticate(authorization))

    @app.get("/api/tasks/next")
    def next_task(authorization: str | None = Header(default=None)):
        task = service.next_task(service.authenticate(authorization))
        return task if task is not None else {"task": None}

    @app.post("/api/tasks/{task_id}/decision")
    def decision(task_id: str, body: dict,
                 authorization: str | None = Header(default=None)):
        session = service.authenticate(authorization)
        return service.submit_decision(session, task_id,
                                       body.get("decided_class", ""))

    @app.get("/api/patches/{sample_id}")
    def patch(sample_id: str,
              authorization: str | None = Header(default=None)):
        service.authenticate(authorization)
        return Response(content=service.patch_png(sample_id),
                        media_type="image/png")

    @app.post("/api/iteration/advance")
    def advance(authorization: str | None = Header(default=None)):
        return service.advance_iteration(service.authenticate(authorization))

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
