"""HTTP JSON API over the session home.

Reads (status, journal, cost, scripts) are open to the local network the
server binds to; anything that mutates a session or touches a student's
files requires a bearer token from the per-session login endpoint.  Students
can only reach their own workspace and snapshots, teachers everything.
Error bodies are {"error": <stable code>, "message": ...}.
"""

from __future__ import annotations

from base64 import b64decode, b64encode

from fastapi import FastAPI, Header
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import __version__
from ..directory import ROLE_TEACHER, Access
from ..errors import ConfigError, ExamLabError, FinalBackupError
from ..pricing import budget_total_cents, format_usd
from ..provider import render_lifecycle_scripts
from .home import ExamLabHome, SessionRuntime

_STATUS_BY_CODE = {
    "invalid-credentials": 401,
    "missing-token": 401,
    "expired-token": 401,
    "forbidden": 403,
    "not-found": 404,
    "unknown-student": 404,
    "unknown-handle": 404,
    "unknown-node": 404,
    "unknown-snapshot": 404,
    "unknown-node-type": 404,
    "illegal-transition": 409,
    "backup-guard": 409,
    "final-backup-missing": 409,
    "duplicate-name": 409,
    "capacity": 409,
    "invalid-config": 422,
    "invalid-spec": 422,
    "invalid-roster": 422,
    "invalid-body": 422,
    "store": 500,
    "missing-blob": 500,
}


class LoginBody(BaseModel):
    uid: str
    secret: str


class ImpersonateBody(BaseModel):
    uid: str


class AdvanceBody(BaseModel):
    to_s: float | None = None
    by_s: float | None = None


class ScaleBody(BaseModel):
    target: int


class BackupBody(BaseModel):
    uid: str | None = None


class ReleaseBody(BaseModel):
    force: bool = False
    reason: str = "operator override"


class FilePutBody(BaseModel):
    path: str
    content_b64: str


def build_app(home: ExamLabHome, live: bool = False, time_scale: float = 1.0, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="examlab", version=__version__)
    runtimes: dict[str, SessionRuntime] = {}

    def rt_for(session_id: str) -> SessionRuntime:
        rt = runtimes.get(session_id)
        if rt is None:
            rt = home.load_runtime(session_id, live=live, time_scale=time_scale)
            runtimes[session_id] = rt
        rt.sync()
        return rt

    def bearer(rt: SessionRuntime, authorization: str | None) -> Access:
        if not authorization or not authorization.startswith("Bearer "):
            raise ExamLabError("bearer token required", code="missing-token")
        return rt.directory.authorize(authorization[len("Bearer "):], rt.controller.now)

    @app.exception_handler(ExamLabError)
    async def _domain_error(request, exc: ExamLabError):
        body = {"error": exc.code, "message": str(exc)}
        if isinstance(exc, FinalBackupError):
            body["students"] = exc.students
        if isinstance(exc, ConfigError):
            body["errors"] = exc.errors
        return JSONResponse(status_code=_STATUS_BY_CODE.get(exc.code, 400), content=body)

    @app.exception_handler(RequestValidationError)
    async def _invalid_body(request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": "invalid-body", "message": str(exc)})

    # -- open reads -----------------------------------------------------------

    @app.get("/v1/healthz")
    async def healthz():
        return {"ok": True, "version": __version__, "live": live, "time_scale": time_scale}

    @app.get("/v1/sessions")
    async def list_sessions():
        rows = home.list_sessions()
        for row in rows:
            rt = runtimes.get(row["session_id"])
            if rt is not None:
                rt.sync()
                row["state"] = rt.controller.state.value
        return {"sessions": rows}

    @app.get("/v1/sessions/{session_id}")
    async def session_status(session_id: str):
        return rt_for(session_id).controller.status()

    @app.get("/v1/sessions/{session_id}/journal")
    async def session_journal(session_id: str):
        return {"entries": rt_for(session_id).controller.journal}

    @app.get("/v1/sessions/{session_id}/allowlist")
    async def session_allowlist(session_id: str):
        manifest = rt_for(session_id).controller.allowlist_manifest()
        return {**manifest.as_dict(), "text": manifest.as_text()}

    @app.get("/v1/sessions/{session_id}/scripts")
    async def session_scripts(session_id: str, batch: bool = False):
        ctl = rt_for(session_id).controller
        return {"scripts": render_lifecycle_scripts(ctl.cluster_spec(), batch_wrapper=batch)}

    @app.get("/v1/sessions/{session_id}/cost")
    async def session_cost(session_id: str):
        ctl = rt_for(session_id).controller
        planned = ctl.planned_estimate()
        accrued = ctl.accrued_estimate()
        budget = budget_total_cents(accrued if accrued else planned)
        return {
            "planned": planned.as_dict(),
            "accrued": accrued.as_dict() if accrued else None,
            "budget_total_cents": budget,
            "budget_total_usd": format_usd(budget),
        }

    # -- authenticated reads ------------------------------------------------------

    @app.get("/v1/sessions/{session_id}/snapshots")
    async def list_snapshots(session_id: str, uid: str | None = None, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        acc = bearer(rt, authorization)
        if uid is None and acc.role != ROLE_TEACHER:
            uid = acc.uid
        if uid is not None:
            acc.require_actor_for(uid)
        snaps = rt.controller.store.list_snapshots(session_id, uid)
        return {
            "snapshots": [
                {"uid": s.student_uid, "seq": s.seq, "kind": s.kind, "t": s.t, "files": len(s.files), "bytes": s.total_bytes}
                for s in snaps
            ]
        }

    @app.get("/v1/sessions/{session_id}/workspaces/{uid}")
    async def workspace_listing(session_id: str, uid: str, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_actor_for(uid)
        ws = rt.controller.workspace(uid)
        return {"uid": uid, "files": [{"path": p, "size": len(ws.files[p])} for p in ws.paths()]}

    @app.get("/v1/sessions/{session_id}/workspaces/{uid}/files")
    async def workspace_file(session_id: str, uid: str, path: str, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_actor_for(uid)
        ws = rt.controller.workspace(uid)
        if path not in ws.files:
            raise ExamLabError(f"no file {path!r} in workspace {uid!r}", code="not-found")
        return {"uid": uid, "path": path, "content_b64": b64encode(ws.files[path]).decode()}

    # -- auth -----------------------------------------------------------------------

    @app.post("/v1/sessions/{session_id}/login")
    async def login(session_id: str, body: LoginBody):
        rt = rt_for(session_id)
        now = rt.controller.now
        token = rt.directory.authenticate(body.uid, body.secret, now)
        acc = rt.directory.authorize(token, now)
        rt.save()
        return {"token": token, "uid": acc.uid, "role": acc.role, "expires_at_s": now + rt.directory.token_ttl_s}

    @app.post("/v1/sessions/{session_id}/impersonate")
    async def impersonate(session_id: str, body: ImpersonateBody, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        acc = bearer(rt, authorization)
        acc.require_teacher()
        token = rt.directory.impersonate(acc.token, body.uid, rt.controller.now)
        rt.save()
        return {"token": token, "acting_as": body.uid, "teacher": acc.uid}

    # -- mutations --------------------------------------------------------------------

    def _mutate(rt: SessionRuntime, op):
        try:
            return op()
        finally:
            rt.save()

    @app.post("/v1/sessions/{session_id}/provision")
    async def provision(session_id: str, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_teacher()
        handle = _mutate(rt, rt.controller.provision)
        return {"cluster": handle, "state": rt.controller.state.value}

    @app.post("/v1/sessions/{session_id}/advance")
    async def advance(session_id: str, body: AdvanceBody, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_teacher()
        if (body.to_s is None) == (body.by_s is None):
            raise ExamLabError("provide exactly one of to_s or by_s", code="invalid-body")
        ctl = rt.controller
        _mutate(rt, lambda: ctl.advance_to(body.to_s) if body.to_s is not None else ctl.advance(body.by_s))
        return {"now_s": ctl.now, "state": ctl.state.value}

    @app.post("/v1/sessions/{session_id}/scale")
    async def scale(session_id: str, body: ScaleBody, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_teacher()
        _mutate(rt, lambda: rt.controller.scale(body.target))
        return {"target": body.target, "state": rt.controller.state.value}

    @app.post("/v1/sessions/{session_id}/backups")
    async def backup_now(session_id: str, body: BackupBody, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        acc = bearer(rt, authorization)
        uid = body.uid
        if uid is None and acc.role != ROLE_TEACHER:
            uid = acc.uid
        if uid is not None:
            acc.require_actor_for(uid)
        snaps = _mutate(rt, lambda: rt.controller.backup_now(uid))
        return {"snapshots": [{"uid": s.student_uid, "seq": s.seq, "kind": s.kind} for s in snaps]}

    @app.post("/v1/sessions/{session_id}/close")
    async def close(session_id: str, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_teacher()
        _mutate(rt, rt.controller.close_exam)
        return {"state": rt.controller.state.value}

    @app.post("/v1/sessions/{session_id}/release")
    async def release(session_id: str, body: ReleaseBody | None = None, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_teacher()
        ctl = rt.controller
        body = body or ReleaseBody()
        _mutate(rt, lambda: ctl.force_release(body.reason) if body.force else ctl.release())
        return {"state": ctl.state.value, "released_at_s": ctl.released_at}

    @app.put("/v1/sessions/{session_id}/workspaces/{uid}/files")
    async def put_file(session_id: str, uid: str, body: FilePutBody, authorization: str | None = Header(default=None)):
        rt = rt_for(session_id)
        bearer(rt, authorization).require_actor_for(uid)
        try:
            data = b64decode(body.content_b64, validate=True)
        except Exception:
            raise ExamLabError("content_b64 is not valid base64", code="invalid-body") from None
        _mutate(rt, lambda: rt.controller.write_student_file(uid, body.path, data))
        return {"uid": uid, "path": body.path, "size": len(data)}

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
