"""On-disk home for exam sessions.

Layout under $EXAMLAB_HOME (default ~/.examlab):

    sessions/<session_id>/session.json    controller state + frozen catalog
    sessions/<session_id>/users.json      roster with salted secret digests
    sessions/<session_id>/journal.jsonl   lifecycle journal, one event per line
    sessions/<session_id>/audit.jsonl     login/impersonation audit trail
    sessions/<session_id>/store/          content-addressed snapshot store

Each session dir is self-contained: the price catalog in force is frozen
into session.json at creation, so later catalog edits never change an
existing session's accounting.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from ..backup import SnapshotStore
from ..directory import ROLE_STUDENT, Directory
from ..errors import DuplicateNameError, NotFoundError
from ..pricing import parse_catalog, read_catalog_doc
from ..provider import SimProvider
from ..session import ExamConfig, SessionController

DEFAULT_HOME = "~/.examlab"


def home_path(arg: str | None = None) -> Path:
    return Path(arg or os.environ.get("EXAMLAB_HOME") or DEFAULT_HOME).expanduser()


class ExamLabHome:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)

    def session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def exists(self, session_id: str) -> bool:
        return (self.session_dir(session_id) / "session.json").is_file()

    def list_sessions(self) -> list[dict]:
        out = []
        base = self.root / "sessions"
        for sdir in sorted(base.iterdir()) if base.is_dir() else []:
            f = sdir / "session.json"
            if not f.is_file():
                continue
            ctl = json.loads(f.read_text())["controller"]
            out.append(
                {
                    "session_id": ctl["config"]["session_id"],
                    "title": ctl["config"]["title"],
                    "state": ctl["state"],
                    "students": len(ctl["student_uids"]),
                }
            )
        return out

    def create_session(self, config_doc: dict, roster_text: str) -> "SessionRuntime":
        config = ExamConfig.parse(config_doc)
        if self.exists(config.session_id):
            raise DuplicateNameError(f"session {config.session_id!r} already exists")
        catalog_doc = read_catalog_doc(config.catalog)
        catalog = parse_catalog(catalog_doc)
        directory = Directory()
        directory.import_roster(roster_text)
        students = sorted(u.uid for u in directory.users_with_role(ROLE_STUDENT))
        store = SnapshotStore(self.session_dir(config.session_id) / "store")
        controller = SessionController(config, catalog, SimProvider(), store, students)
        runtime = SessionRuntime(home=self, controller=controller, directory=directory, catalog_doc=catalog_doc)
        runtime.save()
        return runtime

    def load_runtime(self, session_id: str, live: bool = False, time_scale: float = 1.0) -> "SessionRuntime":
        f = self.session_dir(session_id) / "session.json"
        if not f.is_file():
            raise NotFoundError(f"unknown session {session_id!r}")
        doc = json.loads(f.read_text())
        catalog = parse_catalog(doc["catalog"])
        store = SnapshotStore(self.session_dir(session_id) / "store")
        controller = SessionController.from_state(doc["controller"], catalog, store)
        directory = Directory.from_state(json.loads((self.session_dir(session_id) / "users.json").read_text()))
        return SessionRuntime(
            home=self,
            controller=controller,
            directory=directory,
            catalog_doc=doc["catalog"],
            live=live,
            time_scale=time_scale,
        )

    def save_session(self, controller: SessionController, directory: Directory, catalog_doc: dict) -> None:
        sdir = self.session_dir(controller.config.session_id)
        sdir.mkdir(parents=True, exist_ok=True)
        doc = {"controller": controller.to_state(), "catalog": catalog_doc}
        _write_atomic(sdir / "session.json", json.dumps(doc, sort_keys=True, indent=1) + "\n")
        _write_atomic(sdir / "users.json", json.dumps(directory.to_state(), sort_keys=True, indent=1) + "\n")
        journal = "".join(json.dumps(e, sort_keys=True) + "\n" for e in controller.journal)
        _write_atomic(sdir / "journal.jsonl", journal)
        _write_atomic(sdir / "audit.jsonl", directory.export_audit_jsonl())


class SessionRuntime:
    """One loaded session plus its roster, with optional wall-clock drive.

    In live mode the virtual clock tracks wall time (scaled) lazily: every
    ``sync`` maps elapsed wall seconds onto the session clock and advances
    through whatever became due.  Without live mode, time only moves when
    someone calls ``advance``.
    """

    def __init__(
        self,
        home: ExamLabHome,
        controller: SessionController,
        directory: Directory,
        catalog_doc: dict,
        live: bool = False,
        time_scale: float = 1.0,
    ):
        self.home = home
        self.controller = controller
        self.directory = directory
        self.catalog_doc = catalog_doc
        self.live = live
        self.time_scale = time_scale
        self._wall0 = time.monotonic()
        self._sim0 = controller.now
        self._saved_journal_len = len(controller.journal)

    def sync(self) -> None:
        if not self.live:
            return
        target = self._sim0 + (time.monotonic() - self._wall0) * self.time_scale
        if target > self.controller.now:
            self.controller.advance_to(target)
        if len(self.controller.journal) != self._saved_journal_len:
            self.save()

    def save(self) -> None:
        self.home.save_session(self.controller, self.directory, self.catalog_doc)
        self._saved_journal_len = len(self.controller.journal)


def _write_atomic(dest: Path, text: str) -> None:
    tmp = dest.with_suffix(dest.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, dest)
