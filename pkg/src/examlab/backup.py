"""Workspace snapshots in a content-addressed store.

Every file body is stored once under its sha256 digest; snapshots are JSON
manifests mapping workspace paths to digests.  Identical content across
students or snapshots shares blobs, so periodic full backups cost little
more than the changed bytes.  Reads verify the digest, so a corrupted blob
is reported as missing rather than silently restored.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidSpecError, MissingBlobError, StoreError, UnknownSnapshotError

PERIODIC = "periodic"
FINAL = "final"
MANUAL = "manual"
SNAPSHOT_KINDS = (PERIODIC, FINAL, MANUAL)

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def _check_rel_path(path: str) -> str:
    if not path or path.startswith("/") or "\\" in path:
        raise StoreError(f"workspace path {path!r} must be relative and use forward slashes")
    parts = path.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise StoreError(f"workspace path {path!r} has empty or dot segments")
    return path


def _check_id(value: str, what: str) -> str:
    if not _ID_RE.match(value or ""):
        raise StoreError(f"{what} {value!r} is not a safe path component")
    return value


@dataclass
class Workspace:
    """A student's files as an in-memory tree of relative path -> bytes."""

    files: dict[str, bytes] = field(default_factory=dict)

    def __post_init__(self):
        for path in self.files:
            _check_rel_path(path)

    def put(self, path: str, data: bytes) -> None:
        self.files[_check_rel_path(path)] = bytes(data)

    def get(self, path: str) -> bytes:
        return self.files[path]

    def paths(self) -> list[str]:
        return sorted(self.files)

    @property
    def total_bytes(self) -> int:
        return sum(len(b) for b in self.files.values())

    @classmethod
    def from_dir(cls, root: str | Path) -> "Workspace":
        root = Path(root)
        if not root.is_dir():
            raise StoreError(f"{root} is not a directory")
        ws = cls()
        for p in sorted(root.rglob("*")):
            if p.is_file() and not p.is_symlink():
                ws.put(p.relative_to(root).as_posix(), p.read_bytes())
        return ws

    def to_dir(self, root: str | Path) -> None:
        root = Path(root)
        for path, data in sorted(self.files.items()):
            dest = root / path
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(data)


@dataclass(frozen=True)
class FileEntry:
    digest: str
    size: int


@dataclass(frozen=True)
class Snapshot:
    session_id: str
    student_uid: str
    seq: int
    kind: str
    t: float
    files: dict[str, FileEntry]

    @property
    def total_bytes(self) -> int:
        return sum(e.size for e in self.files.values())

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "student_uid": self.student_uid,
            "seq": self.seq,
            "kind": self.kind,
            "t": self.t,
            "files": {path: {"digest": e.digest, "size": e.size} for path, e in sorted(self.files.items())},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Snapshot":
        return cls(
            session_id=doc["session_id"],
            student_uid=doc["student_uid"],
            seq=doc["seq"],
            kind=doc["kind"],
            t=doc["t"],
            files={path: FileEntry(e["digest"], e["size"]) for path, e in doc["files"].items()},
        )


def diff(old: Snapshot, new: Snapshot) -> dict[str, list[str]]:
    added = sorted(set(new.files) - set(old.files))
    removed = sorted(set(old.files) - set(new.files))
    changed = sorted(p for p in set(old.files) & set(new.files) if old.files[p].digest != new.files[p].digest)
    return {"added": added, "removed": removed, "changed": changed}


@dataclass(frozen=True)
class BackupPolicy:
    interval_s: float = 900.0
    final_on_close: bool = True

    def __post_init__(self):
        if self.interval_s <= 0:
            raise InvalidSpecError("backup interval_s must be > 0")

    def due_ticks(self, open_t: float, close_t: float) -> list[tuple[float, str]]:
        """Backup times for one exam window: periodic strictly inside, final at close.

        A periodic tick landing exactly on close_t is dropped; the final
        backup covers that instant.
        """
        if close_t <= open_t:
            raise InvalidSpecError("close_t must be after open_t")
        ticks = []
        k = 1
        while open_t + k * self.interval_s < close_t:
            ticks.append((open_t + k * self.interval_s, PERIODIC))
            k += 1
        if self.final_on_close:
            ticks.append((close_t, FINAL))
        return ticks


class SnapshotStore:
    """Disk layout: blobs/<d2>/<digest> for content, snapshots/<session>/<student>/<seq>.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        (self.root / "snapshots").mkdir(parents=True, exist_ok=True)

    # -- write ----------------------------------------------------------------

    def capture(self, session_id: str, student_uid: str, workspace: Workspace, t: float, kind: str = MANUAL) -> Snapshot:
        if kind not in SNAPSHOT_KINDS:
            raise InvalidSpecError(f"snapshot kind must be one of {SNAPSHOT_KINDS}, not {kind!r}")
        _check_id(session_id, "session_id")
        _check_id(student_uid, "student_uid")
        entries = {}
        for path, data in sorted(workspace.files.items()):
            digest = hashlib.sha256(data).hexdigest()
            self._write_blob(digest, data)
            entries[path] = FileEntry(digest=digest, size=len(data))
        seq = self._next_seq(session_id, student_uid)
        snap = Snapshot(session_id=session_id, student_uid=student_uid, seq=seq, kind=kind, t=t, files=entries)
        dest = self._manifest_path(session_id, student_uid, seq)
        dest.parent.mkdir(parents=True, exist_ok=True)
        tmp = dest.with_suffix(".tmp")
        tmp.write_text(json.dumps(snap.as_dict(), sort_keys=True, indent=1) + "\n")
        os.replace(tmp, dest)
        return snap

    # -- read -----------------------------------------------------------------

    def list_snapshots(self, session_id: str, student_uid: str | None = None) -> list[Snapshot]:
        base = self.root / "snapshots" / _check_id(session_id, "session_id")
        if not base.is_dir():
            return []
        students = [_check_id(student_uid, "student_uid")] if student_uid else sorted(p.name for p in base.iterdir() if p.is_dir())
        out = []
        for uid in students:
            sdir = base / uid
            if not sdir.is_dir():
                continue
            for mf in sorted(sdir.glob("*.json")):
                out.append(Snapshot.from_dict(json.loads(mf.read_text())))
        out.sort(key=lambda s: (s.student_uid, s.seq))
        return out

    def load(self, session_id: str, student_uid: str, seq: int) -> Snapshot:
        path = self._manifest_path(_check_id(session_id, "session_id"), _check_id(student_uid, "student_uid"), seq)
        if not path.is_file():
            raise UnknownSnapshotError(f"no snapshot {seq} for {student_uid!r} in session {session_id!r}")
        return Snapshot.from_dict(json.loads(path.read_text()))

    def latest(self, session_id: str, student_uid: str) -> Snapshot:
        snaps = self.list_snapshots(session_id, student_uid)
        if not snaps:
            raise UnknownSnapshotError(f"no snapshots for {student_uid!r} in session {session_id!r}")
        return snaps[-1]

    def restore(self, session_id: str, student_uid: str, seq: int | None = None) -> Workspace:
        snap = self.load(session_id, student_uid, seq) if seq is not None else self.latest(session_id, student_uid)
        ws = Workspace()
        for path, entry in sorted(snap.files.items()):
            ws.put(path, self._read_blob(entry.digest))
        return ws

    # -- stats ------------------------------------------------------------------

    def blob_stats(self) -> dict:
        count = 0
        total = 0
        for p in (self.root / "blobs").rglob("*"):
            if p.is_file():
                count += 1
                total += p.stat().st_size
        return {"blob_count": count, "total_blob_bytes": total}

    # -- internals ----------------------------------------------------------------

    def _blob_path(self, digest: str) -> Path:
        return self.root / "blobs" / digest[:2] / digest

    def _manifest_path(self, session_id: str, student_uid: str, seq: int) -> Path:
        return self.root / "snapshots" / session_id / student_uid / f"{seq:04d}.json"

    def _write_blob(self, digest: str, data: bytes) -> None:
        dest = self._blob_path(digest)
        if dest.exists():
            return  # content-addressed: same digest, same bytes
        dest.parent.mkdir(parents=True, exist_ok=True)
        tmp = dest.with_name(dest.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, dest)

    def _read_blob(self, digest: str) -> bytes:
        path = self._blob_path(digest)
        if not path.is_file():
            raise MissingBlobError(digest, path=str(path))
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != digest:
            # corrupt on disk: the addressed content effectively no longer exists
            raise MissingBlobError(digest, path=str(path))
        return data

    def _next_seq(self, session_id: str, student_uid: str) -> int:
        sdir = self.root / "snapshots" / session_id / student_uid
        if not sdir.is_dir():
            return 1
        seqs = [int(p.stem) for p in sdir.glob("*.json") if p.stem.isdigit()]
        return max(seqs, default=0) + 1
