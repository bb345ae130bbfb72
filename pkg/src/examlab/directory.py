"""Participant directory: roster import, credential checks, bearer tokens.

Secrets are stored as salted PBKDF2 digests.  A failed lookup and a wrong
secret both burn one PBKDF2 evaluation and raise the same error, so response
timing and error shape do not reveal which uids exist.  Issued tokens are
held in memory only; restarting the service invalidates them.
"""

from __future__ import annotations

import csv
import hashlib
import hmac
import io
import json
import secrets
from dataclasses import dataclass

from .errors import (
    ExpiredSessionError,
    ForbiddenError,
    InvalidCredentialsError,
    RosterError,
    UnknownStudentError,
)

ROLE_STUDENT = "student"
ROLE_TEACHER = "teacher"
ROLES = (ROLE_STUDENT, ROLE_TEACHER)

_ROSTER_COLUMNS = ("uid", "full_name", "role", "initial_secret")


@dataclass(frozen=True)
class User:
    uid: str
    full_name: str
    role: str
    salt_hex: str
    secret_hex: str


@dataclass(frozen=True)
class AuthSession:
    token: str
    uid: str
    role: str
    issued_at: float
    expires_at: float
    impersonated_by: str | None = None


@dataclass(frozen=True)
class Access:
    """An authorized caller: the effective identity attached to one token."""

    uid: str
    role: str
    token: str
    impersonated_by: str | None = None

    def can_act_for(self, target_uid: str) -> bool:
        return self.role == ROLE_TEACHER or self.uid == target_uid

    def require_teacher(self) -> None:
        if self.role != ROLE_TEACHER:
            raise ForbiddenError(f"{self.uid!r} is not a teacher")

    def require_actor_for(self, target_uid: str) -> None:
        if not self.can_act_for(target_uid):
            raise ForbiddenError(f"{self.uid!r} may not act for {target_uid!r}")


class Directory:
    def __init__(self, token_ttl_s: float = 28800.0, pbkdf2_iterations: int = 20_000):
        self.token_ttl_s = token_ttl_s
        self.pbkdf2_iterations = pbkdf2_iterations
        self._users: dict[str, User] = {}
        self._sessions: dict[str, AuthSession] = {}
        self._audit: list[dict] = []
        # stand-in digest evaluated for unknown uids to balance timing
        self._dummy = self._digest("unset", b"\x00" * 16)

    # -- roster ---------------------------------------------------------------

    def add_user(self, uid: str, full_name: str, role: str, secret: str) -> User:
        if not uid:
            raise RosterError("uid must be nonempty")
        if role not in ROLES:
            raise RosterError(f"role must be one of {ROLES}, not {role!r}")
        if uid in self._users:
            raise RosterError(f"duplicate uid {uid!r}")
        if not secret:
            raise RosterError(f"uid {uid!r} has an empty secret")
        salt = secrets.token_bytes(16)
        user = User(uid=uid, full_name=full_name, role=role, salt_hex=salt.hex(), secret_hex=self._digest(secret, salt).hex())
        self._users[uid] = user
        return user

    def import_roster(self, text: str) -> int:
        """Load users from csv with columns uid,full_name,role,initial_secret."""
        reader = csv.DictReader(io.StringIO(text))
        got = tuple(reader.fieldnames or ())
        if got != _ROSTER_COLUMNS:
            raise RosterError(f"roster columns must be {','.join(_ROSTER_COLUMNS)}, got {','.join(got) or '(none)'}")
        count = 0
        for lineno, row in enumerate(reader, start=2):
            if None in row.values() or None in row:
                raise RosterError(f"roster line {lineno}: wrong number of columns")
            try:
                self.add_user(row["uid"].strip(), row["full_name"].strip(), row["role"].strip(), row["initial_secret"])
            except RosterError as exc:
                raise RosterError(f"roster line {lineno}: {exc}") from None
            count += 1
        if count == 0:
            raise RosterError("roster has no data rows")
        return count

    def user(self, uid: str) -> User:
        try:
            return self._users[uid]
        except KeyError:
            raise UnknownStudentError(f"unknown uid {uid!r}") from None

    def users_with_role(self, role: str) -> list[User]:
        return [u for u in self._users.values() if u.role == role]

    # -- authentication ---------------------------------------------------------

    def authenticate(self, uid: str, secret: str, now: float) -> str:
        user = self._users.get(uid)
        if user is None:
            # spend the same work as a real check before failing
            hmac.compare_digest(self._digest(secret, b"\x00" * 16), self._dummy)
            self._record("login-failed", uid, {"reason": "invalid"}, now)
            raise InvalidCredentialsError("invalid uid or secret")
        candidate = self._digest(secret, bytes.fromhex(user.salt_hex))
        if not hmac.compare_digest(candidate, bytes.fromhex(user.secret_hex)):
            self._record("login-failed", uid, {"reason": "invalid"}, now)
            raise InvalidCredentialsError("invalid uid or secret")
        token = secrets.token_urlsafe(32)
        self._sessions[token] = AuthSession(
            token=token, uid=uid, role=user.role, issued_at=now, expires_at=now + self.token_ttl_s
        )
        self._record("login", uid, {"role": user.role}, now)
        return token

    def authorize(self, token: str, now: float) -> Access:
        sess = self._sessions.get(token)
        if sess is None:
            raise InvalidCredentialsError("unknown or revoked token")
        if now > sess.expires_at:
            raise ExpiredSessionError("token has expired")
        return Access(uid=sess.uid, role=sess.role, token=token, impersonated_by=sess.impersonated_by)

    def impersonate(self, teacher_token: str, student_uid: str, now: float) -> str:
        teacher = self.authorize(teacher_token, now)
        teacher.require_teacher()
        student = self.user(student_uid)
        if student.role != ROLE_STUDENT:
            raise ForbiddenError(f"{student_uid!r} is not a student")
        token = secrets.token_urlsafe(32)
        self._sessions[token] = AuthSession(
            token=token,
            uid=student.uid,
            role=ROLE_STUDENT,
            issued_at=now,
            expires_at=now + self.token_ttl_s,
            impersonated_by=teacher.uid,
        )
        self._record("impersonate", teacher.uid, {"as": student.uid}, now)
        return token

    def revoke(self, token: str, now: float) -> None:
        sess = self._sessions.pop(token, None)
        if sess is not None:
            self._record("logout", sess.uid, {}, now)

    # -- audit --------------------------------------------------------------------

    def audit_events(self) -> list[dict]:
        return list(self._audit)

    def export_audit_jsonl(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self._audit) + ("\n" if self._audit else "")

    # -- persistence ----------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "token_ttl_s": self.token_ttl_s,
            "pbkdf2_iterations": self.pbkdf2_iterations,
            "users": [
                {"uid": u.uid, "full_name": u.full_name, "role": u.role, "salt_hex": u.salt_hex, "secret_hex": u.secret_hex}
                for u in self._users.values()
            ],
            "audit": list(self._audit),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Directory":
        d = cls(token_ttl_s=state["token_ttl_s"], pbkdf2_iterations=state["pbkdf2_iterations"])
        for u in state["users"]:
            d._users[u["uid"]] = User(**u)
        d._audit = list(state["audit"])
        return d

    # -- internals ------------------------------------------------------------------

    def _digest(self, secret: str, salt: bytes) -> bytes:
        return hashlib.pbkdf2_hmac("sha256", secret.encode(), salt, self.pbkdf2_iterations)

    def _record(self, kind: str, actor: str, detail: dict, now: float) -> None:
        self._audit.append({"t": now, "kind": kind, "actor": actor, "detail": detail})
