"""Domain errors with stable machine-readable codes.

Every error carries a ``code`` string that stays fixed regardless of message
wording; the CLI prints it and the HTTP API returns it in the error body.
"""

from __future__ import annotations


class ExamLabError(Exception):
    code = "error"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(ExamLabError):
    """One or more invalid fields in a config or fixture file."""

    code = "invalid-config"

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnknownNodeTypeError(ExamLabError):
    code = "unknown-node-type"


class DuplicateNameError(ExamLabError):
    code = "duplicate-name"


class UnknownHandleError(ExamLabError):
    code = "unknown-handle"


class UnknownNodeError(ExamLabError):
    code = "unknown-node"


class InvalidSpecError(ExamLabError):
    code = "invalid-spec"


class IllegalTransitionError(ExamLabError):
    code = "illegal-transition"


class BackupGuardError(IllegalTransitionError):
    """Release attempted before the final backups are safe."""

    code = "backup-guard"


class CapacityError(ExamLabError):
    code = "capacity"


class FinalBackupError(ExamLabError):
    """Final snapshots missing for some students; session stays in Closing."""

    code = "final-backup-missing"

    def __init__(self, students: list[str]):
        self.students = list(students)
        super().__init__("final snapshot missing for: " + ", ".join(self.students))


class InvalidCredentialsError(ExamLabError):
    code = "invalid-credentials"


class ForbiddenError(ExamLabError):
    code = "forbidden"


class ExpiredSessionError(ExamLabError):
    code = "expired-token"


class UnknownStudentError(ExamLabError):
    code = "unknown-student"


class RosterError(ExamLabError):
    code = "invalid-roster"


class StoreError(ExamLabError):
    code = "store"


class MissingBlobError(StoreError):
    code = "missing-blob"

    def __init__(self, digest: str, path: str | None = None):
        self.digest = digest
        detail = f" (wanted by {path})" if path else ""
        super().__init__(f"blob {digest} missing or corrupt{detail}")


class UnknownSnapshotError(StoreError):
    code = "unknown-snapshot"


class NotFoundError(ExamLabError):
    code = "not-found"
