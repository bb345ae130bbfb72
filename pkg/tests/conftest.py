import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from examlab.backup import SnapshotStore
from examlab.pricing import load_catalog
from examlab.provider import SimProvider
from examlab.session import ExamConfig, SessionController


def config_doc(**overrides) -> dict:
    doc = {
        "session_id": "exam1",
        "title": "Test exam",
        "region": "us-central1",
        "node_type": "n1-standard-1",
        "open_at_s": 600,
        "duration_s": 7200,
        "backup_interval_s": 900,
        "student_pod": {"cpu_millis": 900, "ram_mb": 3200},
        "allowlist": ["docs.python.org"],
    }
    doc.update(overrides)
    return doc


def roster_csv(students: int = 3, teachers: int = 1) -> str:
    lines = ["uid,full_name,role,initial_secret"]
    for i in range(1, teachers + 1):
        lines.append(f"t{i:02d},Teacher {i},teacher,pw-t{i:02d}")
    for i in range(1, students + 1):
        lines.append(f"s{i:03d},Student {i},student,pw-s{i:03d}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def catalog():
    return load_catalog("gcp-us-central1")


@pytest.fixture
def make_controller(tmp_path, catalog):
    """Build a SessionController on a throwaway store, bypassing the home dir."""

    counter = {"n": 0}

    def build(students: int = 3, **config_overrides) -> SessionController:
        counter["n"] += 1
        overrides = {"session_id": f"exam{counter['n']}", **config_overrides}
        config = ExamConfig.parse(config_doc(**overrides))
        store = SnapshotStore(tmp_path / f"store{counter['n']}")
        uids = [f"s{i:03d}" for i in range(1, students + 1)]
        return SessionController(config, catalog, SimProvider(), store, uids)

    return build
