import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from examlab.backup import FINAL, PERIODIC, BackupPolicy, Snapshot, SnapshotStore, Workspace, diff
from examlab.errors import (
    InvalidSpecError,
    MissingBlobError,
    StoreError,
    UnknownSnapshotError,
)


def ws(**files) -> Workspace:
    w = Workspace()
    for path, data in files.items():
        w.put(path.replace("__", "/"), data)
    return w


# -- workspaces ---------------------------------------------------------------


def test_workspace_path_rules():
    w = Workspace()
    w.put("notes/day1.md", b"x")
    for bad in ("/etc/passwd", "../up", "a/../b", "a//b", "", "a\\b", "./x"):
        with pytest.raises(StoreError):
            w.put(bad, b"x")


def test_workspace_dir_round_trip(tmp_path):
    w = ws(a=b"alpha", b__c=b"nested")
    w.to_dir(tmp_path / "out")
    again = Workspace.from_dir(tmp_path / "out")
    assert again == w
    with pytest.raises(StoreError):
        Workspace.from_dir(tmp_path / "missing")


# -- backup cadence ----------------------------------------------------------------


def test_due_ticks_for_a_two_hour_exam():
    ticks = BackupPolicy(interval_s=900).due_ticks(600.0, 7800.0)
    periodic = [t for t, kind in ticks if kind == PERIODIC]
    finals = [(t, kind) for t, kind in ticks if kind == FINAL]
    assert periodic == [1500.0, 2400.0, 3300.0, 4200.0, 5100.0, 6000.0, 6900.0]
    assert finals == [(7800.0, FINAL)]


def test_periodic_tick_on_the_close_instant_is_dropped():
    # 3 intervals fit exactly; the tick at close collapses into the final
    ticks = BackupPolicy(interval_s=100).due_ticks(0.0, 300.0)
    assert ticks == [(100.0, PERIODIC), (200.0, PERIODIC), (300.0, FINAL)]


def test_policy_validation():
    with pytest.raises(InvalidSpecError):
        BackupPolicy(interval_s=0)
    with pytest.raises(InvalidSpecError):
        BackupPolicy(interval_s=60).due_ticks(10.0, 10.0)
    assert BackupPolicy(interval_s=60, final_on_close=False).due_ticks(0.0, 100.0) == [(60.0, PERIODIC)]


@given(
    open_t=st.floats(min_value=0, max_value=10**6, allow_nan=False),
    duration=st.floats(min_value=1, max_value=10**5),
    interval=st.floats(min_value=1, max_value=10**4),
)
def test_due_ticks_ordering_and_bounds(open_t, duration, interval):
    close_t = open_t + duration
    ticks = BackupPolicy(interval_s=interval).due_ticks(open_t, close_t)
    times = [t for t, _ in ticks]
    assert times == sorted(times)
    assert all(open_t < t <= close_t for t in times)
    assert ticks[-1] == (close_t, FINAL)
    assert all(kind == PERIODIC for _, kind in ticks[:-1])
    assert all(t < close_t for t, kind in ticks if kind == PERIODIC)


# -- snapshot store -----------------------------------------------------------------


def test_capture_restore_round_trip(tmp_path):
    store = SnapshotStore(tmp_path)
    w = ws(a=b"alpha", deep__file=b"\x00\xffbinary")
    snap = store.capture("exam1", "s001", w, t=100.0, kind=PERIODIC)
    assert snap.seq == 1
    assert store.restore("exam1", "s001") == w
    assert store.restore("exam1", "s001", seq=1) == w


def test_sequences_increment_per_student(tmp_path):
    store = SnapshotStore(tmp_path)
    store.capture("exam1", "s001", ws(a=b"1"), t=1.0)
    store.capture("exam1", "s001", ws(a=b"2"), t=2.0)
    s2 = store.capture("exam1", "s002", ws(a=b"1"), t=2.0)
    assert [s.seq for s in store.list_snapshots("exam1", "s001")] == [1, 2]
    assert s2.seq == 1
    assert [(s.student_uid, s.seq) for s in store.list_snapshots("exam1")] == [
        ("s001", 1), ("s001", 2), ("s002", 1),
    ]


def test_identical_content_shares_blobs(tmp_path):
    store = SnapshotStore(tmp_path)
    w = ws(shared=b"same bytes everywhere")
    for uid in ("s001", "s002", "s003"):
        store.capture("exam1", uid, w, t=1.0)
    stats = store.blob_stats()
    assert stats["blob_count"] == 1
    assert stats["total_blob_bytes"] == len(b"same bytes everywhere")


def test_restore_with_missing_blob(tmp_path):
    store = SnapshotStore(tmp_path)
    snap = store.capture("exam1", "s001", ws(a=b"data"), t=1.0)
    digest = snap.files["a"].digest
    (tmp_path / "blobs" / digest[:2] / digest).unlink()
    with pytest.raises(MissingBlobError) as exc:
        store.restore("exam1", "s001")
    assert exc.value.code == "missing-blob"
    assert digest in str(exc.value)


def test_restore_with_corrupted_blob(tmp_path):
    store = SnapshotStore(tmp_path)
    snap = store.capture("exam1", "s001", ws(a=b"data"), t=1.0)
    digest = snap.files["a"].digest
    blob = tmp_path / "blobs" / digest[:2] / digest
    blob.write_bytes(b"dat4")  # same length, flipped byte
    with pytest.raises(MissingBlobError):
        store.restore("exam1", "s001")


def test_unknown_snapshot_and_bad_ids(tmp_path):
    store = SnapshotStore(tmp_path)
    with pytest.raises(UnknownSnapshotError):
        store.load("exam1", "s001", 1)
    with pytest.raises(UnknownSnapshotError):
        store.latest("exam1", "s001")
    assert store.list_snapshots("exam1") == []
    with pytest.raises(StoreError):
        store.capture("../evil", "s001", ws(a=b"x"), t=1.0)
    with pytest.raises(StoreError):
        store.capture("exam1", "a/b", ws(a=b"x"), t=1.0)
    with pytest.raises(InvalidSpecError):
        store.capture("exam1", "s001", ws(a=b"x"), t=1.0, kind="hourly")


def test_manifests_are_stable_json(tmp_path):
    store = SnapshotStore(tmp_path)
    store.capture("exam1", "s001", ws(b=b"2", a=b"1"), t=1.0, kind=FINAL)
    manifest = tmp_path / "snapshots" / "exam1" / "s001" / "0001.json"
    doc = json.loads(manifest.read_text())
    assert doc["kind"] == FINAL
    assert list(doc["files"]) == ["a", "b"]
    assert Snapshot.from_dict(doc).files["a"].size == 1


def test_diff(tmp_path):
    store = SnapshotStore(tmp_path)
    old = store.capture("e", "s", ws(keep=b"same", change=b"v1", gone=b"bye"), t=1.0)
    new = store.capture("e", "s", ws(keep=b"same", change=b"v2", new=b"hi"), t=2.0)
    assert diff(old, new) == {"added": ["new"], "removed": ["gone"], "changed": ["change"]}


@settings(max_examples=30)
@given(
    files=st.dictionaries(
        st.from_regex(r"[a-z]{1,8}(/[a-z]{1,8}){0,2}", fullmatch=True),
        st.binary(min_size=0, max_size=200),
        min_size=0,
        max_size=8,
    )
)
def test_round_trip_any_workspace(tmp_path_factory, files):
    root = tmp_path_factory.mktemp("store")
    store = SnapshotStore(root)
    w = Workspace(dict(files))
    store.capture("exam1", "s001", w, t=1.0)
    assert store.restore("exam1", "s001") == w
