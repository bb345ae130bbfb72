from base64 import b64encode

import pytest
from fastapi.testclient import TestClient

from conftest import config_doc, roster_csv
from examlab.control.api import build_app
from examlab.control.home import ExamLabHome


@pytest.fixture
def home(tmp_path):
    h = ExamLabHome(tmp_path / "home")
    h.create_session(config_doc(session_id="api1"), roster_csv(students=2))
    return h


@pytest.fixture
def client(home):
    return TestClient(build_app(home))


def login(client, uid, secret=None):
    r = client.post(f"/v1/sessions/api1/login", json={"uid": uid, "secret": secret or f"pw-{uid}"})
    assert r.status_code == 200, r.text
    return r.json()["token"]


def auth(token):
    return {"Authorization": f"Bearer {token}"}


def open_exam(client, teacher_token):
    client.post("/v1/sessions/api1/provision", headers=auth(teacher_token))
    r = client.post("/v1/sessions/api1/advance", json={"to_s": 600}, headers=auth(teacher_token))
    assert r.json()["state"] == "Open"


# -- open reads -------------------------------------------------------------------


def test_open_reads(client):
    assert client.get("/v1/healthz").json()["ok"] is True

    rows = client.get("/v1/sessions").json()["sessions"]
    assert rows == [{"session_id": "api1", "title": "Test exam", "state": "Planned", "students": 2}]

    status = client.get("/v1/sessions/api1").json()
    assert status["state"] == "Planned" and status["cluster"] is None

    journal = client.get("/v1/sessions/api1/journal").json()["entries"]
    assert journal[0]["kind"] == "plan"

    allow = client.get("/v1/sessions/api1/allowlist").json()
    assert allow["entries"] == ["docs.python.org"]
    assert allow["text"].endswith("docs.python.org\n")

    scripts = client.get("/v1/sessions/api1/scripts").json()["scripts"]
    assert sorted(scripts) == ["create", "delete", "scale-down", "scale-up"]
    assert scripts["create"].startswith("gcloud container clusters create examlab-api1")
    batch = client.get("/v1/sessions/api1/scripts", params={"batch": True}).json()["scripts"]
    assert batch["create"].startswith("ECHO OFF")

    cost = client.get("/v1/sessions/api1/cost").json()
    assert cost["accrued"] is None
    assert cost["budget_total_cents"] == cost["planned"]["total_cents"] + 400

    assert client.get("/v1/sessions/nope").status_code == 404
    assert client.get("/v1/sessions/nope").json()["error"] == "not-found"


# -- login ----------------------------------------------------------------------


def test_login_and_token_checks(client):
    token = login(client, "s001")
    r = client.get("/v1/sessions/api1/workspaces/s001", headers=auth(token))
    assert r.status_code == 200

    r = client.post("/v1/sessions/api1/login", json={"uid": "s001", "secret": "wrong"})
    assert r.status_code == 401
    assert r.json()["error"] == "invalid-credentials"
    r = client.post("/v1/sessions/api1/login", json={"uid": "ghost", "secret": "x"})
    assert r.status_code == 401
    assert r.json()["error"] == "invalid-credentials"

    r = client.get("/v1/sessions/api1/workspaces/s001")
    assert r.status_code == 401 and r.json()["error"] == "missing-token"
    r = client.get("/v1/sessions/api1/workspaces/s001", headers={"Authorization": "Basic abc"})
    assert r.status_code == 401 and r.json()["error"] == "missing-token"
    r = client.get("/v1/sessions/api1/workspaces/s001", headers=auth("forged"))
    assert r.status_code == 401 and r.json()["error"] == "invalid-credentials"

    r = client.post("/v1/sessions/api1/login", json={"uid": "s001"})
    assert r.status_code == 422 and r.json()["error"] == "invalid-body"


def test_access_matrix_valid_tokens(client):
    student = login(client, "s001")
    teacher = login(client, "t01")

    # students reach their own workspace, not a classmate's
    assert client.get("/v1/sessions/api1/workspaces/s001", headers=auth(student)).status_code == 200
    r = client.get("/v1/sessions/api1/workspaces/s002", headers=auth(student))
    assert r.status_code == 403 and r.json()["error"] == "forbidden"

    # teachers reach every workspace
    assert client.get("/v1/sessions/api1/workspaces/s001", headers=auth(teacher)).status_code == 200
    assert client.get("/v1/sessions/api1/workspaces/s002", headers=auth(teacher)).status_code == 200

    # lifecycle verbs are teacher-only
    for path, body in (("advance", {"by_s": 1}), ("scale", {"target": 5})):
        r = client.post(f"/v1/sessions/api1/{path}", json=body, headers=auth(student))
        assert r.status_code == 403, path
    assert client.post("/v1/sessions/api1/close", headers=auth(student)).status_code == 403
    assert client.post("/v1/sessions/api1/release", headers=auth(student)).status_code == 403
    assert client.post("/v1/sessions/api1/provision", headers=auth(student)).status_code == 403


def test_access_matrix_expired_tokens(client):
    teacher = login(client, "t01")
    student = login(client, "s001")
    open_exam(client, teacher)

    # jump past the token ttl (8h); both tokens die, own or not
    r = client.post("/v1/sessions/api1/advance", json={"by_s": 30000}, headers=auth(teacher))
    assert r.status_code == 200
    for token, uid in ((student, "s001"), (student, "s002"), (teacher, "s001"), (teacher, "s002")):
        r = client.get(f"/v1/sessions/api1/workspaces/{uid}", headers=auth(token))
        assert r.status_code == 401 and r.json()["error"] == "expired-token"

    # fresh login works again afterwards
    fresh = login(client, "s001")
    assert client.get("/v1/sessions/api1/workspaces/s001", headers=auth(fresh)).status_code == 200


# -- workspaces and snapshots ----------------------------------------------------


def test_workspace_file_round_trip(client):
    student = login(client, "s001")
    teacher = login(client, "t01")
    body = {"path": "main.py", "content_b64": b64encode(b"print(1)\n").decode()}
    r = client.put("/v1/sessions/api1/workspaces/s001/files", json=body, headers=auth(student))
    assert r.status_code == 200 and r.json()["size"] == 9

    r = client.get("/v1/sessions/api1/workspaces/s001/files", params={"path": "main.py"}, headers=auth(student))
    assert r.json()["content_b64"] == body["content_b64"]

    listing = client.get("/v1/sessions/api1/workspaces/s001", headers=auth(teacher)).json()
    assert listing["files"] == [{"path": "main.py", "size": 9}]

    r = client.get("/v1/sessions/api1/workspaces/s001/files", params={"path": "nope"}, headers=auth(student))
    assert r.status_code == 404

    r = client.put("/v1/sessions/api1/workspaces/s002/files", json=body, headers=auth(student))
    assert r.status_code == 403

    bad = {"path": "main.py", "content_b64": "@@not base64@@"}
    r = client.put("/v1/sessions/api1/workspaces/s001/files", json=bad, headers=auth(student))
    assert r.status_code == 422 and r.json()["error"] == "invalid-body"

    # teacher can seed files for a student
    r = client.put("/v1/sessions/api1/workspaces/s002/files", json=body, headers=auth(teacher))
    assert r.status_code == 200

    r = client.get("/v1/sessions/api1/workspaces/ghost", headers=auth(teacher))
    assert r.status_code == 404 and r.json()["error"] == "unknown-student"


def test_backups_and_snapshot_listings(client):
    teacher = login(client, "t01")
    student = login(client, "s001")
    open_exam(client, teacher)

    r = client.post("/v1/sessions/api1/backups", json={}, headers=auth(student))
    assert [s["uid"] for s in r.json()["snapshots"]] == ["s001"]
    assert r.json()["snapshots"][0]["kind"] == "manual"

    r = client.post("/v1/sessions/api1/backups", json={"uid": "s002"}, headers=auth(student))
    assert r.status_code == 403

    r = client.post("/v1/sessions/api1/backups", json={}, headers=auth(teacher))
    assert [s["uid"] for s in r.json()["snapshots"]] == ["s001", "s002"]

    # students see only their own snapshots by default and cannot widen the net
    mine = client.get("/v1/sessions/api1/snapshots", headers=auth(student)).json()["snapshots"]
    assert {s["uid"] for s in mine} == {"s001"}
    r = client.get("/v1/sessions/api1/snapshots", params={"uid": "s002"}, headers=auth(student))
    assert r.status_code == 403

    everyone = client.get("/v1/sessions/api1/snapshots", headers=auth(teacher)).json()["snapshots"]
    assert {s["uid"] for s in everyone} == {"s001", "s002"}


def test_impersonation_scopes_a_teacher_down(client):
    teacher = login(client, "t01")
    student = login(client, "s001")

    r = client.post("/v1/sessions/api1/impersonate", json={"uid": "s001"}, headers=auth(student))
    assert r.status_code == 403

    r = client.post("/v1/sessions/api1/impersonate", json={"uid": "s001"}, headers=auth(teacher))
    assert r.status_code == 200
    acting = r.json()["token"]
    assert client.get("/v1/sessions/api1/workspaces/s001", headers=auth(acting)).status_code == 200
    assert client.get("/v1/sessions/api1/workspaces/s002", headers=auth(acting)).status_code == 403
    r = client.post("/v1/sessions/api1/advance", json={"by_s": 1}, headers=auth(acting))
    assert r.status_code == 403


# -- lifecycle over http ------------------------------------------------------------


def test_lifecycle_and_guards_over_http(client, home):
    teacher = login(client, "t01")

    r = client.post("/v1/sessions/api1/release", json={}, headers=auth(teacher))
    assert r.status_code == 409 and r.json()["error"] == "backup-guard"
    r = client.post("/v1/sessions/api1/close", headers=auth(teacher))
    assert r.status_code == 409 and r.json()["error"] == "illegal-transition"

    r = client.post("/v1/sessions/api1/provision", headers=auth(teacher))
    assert r.json() == {"cluster": "examlab-api1", "state": "Provisioning"}

    r = client.post("/v1/sessions/api1/advance", json={"to_s": 600}, headers=auth(teacher))
    assert r.json() == {"now_s": 600.0, "state": "Open"}

    r = client.post("/v1/sessions/api1/advance", json={}, headers=auth(teacher))
    assert r.status_code == 422 and r.json()["error"] == "invalid-body"
    r = client.post("/v1/sessions/api1/advance", json={"to_s": 1, "by_s": 2}, headers=auth(teacher))
    assert r.status_code == 422

    r = client.post("/v1/sessions/api1/scale", json={"target": 4}, headers=auth(teacher))
    assert r.status_code == 200

    r = client.post("/v1/sessions/api1/advance", json={"to_s": 7800}, headers=auth(teacher))
    assert r.json()["state"] == "BackedUp"

    r = client.post("/v1/sessions/api1/release", json={}, headers=auth(teacher))
    assert r.json() == {"state": "Released", "released_at_s": 7800.0}

    cost = client.get("/v1/sessions/api1/cost").json()
    assert cost["planned"]["node_hours"] == "6"
    # 3 nodes for 320s (resize to 4 lands at t=620), then 4 until deletion at 7800
    assert cost["accrued"]["node_hours"] == "371/45"

    # every mutation was persisted: a cold load sees the same state
    ctl = home.load_runtime("api1").controller
    assert ctl.state.value == "Released"
    assert ctl.now == 7800.0


def test_status_view_follows_the_clock(client):
    teacher = login(client, "t01")
    open_exam(client, teacher)
    client.post("/v1/sessions/api1/advance", json={"to_s": 1600}, headers=auth(teacher))
    status = client.get("/v1/sessions/api1").json()
    assert status["state"] == "Open"
    assert status["backup"]["next_backup_in_s"] == 800.0
    assert [s["snapshots"] for s in status["students"]] == [1, 1]
    rows = client.get("/v1/sessions").json()["sessions"]
    assert rows[0]["state"] == "Open"
