from pathlib import Path

import pytest

from examlab.errors import InvalidSpecError
from examlab.provider import AutoscaleBounds, ClusterSpec, render_lifecycle_scripts, render_script

GOLDEN = Path(__file__).parent / "golden" / "scripts"

# the published reference deployment: 20 four-cpu nodes, elastic 10..60
REFERENCE = ClusterSpec(
    cluster_name="icai-jupyter",
    region="us-central1",
    node_type_name="n1-standard-4",
    initial_node_count=20,
    autoscaling=AutoscaleBounds(enabled=True, min_nodes=10, max_nodes=60),
    auto_repair=True,
    auto_upgrade=True,
)


@pytest.mark.parametrize("name", ["create", "scale-up", "scale-down", "delete"])
def test_scripts_match_goldens_byte_for_byte(name):
    rendered = render_lifecycle_scripts(REFERENCE)[name]
    assert rendered.encode() == (GOLDEN / f"{name}.txt").read_bytes()


def test_scale_targets_come_from_autoscaling_bounds():
    scripts = render_lifecycle_scripts(REFERENCE)
    assert "--num-nodes 60" in scripts["scale-up"]
    assert "--num-nodes 10" in scripts["scale-down"]

    fixed = ClusterSpec(
        cluster_name="fixed", region="r", node_type_name="t", initial_node_count=30
    )
    scripts = render_lifecycle_scripts(fixed)
    assert "--num-nodes 30" in scripts["scale-up"]
    assert "--num-nodes 30" in scripts["scale-down"]


def test_disabled_features_drop_their_flags():
    bare = ClusterSpec(
        cluster_name="bare",
        region="r1",
        node_type_name="t1",
        initial_node_count=3,
        auto_repair=False,
        auto_upgrade=False,
    )
    script = render_script(bare, "create")
    assert "--enable-autorepair" not in script
    assert "--enable-autoupgrade" not in script
    assert "--enable-autoscaling" not in script
    assert "--max-nodes" not in script
    assert script.startswith("gcloud container clusters create bare \\\n")
    assert script.endswith("\n")


def test_flag_order_is_stable():
    script = render_script(REFERENCE, "create")
    flags = [line.strip().rstrip("\\").strip() for line in script.splitlines()[1:]]
    assert flags == [
        "--region us-central1",
        "--num-nodes=20",
        "--machine-type=n1-standard-4",
        "--enable-autorepair",
        "--enable-autoupgrade",
        "--enable-autoscaling",
        "--max-nodes=60",
        "--min-nodes=10",
    ]


def test_batch_wrapper_shape():
    script = render_script(REFERENCE, "create", batch_wrapper=True)
    lines = script.splitlines()
    assert lines[0] == "ECHO OFF"
    assert lines[1] == "CLS"
    assert lines[2] == "SET PATH="
    assert lines[3].startswith("cd ")
    assert "set REGION=us-central1" in lines
    assert any(line.endswith("^") for line in lines)
    assert "--region %REGION%" in script
    assert lines[-1] == "ECHO ON"

    resize = render_script(REFERENCE, "scale", target=60, batch_wrapper=True)
    assert "^" in resize and resize.splitlines()[-1] == "ECHO ON"

    delete = render_script(REFERENCE, "delete", batch_wrapper=True)
    assert "gcloud container clusters delete icai-jupyter" in delete


def test_dispatcher_errors():
    with pytest.raises(InvalidSpecError):
        render_script(REFERENCE, "scale")  # no target
    with pytest.raises(InvalidSpecError):
        render_script(REFERENCE, "scale", target=2)
    with pytest.raises(InvalidSpecError):
        render_script(REFERENCE, "reboot")
    with pytest.raises(InvalidSpecError):
        render_script(ClusterSpec("Bad Name", "r", "t", 3), "create")
