"""Command line for planning, driving, and inspecting exam sessions.

Every verb works on the on-disk home (--home or $EXAMLAB_HOME); --json
switches any verb to machine-readable output on stdout.  Exit codes: 0 ok,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from ..errors import ExamLabError
from ..pricing import budget_total_cents, estimate_fixed, format_usd, load_catalog
from ..provider import render_lifecycle_scripts
from ..scheduler import NodeShape, PodSpec, required_nodes
from ..session import ExamConfig
from .home import ExamLabHome, home_path
from .simulate import default_config, run_simulation


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text, payload = args.func(args)
    except ExamLabError as exc:
        if getattr(args, "json", False):
            print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        else:
            print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 1
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif text:
        print(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="examlab", description="ephemeral exam environments on rented clusters")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--home", default=None, help="home directory (default $EXAMLAB_HOME or ~/.examlab)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.set_defaults(func=fn)
        return p

    p = add("plan", _cmd_plan, "create a session from a config file and a roster")
    p.add_argument("config", help="session config JSON")
    p.add_argument("--roster", required=True, help="roster csv (uid,full_name,role,initial_secret)")

    p = add("estimate", _cmd_estimate, "price a config without creating anything")
    p.add_argument("config", help="session config JSON")
    p.add_argument("--students", type=int, required=True, help="how many student pods to size for")
    p.add_argument("--compare", action="store_true", help="price every node type in the catalog")

    p = add("up", _cmd_up, "provision the session's cluster")
    p.add_argument("session_id")

    p = add("status", _cmd_status, "show session state, cluster, backups, cost")
    p.add_argument("session_id")

    p = add("advance", _cmd_advance, "move the virtual clock forward")
    p.add_argument("session_id")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--to", type=float, help="absolute sim time in seconds")
    g.add_argument("--by", type=float, help="seconds to add to the clock")

    p = add("scale", _cmd_scale, "resize the cluster")
    p.add_argument("session_id")
    p.add_argument("target", type=int)

    p = add("backup", _cmd_backup, "take a manual snapshot now")
    p.add_argument("session_id")
    p.add_argument("--uid", default=None, help="one student (default: everyone)")

    p = add("close", _cmd_close, "close the exam and take final backups")
    p.add_argument("session_id")

    p = add("down", _cmd_down, "release the session and delete its cluster")
    p.add_argument("session_id")
    p.add_argument("--force", action="store_true", help="skip the final-backup guard, leaving a journal warning")
    p.add_argument("--reason", default="operator override", help="why the guard was skipped")

    p = add("render-scripts", _cmd_render_scripts, "emit the four provider command blocks for this session")
    p.add_argument("session_id")
    p.add_argument("--batch", action="store_true", help="wrap commands as Windows batch files")
    p.add_argument("--out", default=None, help="write scripts into this directory instead of stdout")

    p = add("simulate", _cmd_simulate, "run a whole exam on the virtual clock and report")
    p.add_argument("--config", default=None, help="session config JSON (default: a built-in plan)")
    p.add_argument("--students", type=int, default=30)
    p.add_argument("--duration-s", type=float, default=7200.0)
    p.add_argument("--backup-interval-s", type=float, default=900.0)
    p.add_argument("--open-at-s", type=float, default=600.0)
    p.add_argument("--node-type", default="n1-standard-1")
    p.add_argument("--region", default="us-central1")
    p.add_argument("--catalog", default="gcp-us-central1")

    add("sessions", _cmd_sessions, "list sessions in the home")

    p = add("serve", _cmd_serve, "serve the HTTP API (and optionally a dashboard)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--live", action="store_true", help="drive session clocks from wall time")
    p.add_argument("--time-scale", type=float, default=1.0, help="sim seconds per wall second in live mode")
    p.add_argument("--ui", default=None, help="directory of static dashboard files to serve at /ui")

    return parser


def _home(args) -> ExamLabHome:
    return ExamLabHome(home_path(args.home))


def _cmd_plan(args):
    doc = json.loads(Path(args.config).read_text())
    roster = Path(args.roster).read_text()
    rt = _home(args).create_session(doc, roster)
    ctl = rt.controller
    est = ctl.planned_estimate()
    budget = budget_total_cents(est)
    cfg = ctl.config
    text = (
        f"planned session {cfg.session_id}: {len(ctl.student_uids)} students on "
        f"{ctl.planned_nodes} x {cfg.node_type} ({cfg.region})\n"
        f"  opens t={cfg.open_at_s:.0f}s, runs {cfg.duration_s / 60:.0f} min, "
        f"backups every {cfg.backup_interval_s / 60:.0f} min\n"
        f"  est cost {format_usd(est.node_cost_cents)} nodes + {format_usd(est.mgmt_cost_cents)} mgmt "
        f"= {format_usd(est.total_cents)}\n"
        f"  budget incl. overhead allowance: {format_usd(budget)}"
    )
    payload = {
        "session_id": cfg.session_id,
        "students": len(ctl.student_uids),
        "planned_nodes": ctl.planned_nodes,
        "estimate": est.as_dict(),
        "budget_total_cents": budget,
    }
    return text, payload


def _cmd_estimate(args):
    cfg = ExamConfig.parse(json.loads(Path(args.config).read_text()))
    catalog = load_catalog(cfg.catalog)
    hours = Fraction(cfg.duration_s).limit_denominator(10**9) / 3600
    pods = [PodSpec(f"s{i:04d}", cfg.pod_cpu_millis, cfg.pod_ram_mb) for i in range(args.students)]
    names = sorted(catalog.node_types) if args.compare else [cfg.node_type]
    rows = []
    for name in names:
        nt = catalog.require(name)
        shape = NodeShape(nt.cpus * 1000, int(nt.ram_gb * 1024))
        if pods and not shape.holds(pods[0]):
            rows.append({"node_type": name, "fits": False})
            continue
        nodes = max(3, required_nodes(pods, shape)) if pods else 3
        est = estimate_fixed(catalog, name, nodes, hours)
        rows.append(
            {
                "node_type": name,
                "fits": True,
                "nodes": nodes,
                "node_cost_cents": est.node_cost_cents,
                "mgmt_cost_cents": est.mgmt_cost_cents,
                "total_cents": est.total_cents,
                "budget_total_cents": budget_total_cents(est),
                "assumption": nt.assumption,
            }
        )
    rows.sort(key=lambda r: (not r["fits"], r.get("total_cents", 0)))
    lines = [f"{args.students} students for {float(hours):g} h:"]
    for r in rows:
        if not r["fits"]:
            lines.append(f"  {r['node_type']:<16} pod does not fit on this node type")
            continue
        note = "  (assumed rate)" if r.get("assumption") else ""
        lines.append(
            f"  {r['node_type']:<16} {r['nodes']:>3} nodes  "
            f"{format_usd(r['node_cost_cents']):>8} + {format_usd(r['mgmt_cost_cents'])} mgmt "
            f"= {format_usd(r['total_cents']):>8}{note}"
        )
    return "\n".join(lines), {"students": args.students, "hours": float(hours), "rows": rows}


def _run_and_save(rt, op):
    try:
        return op()
    finally:
        rt.save()


def _cmd_up(args):
    rt = _home(args).load_runtime(args.session_id)
    handle = _run_and_save(rt, rt.controller.provision)
    ctl = rt.controller
    text = (
        f"provisioning cluster {handle}: {ctl.planned_nodes} x {ctl.config.node_type}; "
        f"expected ready after {ctl.provider.config.provision_delay_s:.0f}s of sim time"
    )
    return text, {"cluster": handle, "nodes": ctl.planned_nodes, "state": ctl.state.value}


def _cmd_status(args):
    rt = _home(args).load_runtime(args.session_id)
    st = rt.controller.status()
    lines = [f"session {st['session_id']} ({st['title']})", f"  state     {st['state']}"]
    lines.append(f"  clock     t={st['now_s']:.1f}s  opens {st['open_at_s']:.1f}s  closes {st['close_at_s']:.1f}s")
    if st["cluster"]:
        c = st["cluster"]
        lines.append(f"  cluster   {c['name']}  {c['phase']}  {c['healthy_count']}/{c['node_count']} healthy")
    nb = st["backup"]["next_backup_in_s"]
    finals = st["backup"]["final_done_count"]
    lines.append(
        f"  backups   every {st['backup']['interval_s']:.0f}s"
        + (f", next in {nb:.0f}s" if nb is not None else "")
        + f", finals {finals}/{len(st['students'])}"
    )
    planned = st["cost"]["planned"]
    line = f"  cost      planned {planned['total']}"
    if st["cost"]["accrued"]:
        line += f", accrued {st['cost']['accrued']['total']}"
    lines.append(line)
    snaps = sum(s["snapshots"] for s in st["students"])
    lines.append(f"  students  {len(st['students'])}, snapshots {snaps}")
    if st["fail_reason"]:
        lines.append(f"  failed    {st['fail_reason']}")
    return "\n".join(lines), st


def _cmd_advance(args):
    rt = _home(args).load_runtime(args.session_id)
    ctl = rt.controller

    def op():
        if args.to is not None:
            ctl.advance_to(args.to)
        else:
            ctl.advance(args.by)

    _run_and_save(rt, op)
    return f"clock now t={ctl.now:.1f}s, state {ctl.state.value}", {"now_s": ctl.now, "state": ctl.state.value}


def _cmd_scale(args):
    rt = _home(args).load_runtime(args.session_id)
    _run_and_save(rt, lambda: rt.controller.scale(args.target))
    return f"resizing to {args.target} nodes", {"target": args.target, "state": rt.controller.state.value}


def _cmd_backup(args):
    rt = _home(args).load_runtime(args.session_id)
    snaps = _run_and_save(rt, lambda: rt.controller.backup_now(args.uid))
    text = f"captured {len(snaps)} snapshot(s) at t={rt.controller.now:.1f}s"
    return text, {"snapshots": [{"uid": s.student_uid, "seq": s.seq} for s in snaps]}


def _cmd_close(args):
    rt = _home(args).load_runtime(args.session_id)
    _run_and_save(rt, rt.controller.close_exam)
    ctl = rt.controller
    return f"state {ctl.state.value}, finals {len(ctl.student_uids)}/{len(ctl.student_uids)}", {"state": ctl.state.value}


def _cmd_down(args):
    rt = _home(args).load_runtime(args.session_id)
    ctl = rt.controller

    def op():
        if args.force:
            ctl.force_release(args.reason)
        else:
            ctl.release()

    _run_and_save(rt, op)
    accrued = ctl.accrued_estimate()
    text = f"released session {args.session_id}"
    if accrued:
        text += f"; final cost {format_usd(accrued.total_cents)} ({accrued.node_hours} node-hours)"
    payload = {"state": ctl.state.value, "cost": accrued.as_dict() if accrued else None}
    return text, payload


def _cmd_render_scripts(args):
    rt = _home(args).load_runtime(args.session_id)
    scripts = render_lifecycle_scripts(rt.controller.cluster_spec(), batch_wrapper=args.batch)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        ext = "bat" if args.batch else "sh"
        for name, body in scripts.items():
            (outdir / f"{name}.{ext}").write_text(body)
        return f"wrote {len(scripts)} scripts to {outdir}", {"written": sorted(scripts), "dir": str(outdir)}
    text = "\n".join(f"== {name} ==\n{body}" for name, body in scripts.items())
    return text.rstrip("\n"), {"scripts": scripts}


def _cmd_simulate(args):
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    else:
        doc = default_config(
            students_hint=args.students,
            node_type=args.node_type,
            region=args.region,
            open_at_s=args.open_at_s,
            duration_s=args.duration_s,
            backup_interval_s=args.backup_interval_s,
            catalog=args.catalog,
        )
    report = run_simulation(doc, students=args.students)
    periodic = sorted(set(report["periodic_backups_per_student"].values()))
    final = sorted(set(report["final_backups_per_student"].values()))
    text = (
        f"simulated exam {report['session_id']}: {report['final_state']}\n"
        f"  {report['students']} students on {report['node_count']} nodes, "
        f"running t={report['cluster_running_at_s']:.0f}s to t={report['cluster_deleted_at_s']:.0f}s\n"
        f"  open {report['opened_at_s']:.0f}s -> close {report['closed_at_s']:.0f}s, "
        f"released {report['released_at_s']:.0f}s\n"
        f"  backups per student: periodic {periodic}, final {final}\n"
        f"  node-hours {report['node_hours']}, cost {report['cost']['total']}, "
        f"budget {report['budget_total_usd']}\n"
        f"  wall {report['wall_seconds']:.2f}s"
    )
    return text, report


def _cmd_sessions(args):
    rows = _home(args).list_sessions()
    if not rows:
        return "no sessions", {"sessions": []}
    width = max(len(r["session_id"]) for r in rows)
    text = "\n".join(f"{r['session_id']:<{width}}  {r['state']:<12} {r['students']:>3} students  {r['title']}" for r in rows)
    return text, {"sessions": rows}


def _cmd_serve(args):
    import uvicorn

    from .api import build_app

    app = build_app(_home(args), live=args.live, time_scale=args.time_scale, ui_dir=args.ui)
    print(f"serving on http://{args.host}:{args.port} (live={args.live}, x{args.time_scale:g})", flush=True)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return "", {}


if __name__ == "__main__":
    sys.exit(main())
