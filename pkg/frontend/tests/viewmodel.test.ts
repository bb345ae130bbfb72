import { describe, expect, it } from "vitest";

import { buildView, formatCountdown, formatInstant } from "../src/viewmodel.js";
import { statusDoc } from "./fixtures.js";

describe("buildView", () => {
  it("maps the session summary straight off the document", () => {
    const view = buildView(statusDoc());
    expect(view.sessionId).toBe("exam1");
    expect(view.state).toBe("Open");
    expect(view.nodeCount).toBe(3);
    expect(view.healthyCount).toBe(3);
    expect(view.placed).toBe(2);
    expect(view.unplaced).toBe(0);
    expect(view.nextBackupInS).toBe(800);
    expect(view.finalDoneCount).toBe(0);
  });

  it("passes cost strings through verbatim, even implausible ones", () => {
    // The client must not recompute money. Hand it an accrued total that
    // no local arithmetic would produce and check it survives untouched.
    const doc = statusDoc();
    doc.cost.accrued!.total = "$123.45";
    doc.cost.accrued!.node_hours = "999/7";
    const view = buildView(doc);
    expect(view.costSoFar).toBe("$123.45");
    expect(view.costSoFarHours).toBe("999/7");
    expect(view.plannedCost).toBe("$1.05");
  });

  it("handles a session with no cluster and no accrual yet", () => {
    const doc = statusDoc({ state: "Planned", cluster: null, placement: null });
    doc.cost.accrued = null;
    const view = buildView(doc);
    expect(view.nodeCount).toBe(0);
    expect(view.healthyCount).toBe(0);
    expect(view.costSoFar).toBeNull();
    // Nothing is placed before a cluster exists.
    expect(view.placed).toBe(0);
    expect(view.unplaced).toBe(2);
  });

  it("keeps student rows in server order with their fields", () => {
    const view = buildView(statusDoc());
    expect(view.students).toEqual([
      { uid: "s001", snapshots: 1, lastBackupT: 1500, finalDone: false },
      { uid: "s002", snapshots: 1, lastBackupT: 1500, finalDone: false },
    ]);
  });
});

describe("formatters", () => {
  it("renders countdowns as m:ss", () => {
    expect(formatCountdown(800)).toBe("13:20");
    expect(formatCountdown(59.4)).toBe("0:59");
    expect(formatCountdown(0)).toBe("0:00");
    expect(formatCountdown(-3)).toBe("0:00");
    expect(formatCountdown(null)).toBe("-");
  });

  it("renders sim instants", () => {
    expect(formatInstant(1500)).toBe("t+1500s");
    expect(formatInstant(null)).toBe("-");
  });
});
