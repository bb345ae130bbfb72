import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { ActionRunner, actionLabel, isDestructive } from "../src/actions.js";
import type { Action } from "../src/actions.js";

interface Call {
  url: string;
  method: string;
  body: unknown;
  headers: Record<string, string>;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Client whose fetch is a scripted stub; returns the recorded calls. */
function stubClient(respond: (call: Call) => Response | Promise<Response>) {
  const calls: Call[] = [];
  const client = new ApiClient("http://test", "exam1", async (url, init) => {
    const call: Call = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      headers: (init?.headers as Record<string, string>) ?? {},
    };
    calls.push(call);
    return respond(call);
  });
  return { client, calls };
}

function runner(client: ApiClient) {
  const pendingSeen: Array<Action | null> = [];
  const r = new ActionRunner(client, (s) => pendingSeen.push(s.pending), () => 123);
  return { r, pendingSeen };
}

describe("confirm gating", () => {
  it.each([{ kind: "close" } as Action, { kind: "release" } as Action])(
    "refuses %j without confirm and never touches the network",
    async (action) => {
      const { client, calls } = stubClient(() => jsonResponse(200, {}));
      const { r } = runner(client);
      const res = await r.issue(action);
      expect(res).toEqual({ ok: false, refused: "confirm-required" });
      expect(calls.length).toBe(0);
      expect(r.state.log[0].outcome).toBe("refused");
    },
  );

  it("lets close and release through with confirm", async () => {
    const { client, calls } = stubClient(() => jsonResponse(200, { state: "Released", released_at_s: 7800 }));
    const { r } = runner(client);
    const res = await r.issue({ kind: "release" }, true);
    expect(res.ok).toBe(true);
    expect(calls.length).toBe(1);
    expect(calls[0].url).toBe("http://test/v1/sessions/exam1/release");
    expect(calls[0].body).toEqual({ force: false });
  });

  it("does not ask confirm for backup or resize", async () => {
    const { client, calls } = stubClient((call) =>
      call.url.endsWith("/backups")
        ? jsonResponse(200, { snapshots: [{ uid: "s001", seq: 1, kind: "manual" }] })
        : jsonResponse(200, { target: 5, state: "Open" }),
    );
    const { r } = runner(client);
    expect((await r.issue({ kind: "backup" })).ok).toBe(true);
    expect((await r.issue({ kind: "resize", target: 5 })).ok).toBe(true);
    expect(calls.map((c) => c.method)).toEqual(["POST", "POST"]);
    expect(calls[1].body).toEqual({ target: 5 });
  });
});

describe("single in-flight mutation", () => {
  it("refuses a second action while one is pending", async () => {
    let release: (r: Response) => void = () => undefined;
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    let gated = true;
    const { client, calls } = stubClient(() => {
      if (gated) {
        gated = false;
        return gate;
      }
      return jsonResponse(200, { target: 4, state: "Open" });
    });
    const { r, pendingSeen } = runner(client);

    const first = r.issue({ kind: "backup" });
    const second = await r.issue({ kind: "resize", target: 4 });
    expect(second).toEqual({ ok: false, refused: "busy" });
    expect(calls.length).toBe(1);

    release(jsonResponse(200, { snapshots: [] }));
    expect((await first).ok).toBe(true);
    expect(r.state.pending).toBeNull();
    // onChange saw the pending action appear and clear.
    expect(pendingSeen[0]).toEqual({ kind: "backup" });
    expect(pendingSeen[pendingSeen.length - 1]).toBeNull();

    // And the runner accepts work again afterwards.
    const third = await r.issue({ kind: "resize", target: 4 });
    expect(third.ok).toBe(true);
  });
});

describe("error surfacing", () => {
  it("turns a 409 into a log entry instead of a thrown error", async () => {
    const { client } = stubClient(() =>
      jsonResponse(409, { error: "backup-guard", message: "final backups missing" }),
    );
    const { r } = runner(client);
    const res = await r.issue({ kind: "release" }, true);
    expect(res.ok).toBe(false);
    expect(res.error).toBeInstanceOf(ApiError);
    expect(res.error?.status).toBe(409);
    expect(r.state.log[0]).toEqual({
      at: 123,
      label: "release",
      outcome: "409 backup-guard",
      detail: "final backups missing",
    });
    expect(r.state.pending).toBeNull();
  });

  it("reports 401s so the caller can raise the login prompt", async () => {
    const { client } = stubClient(() => jsonResponse(401, { error: "expired-token", message: "expired" }));
    const { r } = runner(client);
    const res = await r.issue({ kind: "backup" });
    expect(res.error?.status).toBe(401);
    expect(res.error?.code).toBe("expired-token");
  });

  it("logs network failures without crashing", async () => {
    const { client } = stubClient(() => {
      throw new Error("socket hang up");
    });
    const { r } = runner(client);
    const res = await r.issue({ kind: "backup" });
    expect(res.ok).toBe(false);
    expect(res.error).toBeUndefined();
    expect(r.state.log[0].outcome).toBe("network-error");
  });

  it("caps the log length", async () => {
    const { client } = stubClient(() => jsonResponse(200, { snapshots: [] }));
    const { r } = runner(client);
    for (let i = 0; i < 40; i++) await r.issue({ kind: "backup" });
    expect(r.state.log.length).toBe(30);
  });
});

describe("client plumbing", () => {
  it("sends the bearer token once one is held", async () => {
    const { client, calls } = stubClient(() => jsonResponse(200, { snapshots: [] }));
    client.token = "tok123";
    const { r } = runner(client);
    await r.issue({ kind: "backup" });
    expect(calls[0].headers.authorization).toBe("Bearer tok123");
  });

  it("labels actions for the log", () => {
    expect(actionLabel({ kind: "backup" })).toBe("backup");
    expect(actionLabel({ kind: "resize", target: 8 })).toBe("resize(8)");
    expect(actionLabel({ kind: "close" })).toBe("close");
    expect(actionLabel({ kind: "release", force: true })).toBe("release(force)");
  });

  it("marks exactly close and release as destructive", () => {
    expect(isDestructive({ kind: "close" })).toBe(true);
    expect(isDestructive({ kind: "release" })).toBe(true);
    expect(isDestructive({ kind: "backup" })).toBe(false);
    expect(isDestructive({ kind: "resize", target: 3 })).toBe(false);
  });
});
