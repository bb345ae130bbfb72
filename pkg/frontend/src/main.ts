/**
 * Browser wiring: one poller, one action runner, one render loop.
 *
 * The page splits into a controls strip and a data view. Each re-renders
 * only when its HTML actually changes, so the poll cadence never eats a
 * half-typed form field. Event handlers are delegated from the root and
 * survive innerHTML swaps.
 */

import { ApiClient } from "./api.js";
import { Poller } from "./poller.js";
import { ActionRunner } from "./actions.js";
import type { Action } from "./actions.js";
import { esc, renderControls, renderView } from "./render.js";
import type { AppModel } from "./render.js";

function confirmMessage(kind: string): string {
  return kind === "close"
    ? "Close the exam now? Students lose access and final backups run."
    : "Release the cluster? Every node is deleted.";
}

async function pickSessionId(base: string, viewEl: HTMLElement): Promise<string | null> {
  const fromUrl = new URLSearchParams(location.search).get("session");
  if (fromUrl) return fromUrl;
  const probe = new ApiClient(base, "");
  const { sessions } = await probe.listSessions();
  if (sessions.length === 0) {
    viewEl.innerHTML = `<p class="waiting">No sessions in this home yet; create one with the CLI.</p>`;
    return null;
  }
  if (sessions.length === 1) return sessions[0].session_id;
  viewEl.innerHTML =
    `<h1>Pick a session</h1><ul class="picker">` +
    sessions
      .map(
        (s) =>
          `<li><a href="?session=${encodeURIComponent(s.session_id)}">${esc(s.session_id)}</a> ` +
          `${esc(s.title)} <span class="badge state-${esc(s.state)}">${esc(s.state)}</span></li>`,
      )
      .join("") +
    `</ul>`;
  return null;
}

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  root.innerHTML = `<div id="controls"></div><div id="view"></div>`;
  const controlsEl = root.querySelector("#controls") as HTMLElement;
  const viewEl = root.querySelector("#view") as HTMLElement;

  const base = location.origin;
  const sessionId = await pickSessionId(base, viewEl);
  if (sessionId === null) return;

  const client = new ApiClient(base, sessionId);

  let lastControls = "";
  let lastView = "";
  let renderQueued = false;

  function render(): void {
    renderQueued = false;
    const model: AppModel = { poll: poller.state, actions: runner.state };
    const controlsHtml = renderControls(model);
    if (controlsHtml !== lastControls) {
      const prev = controlsEl.querySelector<HTMLInputElement>('[data-slot="resize-target"]');
      const keep = prev ? prev.value : null;
      controlsEl.innerHTML = controlsHtml;
      const next = controlsEl.querySelector<HTMLInputElement>('[data-slot="resize-target"]');
      if (next && keep !== null) next.value = keep;
      lastControls = controlsHtml;
    }
    const viewHtml = renderView(model);
    if (viewHtml !== lastView) {
      viewEl.innerHTML = viewHtml;
      lastView = viewHtml;
    }
  }

  function scheduleRender(): void {
    if (renderQueued) return;
    renderQueued = true;
    requestAnimationFrame(render);
  }

  const runner = new ActionRunner(client, scheduleRender);
  const poller = new Poller(() => client.status(), scheduleRender);

  root.addEventListener("click", (ev) => {
    const btn = (ev.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!btn || btn.hasAttribute("disabled")) return;
    const kind = btn.dataset.action;
    let action: Action;
    if (kind === "backup") {
      action = { kind: "backup" };
    } else if (kind === "resize") {
      const input = controlsEl.querySelector<HTMLInputElement>('[data-slot="resize-target"]');
      const target = input ? parseInt(input.value, 10) : NaN;
      if (!Number.isFinite(target)) return;
      action = { kind: "resize", target };
    } else if (kind === "close") {
      action = { kind: "close" };
    } else if (kind === "release") {
      action = { kind: "release" };
    } else {
      return;
    }
    // Destructive verbs get a browser confirm; cancelling does nothing.
    if (btn.dataset.confirm === "1" && !window.confirm(confirmMessage(action.kind))) return;
    const confirmed = btn.dataset.confirm === "1";
    void runner.issue(action, confirmed).then((res) => {
      if (res.error && res.error.status === 401) poller.requireLogin();
    });
  });

  root.addEventListener("submit", (ev) => {
    const form = (ev.target as HTMLElement).closest<HTMLFormElement>('[data-form="login"]');
    if (!form) return;
    ev.preventDefault();
    const uid = (form.elements.namedItem("uid") as HTMLInputElement).value.trim();
    const secret = (form.elements.namedItem("secret") as HTMLInputElement).value;
    void client.login(uid, secret).then(
      () => poller.ackLogin(),
      (err: unknown) => {
        const slot = form.querySelector('[data-slot="login-error"]');
        if (slot) slot.textContent = err instanceof Error ? err.message : String(err);
      },
    );
  });

  poller.requireLogin();
  poller.start();
}

document.addEventListener("DOMContentLoaded", () => {
  void start();
});
