/**
 * Pure HTML rendering. No DOM access here; main.ts owns the two
 * containers and swaps their innerHTML when these strings change.
 *
 * Controls (login form, action buttons) render separately from the
 * data view so a 2 s poll does not clobber what the operator is
 * typing into a form field.
 */

import type { PollerState } from "./poller.js";
import type { ActionState } from "./actions.js";
import { buildView, formatCountdown, formatInstant } from "./viewmodel.js";
import type { SessionView } from "./viewmodel.js";

export interface AppModel {
  poll: PollerState;
  actions: ActionState;
}

export function esc(value: unknown): string {
  return String(value).replace(/[&<>"']/g, (c) => {
    switch (c) {
      case "&":
        return "&amp;";
      case "<":
        return "&lt;";
      case ">":
        return "&gt;";
      case '"':
        return "&quot;";
      default:
        return "&#39;";
    }
  });
}

function staleBanner(poll: PollerState): string {
  if (!poll.stale) return "";
  const why = poll.lastError ? ` (${esc(poll.lastError)})` : "";
  return `<div class="banner banner-stale">Stale data: ${poll.missed} polls missed${why}</div>`;
}

function loginPrompt(poll: PollerState): string {
  if (!poll.loginRequired) return "";
  return `
    <form class="login" data-form="login">
      <strong>Sign in required</strong>
      <input name="uid" placeholder="uid" autocomplete="username">
      <input name="secret" type="password" placeholder="secret" autocomplete="current-password">
      <button type="submit">Sign in</button>
      <span class="login-error" data-slot="login-error"></span>
    </form>`;
}

function summaryCards(view: SessionView): string {
  const cost = view.costSoFar === null ? "not accruing yet" : view.costSoFar;
  const hours = view.costSoFarHours === null ? "" : `<div class="sub">${esc(view.costSoFarHours)} node-hours</div>`;
  return `
    <div class="cards">
      <div class="card">
        <div class="label">state</div>
        <div class="value"><span class="badge state-${esc(view.state)}">${esc(view.state)}</span></div>
        ${view.failReason ? `<div class="sub">${esc(view.failReason)}</div>` : ""}
      </div>
      <div class="card">
        <div class="label">nodes</div>
        <div class="value">${view.healthyCount}/${view.nodeCount} healthy</div>
        <div class="sub">${view.clusterName ? `${esc(view.clusterName)} (${esc(view.clusterPhase)})` : "no cluster"}</div>
      </div>
      <div class="card">
        <div class="label">students</div>
        <div class="value">${view.placed} placed</div>
        <div class="sub">${view.unplaced} unplaced</div>
      </div>
      <div class="card">
        <div class="label">cost so far</div>
        <div class="value">${esc(cost)}</div>
        ${hours}
        <div class="sub">planned ${esc(view.plannedCost)}</div>
      </div>
      <div class="card">
        <div class="label">next backup</div>
        <div class="value">${esc(formatCountdown(view.nextBackupInS))}</div>
        <div class="sub">every ${view.backupIntervalS} s, ${view.finalDoneCount} final(s) done</div>
      </div>
    </div>`;
}

function studentTable(view: SessionView): string {
  const rows = view.students
    .map(
      (s) => `
      <tr>
        <td>${esc(s.uid)}</td>
        <td class="num">${s.snapshots}</td>
        <td class="num">${esc(formatInstant(s.lastBackupT))}</td>
        <td>${s.finalDone ? "yes" : ""}</td>
      </tr>`,
    )
    .join("");
  return `
    <table class="students">
      <thead><tr><th>student</th><th>snapshots</th><th>last backup</th><th>final</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

function actionLog(actions: ActionState): string {
  if (actions.log.length === 0) return "";
  const rows = actions.log
    .map(
      (e) => `
      <tr class="${e.outcome === "200" ? "" : "log-error"}">
        <td>${esc(e.label)}</td>
        <td>${esc(e.outcome)}</td>
        <td>${esc(e.detail)}</td>
      </tr>`,
    )
    .join("");
  return `
    <table class="log">
      <thead><tr><th>action</th><th>result</th><th>detail</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

/** Latest failed action, shown right under the buttons. */
function inlineError(actions: ActionState): string {
  const last = actions.log[0];
  if (!last || last.outcome === "200") return "";
  return `<div class="action-error">${esc(last.label)}: ${esc(last.outcome)} ${esc(last.detail)}</div>`;
}

export function renderView(model: AppModel): string {
  const { poll, actions } = model;
  const banner = staleBanner(poll);
  if (poll.doc === null) {
    return `${banner}<p class="waiting">Waiting for the first status poll.</p>${actionLog(actions)}`;
  }
  const view = buildView(poll.doc);
  return `
    ${banner}
    <h1>${esc(view.title)} <span class="session-id">${esc(view.sessionId)}</span></h1>
    <div class="clock">sim clock t+${Math.round(view.nowS)}s</div>
    ${summaryCards(view)}
    ${studentTable(view)}
    ${inlineError(actions)}
    ${actionLog(actions)}`;
}

export function renderControls(model: AppModel): string {
  const { poll, actions } = model;
  const disabled = actions.pending !== null || poll.doc === null ? "disabled" : "";
  const pendingNote = actions.pending !== null ? `<span class="pending">working...</span>` : "";
  return `
    ${loginPrompt(poll)}
    <div class="actions">
      <button data-action="backup" ${disabled}>Backup now</button>
      <input data-slot="resize-target" type="number" min="1" step="1" value="3" ${disabled}>
      <button data-action="resize" ${disabled}>Resize</button>
      <button data-action="close" data-confirm="1" class="danger" ${disabled}>Close exam</button>
      <button data-action="release" data-confirm="1" class="danger" ${disabled}>Release</button>
      ${pendingNote}
    </div>`;
}

export function renderApp(model: AppModel): string {
  return `${renderControls(model)}\n${renderView(model)}`;
}
