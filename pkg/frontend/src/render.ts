import { featureEnabled, suggestedFeature } from './state';
import type { UiState } from './state';
import type { Advice, FeatureInfo, Neighbor } from './types';

/**
 * Static skeleton.  mountApp injects it, so component tests and index.html
 * render into the exact same DOM.
 */
export const APP_HTML = `
<header>
  <h1>feature advisor</h1>
  <p class="tagline">reveal feature values one at a time, spending only what the budget allows</p>
</header>
<div id="offline-banner" class="banner error" hidden>
  <span>service unreachable</span>
  <button id="retry-btn" type="button">retry</button>
</div>
<section id="start-panel">
  <form id="start-form">
    <label>model
      <select id="model-select"></select>
    </label>
    <label>budget
      <input id="budget-input" type="number" step="0.05" value="0.8">
    </label>
    <button id="start-btn" type="submit">start session</button>
  </form>
  <div id="start-error" class="inline-error" hidden></div>
</section>
<section id="session-panel" hidden>
  <div id="session-head">
    <span id="session-model"></span>
    <div id="budget-gauge">
      <div id="budget-meter"><div id="budget-fill"></div></div>
      <span id="budget-text"></span>
    </div>
    <button id="restart-btn" type="button">new session</button>
  </div>
  <div id="expired-banner" class="banner error" hidden>
    <span>this session expired on the server</span>
    <button id="expired-restart-btn" type="button">start over</button>
  </div>
  <div id="terminate-banner" class="banner done" hidden></div>
  <div id="session-error" class="inline-error" hidden></div>
  <div id="feature-grid"></div>
  <div id="session-actions">
    <button id="terminate-btn" type="button">terminate now</button>
  </div>
  <div class="panes">
    <section class="pane">
      <h2>cluster ranking</h2>
      <ol id="ranking-list"></ol>
      <p id="predicted-cluster"></p>
    </section>
    <section class="pane">
      <h2>nearest neighbors</h2>
      <table id="neighbor-table">
        <thead><tr><th>train row</th><th>partial distance</th></tr></thead>
        <tbody></tbody>
      </table>
    </section>
  </div>
</section>
`;

export function mountApp(root: HTMLElement): void {
  root.innerHTML = APP_HTML;
}

/**
 * Numbers are shown exactly as the payload JSON carried them; the UI never
 * rounds, sums or otherwise post-processes what the service computed.
 */
export const fmt = (x: number): string => String(x);

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

export function renderApp(state: UiState): void {
  ($('offline-banner') as HTMLDivElement).hidden = !state.offline;
  renderStart(state);
  renderSession(state);
}

function renderStart(state: UiState): void {
  const panel = $('start-panel');
  panel.hidden = state.advice !== null;

  const select = $('model-select') as HTMLSelectElement;
  const models = state.meta?.models ?? [];
  const stamp = models.join(',');
  if (select.dataset.models !== stamp) {
    select.dataset.models = stamp;
    select.innerHTML = models
      .map((m) => `<option value="${m}">${m}</option>`)
      .join('');
  }

  const err = $('start-error');
  err.hidden = state.startError === null;
  err.textContent = state.startError ?? '';
}

function renderSession(state: UiState): void {
  const panel = $('session-panel');
  const a = state.advice;
  panel.hidden = a === null;
  if (a === null) return;

  $('session-model').textContent = `model: ${a.model}`;
  $('budget-text').textContent = `${fmt(a.remaining_budget)} of ${fmt(a.budget)} budget left`;
  // bar geometry only; the numbers shown above are payload values verbatim
  const frac = a.budget > 0 ? Math.max(0, Math.min(1, a.remaining_budget / a.budget)) : 0;
  $('budget-fill').style.width = `${frac * 100}%`;

  ($('expired-banner') as HTMLDivElement).hidden = !state.expired;

  const banner = $('terminate-banner');
  const terminated = a.suggestion.action === 'terminate';
  banner.hidden = !terminated;
  banner.textContent = a.done
    ? 'session terminated: the ranking below is final'
    : 'no affordable feature left: terminate to finish';

  const err = $('session-error');
  err.hidden = state.sessionError === null;
  err.textContent = state.sessionError ?? '';

  renderFeatureGrid(state, a);
  renderRanking(a);
  renderNeighbors(a.neighbors);

  const pc = a.predicted_cluster;
  $('predicted-cluster').textContent =
    `predicted ${pc.kind} ${fmt(pc.id)} holding ${fmt(pc.size)} train points`;
  ($('terminate-btn') as HTMLButtonElement).disabled =
    a.done || state.inFlight || state.expired;
}

function featureCard(state: UiState, a: Advice, f: FeatureInfo): string {
  const revealed = a.revealed.find((r) => r.feature === f.name);
  const awaiting = a.awaiting_value.includes(f.name);
  const suggested = suggestedFeature(a) === f.name;
  const enabled = featureEnabled(state, f) && !state.inFlight;

  const classes = ['feature-card'];
  if (revealed) classes.push('revealed');
  if (suggested) classes.push('suggested');
  if (!revealed && !awaiting && !featureEnabled(state, f)) classes.push('disabled');

  const costLine = awaiting
    ? '<span class="cost">group member, no extra charge</span>'
    : `<span class="cost">cost ${fmt(f.cost)}</span>`;
  const groupNote = f.group
    ? `<div class="group-note">priced as a group: ${f.group.join(', ')}</div>`
    : '';

  const body = revealed
    ? `<div class="readout">value ${fmt(revealed.value)}</div>
       <div class="readout charged">charged ${fmt(revealed.charged)}</div>`
    : `<input type="number" step="any" placeholder="value"
              data-value-for="${f.name}" ${enabled ? '' : 'disabled'}>
       <button type="button" data-reveal="${f.name}" ${enabled ? '' : 'disabled'}>reveal</button>`;

  return `<div class="${classes.join(' ')}" data-feature="${f.name}">
    <div class="card-head">
      <span class="name">${f.name}</span>
      ${suggested ? '<span class="tag">suggested</span>' : ''}
      ${costLine}
    </div>
    ${groupNote}
    ${body}
  </div>`;
}

function renderFeatureGrid(state: UiState, a: Advice): void {
  const grid = $('feature-grid');
  // keep whatever the user has typed across re-renders
  const typed = new Map<string, string>();
  grid.querySelectorAll<HTMLInputElement>('input[data-value-for]').forEach((el) => {
    if (el.value !== '') typed.set(el.dataset.valueFor ?? '', el.value);
  });
  grid.innerHTML = state.features.map((f) => featureCard(state, a, f)).join('');
  grid.querySelectorAll<HTMLInputElement>('input[data-value-for]').forEach((el) => {
    const prev = typed.get(el.dataset.valueFor ?? '');
    if (prev !== undefined) el.value = prev;
  });
}

function renderRanking(a: Advice): void {
  const k = a.cluster_ranking.length;
  $('ranking-list').innerHTML = a.cluster_ranking
    .map((cid, i) => {
      const width = (((k - i) / k) * 100).toFixed(1);
      return `<li><span class="bar" style="width:${width}%"></span><span class="bar-label">cluster ${fmt(cid)}</span></li>`;
    })
    .join('');
}

function renderNeighbors(neighbors: Neighbor[]): void {
  const tbody = $('neighbor-table').querySelector('tbody');
  if (!tbody) throw new Error('neighbor table lost its body');
  tbody.innerHTML = neighbors
    .map((n) => `<tr><td>${fmt(n.id)}</td><td>${fmt(n.distance)}</td></tr>`)
    .join('');
}
