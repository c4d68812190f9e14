import { AdvisorClient, ApiError } from './api';
import { mountApp, renderApp } from './render';
import {
  adviceArrived,
  beginMutation,
  initialState,
  metaFailed,
  metaLoaded,
  mutationFailed,
  sessionClosed,
  sessionStarted,
  startRejected,
  validateStart,
} from './state';
import type { UiState } from './state';
import './style.css';

const client = new AdvisorClient('');
let state: UiState = initialState();

function apply(next: UiState | null): void {
  if (next === null) return;
  state = next;
  renderApp(state);
}

const toApiError = (err: unknown): ApiError =>
  err instanceof ApiError ? err : new ApiError(0, 'unreachable', String(err));

async function loadMeta(): Promise<void> {
  try {
    apply(metaLoaded(state, await client.meta()));
  } catch {
    apply(metaFailed(state));
  }
}

async function startSession(): Promise<void> {
  const model = (document.getElementById('model-select') as HTMLSelectElement).value;
  const budget = Number((document.getElementById('budget-input') as HTMLInputElement).value);
  const bad = validateStart(model, budget);
  if (bad !== null) {
    apply(startRejected(state, bad));
    return;
  }
  try {
    apply(sessionStarted(state, await client.createSession(model, budget)));
  } catch (err) {
    const e = toApiError(err);
    if (e.status === 0) apply(metaFailed(state));
    else apply(startRejected(state, e.message));
  }
}

async function submitValue(feature: string): Promise<void> {
  const input = document.querySelector<HTMLInputElement>(
    `input[data-value-for="${feature}"]`,
  );
  const value = Number(input?.value);
  if (!input || input.value.trim() === '' || !Number.isFinite(value)) {
    apply({ ...state, sessionError: `enter a numeric value for ${feature}` });
    return;
  }
  const locked = beginMutation(state);
  if (locked === null) return; // a mutation is already on the wire
  apply(locked);
  const sid = state.advice;
  if (sid === null) return;
  try {
    apply(adviceArrived(state, await client.reveal(sid.session_id, feature, value)));
  } catch (err) {
    apply(mutationFailed(state, toApiError(err)));
  }
}

async function terminateSession(): Promise<void> {
  const locked = beginMutation(state);
  if (locked === null) return;
  apply(locked);
  const sid = state.advice;
  if (sid === null) return;
  try {
    apply(adviceArrived(state, await client.terminate(sid.session_id)));
  } catch (err) {
    apply(mutationFailed(state, toApiError(err)));
  }
}

function restart(): void {
  const sid = state.advice?.session_id;
  if (sid && !state.expired) {
    // fire and forget; the TTL sweep would reclaim it anyway
    client.deleteSession(sid).catch(() => undefined);
  }
  apply(sessionClosed(state));
}

function wire(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app mount point');
  mountApp(root);
  renderApp(state);

  const form = document.getElementById('start-form');
  form?.addEventListener('submit', (ev) => {
    ev.preventDefault();
    void startSession();
  });

  root.addEventListener('click', (ev) => {
    const t = ev.target as HTMLElement;
    if (t.id === 'retry-btn') void loadMeta();
    else if (t.id === 'terminate-btn') void terminateSession();
    else if (t.id === 'restart-btn' || t.id === 'expired-restart-btn') restart();
    else if (t.dataset.reveal) void submitValue(t.dataset.reveal);
  });

  // enter inside a value box submits that feature
  root.addEventListener('keydown', (ev) => {
    const t = ev.target as HTMLElement;
    if (ev.key === 'Enter' && t instanceof HTMLInputElement && t.dataset.valueFor) {
      ev.preventDefault();
      void submitValue(t.dataset.valueFor);
    }
  });

  void loadMeta();
}

wire();
