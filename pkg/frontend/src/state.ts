import { ApiError } from './api';
import type { Advice, FeatureInfo, Meta, SessionCreated } from './types';

/**
 * Everything the screen shows is a pure function of this record.  The
 * numeric content lives in `meta`, `features` and `advice`, which are service
 * payloads stored untouched; the rest is flags and inline error strings.
 */
export interface UiState {
  meta: Meta | null;
  offline: boolean; // /meta failed, show the retry banner
  startError: string | null; // inline message under the start form
  features: FeatureInfo[]; // catalog from the create-session payload
  advice: Advice | null; // latest session payload, rendered verbatim
  inFlight: boolean; // one mutation per session at a time
  sessionError: string | null; // inline message from the last failed mutation
  expired: boolean; // session evicted server-side, prompt a restart
}

export function initialState(): UiState {
  return {
    meta: null,
    offline: false,
    startError: null,
    features: [],
    advice: null,
    inFlight: false,
    sessionError: null,
    expired: false,
  };
}

export function metaLoaded(s: UiState, meta: Meta): UiState {
  return { ...s, meta, offline: false };
}

export function metaFailed(s: UiState): UiState {
  return { ...s, offline: true };
}

/** Pre-flight check mirroring the service's create-session validation. */
export function validateStart(model: string, budget: number): string | null {
  if (!model) return 'pick a model first';
  if (!Number.isFinite(budget) || budget <= 0) {
    return 'budget must be a positive number';
  }
  return null;
}

export function startRejected(s: UiState, message: string): UiState {
  return { ...s, startError: message };
}

export function sessionStarted(s: UiState, created: SessionCreated): UiState {
  const { features, ...advice } = created;
  return {
    ...s,
    features,
    advice,
    startError: null,
    inFlight: false,
    sessionError: null,
    expired: false,
  };
}

/** Claim the session's single mutation slot; null when it is already taken. */
export function beginMutation(s: UiState): UiState | null {
  if (s.inFlight || s.advice === null || s.expired) return null;
  return { ...s, inFlight: true, sessionError: null };
}

export function adviceArrived(s: UiState, advice: Advice): UiState {
  return { ...s, advice, inFlight: false, sessionError: null };
}

export function mutationFailed(s: UiState, err: ApiError): UiState {
  if (err.status === 404 && err.code === 'unknown_session') {
    return { ...s, inFlight: false, expired: true };
  }
  return { ...s, inFlight: false, sessionError: err.message };
}

export function sessionClosed(s: UiState): UiState {
  return { ...initialState(), meta: s.meta };
}

// -- pure view helpers -------------------------------------------------

export const revealedNames = (a: Advice): Set<string> =>
  new Set(a.revealed.map((r) => r.feature));

/**
 * A feature accepts a value while the session runs, it is unrevealed, and
 * either the service listed it as a pending free group member or its catalog
 * cost fits the remaining budget.  Both numbers come straight from payloads;
 * the client only compares them.
 */
export function featureEnabled(s: UiState, f: FeatureInfo): boolean {
  const a = s.advice;
  if (a === null || a.done || s.expired) return false;
  if (revealedNames(a).has(f.name)) return false;
  if (a.awaiting_value.includes(f.name)) return true;
  return f.cost <= a.remaining_budget;
}

export const suggestedFeature = (a: Advice): string | null =>
  a.suggestion.action === 'reveal' ? a.suggestion.feature : null;
