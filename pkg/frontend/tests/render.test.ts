import { beforeEach, describe, expect, it } from 'vitest';
import { ApiError } from '../src/api';
import { fmt, mountApp, renderApp } from '../src/render';
import {
  adviceArrived,
  initialState,
  metaFailed,
  metaLoaded,
  mutationFailed,
  sessionStarted,
  startRejected,
  validateStart,
} from '../src/state';
import type { UiState } from '../src/state';
import type { Advice, ErrorBody, Meta, SessionCreated } from '../src/types';
import createdFix from './fixtures/session_created.json';
import firstFix from './fixtures/after_first_reveal.json';
import secondFix from './fixtures/after_second_reveal.json';
import terminatedFix from './fixtures/after_terminate.json';
import doneErrFix from './fixtures/error_session_done.json';
import unaffordableErrFix from './fixtures/error_unaffordable.json';
import metaFix from './fixtures/meta.json';

const meta = metaFix as unknown as Meta;
const created = createdFix as unknown as SessionCreated;
const afterFirst = firstFix as unknown as Advice;
const afterSecond = secondFix as unknown as Advice;
const afterTerminate = terminatedFix as unknown as Advice;
const doneErr = doneErrFix as ErrorBody;
const unaffordableErr = unaffordableErrFix as ErrorBody;

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
};

function sessionState(advice?: Advice): UiState {
  let s = sessionStarted(metaLoaded(initialState(), meta), created);
  if (advice) s = adviceArrived(s, advice);
  return s;
}

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  mountApp($('app'));
});

describe('start screen', () => {
  it('a failed meta fetch shows the retry banner', () => {
    renderApp(metaFailed(initialState()));
    expect($('offline-banner').hidden).toBe(false);
    expect($('retry-btn')).toBeTruthy();
    renderApp(metaLoaded(initialState(), meta));
    expect($('offline-banner').hidden).toBe(true);
  });

  it('models from the meta payload fill the selector', () => {
    renderApp(metaLoaded(initialState(), meta));
    const opts = Array.from(($('model-select') as HTMLSelectElement).options);
    expect(opts.map((o) => o.value)).toEqual(meta.models);
  });

  it('a zero budget is rejected inline before any request', () => {
    const msg = validateStart('tree', 0);
    expect(msg).not.toBeNull();
    renderApp(startRejected(metaLoaded(initialState(), meta), msg ?? ''));
    expect($('start-error').hidden).toBe(false);
    expect($('start-error').textContent).toMatch(/positive/);
  });
});

describe('feature grid', () => {
  it('draws one card per catalog feature with the suggested one highlighted', () => {
    renderApp(sessionState());
    const cards = document.querySelectorAll('#feature-grid .feature-card');
    expect(cards.length).toBe(created.features.length);
    const suggested = document.querySelectorAll('#feature-grid .feature-card.suggested');
    expect(suggested.length).toBe(1);
    expect(suggested[0].getAttribute('data-feature')).toBe('f0');
    expect($('terminate-banner').hidden).toBe(true);
  });

  it('a ten-feature catalog yields ten input cards', () => {
    const features = Array.from({ length: 10 }, (_, j) => ({
      name: `g${j}`,
      cost: 0.05,
      group: null,
    }));
    const advice: Advice = {
      ...created,
      revealed: [],
      suggestion: { action: 'reveal', feature: 'g3', cost: 0.05 },
    };
    renderApp({ ...sessionState(advice), features });
    const inputs = document.querySelectorAll('#feature-grid input[data-value-for]');
    expect(inputs.length).toBe(10);
    expect(document.querySelectorAll('.feature-card.suggested').length).toBe(1);
  });

  it('revealed features render read-only with their payload numbers', () => {
    renderApp(sessionState(afterFirst));
    const card = document.querySelector('.feature-card[data-feature="f0"]');
    expect(card?.classList.contains('revealed')).toBe(true);
    expect(card?.querySelector('input, button')).toBeNull();
    expect(card?.textContent).toContain(fmt(afterFirst.revealed[0].value));
    expect(card?.textContent).toContain(fmt(afterFirst.revealed[0].charged));
    const others = document.querySelectorAll('#feature-grid input[data-value-for]');
    expect(others.length).toBe(created.features.length - 1);
  });

  it('features priced above the remaining budget are disabled', () => {
    renderApp(sessionState({ ...afterFirst, remaining_budget: 0.1 }));
    const buttons = document.querySelectorAll<HTMLButtonElement>('#feature-grid button[data-reveal]');
    expect(buttons.length).toBeGreaterThan(0);
    buttons.forEach((b) => expect(b.disabled).toBe(true));
  });

  it('an in-flight mutation disables every submit control', () => {
    const locked: UiState = { ...sessionState(afterFirst), inFlight: true };
    renderApp(locked);
    document
      .querySelectorAll<HTMLButtonElement>('#feature-grid button[data-reveal]')
      .forEach((b) => expect(b.disabled).toBe(true));
    expect(($('terminate-btn') as HTMLButtonElement).disabled).toBe(true);
  });

  it('typed values survive a re-render', () => {
    const s = sessionState();
    renderApp(s);
    const input = document.querySelector<HTMLInputElement>('input[data-value-for="f1"]');
    expect(input).not.toBeNull();
    if (input) input.value = '0.33';
    renderApp(s);
    expect(document.querySelector<HTMLInputElement>('input[data-value-for="f1"]')?.value).toBe('0.33');
  });
});

describe('session invariants', () => {
  const payloads: [string, Advice][] = [
    ['created', created],
    ['after first reveal', afterFirst],
    ['after second reveal', afterSecond],
    ['after terminate', afterTerminate],
  ];

  it.each(payloads)('%s: exactly one suggestion highlight or a terminate banner', (_, advice) => {
    renderApp(sessionState(advice));
    const suggested = document.querySelectorAll('.feature-card.suggested').length;
    const banner = $('terminate-banner').hidden ? 0 : 1;
    expect(suggested + banner).toBe(1);
  });

  it('the budget gauge quotes the payload numbers verbatim', () => {
    renderApp(sessionState(afterSecond));
    const text = $('budget-text').textContent ?? '';
    expect(text).toContain(fmt(afterSecond.remaining_budget));
    expect(text).toContain(fmt(afterSecond.budget));
    // the float noise in the fixture is the proof nothing was rounded
    expect(text).toContain('0.30000000000000004');
  });

  it('a terminate payload shows the banner and accepts no more input', () => {
    renderApp(sessionState(afterTerminate));
    expect($('terminate-banner').hidden).toBe(false);
    expect($('terminate-banner').textContent).toMatch(/final/);
    expect(($('terminate-btn') as HTMLButtonElement).disabled).toBe(true);
    document
      .querySelectorAll<HTMLInputElement>('#feature-grid input, #feature-grid button')
      .forEach((el) => expect(el.disabled).toBe(true));
  });
});

describe('ranking and neighbors', () => {
  it('the ranking list is the payload permutation of all K clusters', () => {
    for (const advice of [created as Advice, afterFirst]) {
      renderApp(sessionState(advice));
      const labels = Array.from(document.querySelectorAll('#ranking-list .bar-label'));
      const ids = labels.map((el) => Number((el.textContent ?? '').replace('cluster', '').trim()));
      expect(ids).toEqual(advice.cluster_ranking);
      expect([...ids].sort((a, b) => a - b)).toEqual(
        Array.from({ length: meta.n_clusters }, (_, i) => i),
      );
    }
  });

  it('the neighbor table mirrors the payload rows verbatim and in order', () => {
    renderApp(sessionState(created));
    const rows = Array.from(document.querySelectorAll('#neighbor-table tbody tr'));
    expect(rows.length).toBe(created.neighbors.length);
    rows.forEach((row, i) => {
      const cells = Array.from(row.querySelectorAll('td')).map((td) => td.textContent);
      expect(cells).toEqual([fmt(created.neighbors[i].id), fmt(created.neighbors[i].distance)]);
    });
  });

  it('the predicted cluster line quotes kind, id and size from the payload', () => {
    renderApp(sessionState(afterFirst));
    const text = $('predicted-cluster').textContent ?? '';
    expect(text).toContain(afterFirst.predicted_cluster.kind);
    expect(text).toContain(fmt(afterFirst.predicted_cluster.id));
    expect(text).toContain(fmt(afterFirst.predicted_cluster.size));
  });
});

describe('thin client contract', () => {
  function payloadNumbers(x: unknown, out: Set<string>): Set<string> {
    if (typeof x === 'number') out.add(fmt(x));
    else if (Array.isArray(x)) x.forEach((v) => payloadNumbers(v, out));
    else if (x && typeof x === 'object') {
      Object.values(x).forEach((v) => payloadNumbers(v, out));
    }
    return out;
  }

  function renderedNumbers(root: Node): string[] {
    const walker = document.createTreeWalker(root, NodeFilter.SHOW_TEXT);
    const found: string[] = [];
    let node = walker.nextNode();
    while (node) {
      const tokens = (node.nodeValue ?? '').match(/(?<![\w.])\d+(?:\.\d+)?(?:e-?\d+)?(?![\w.])/g);
      if (tokens) found.push(...tokens);
      node = walker.nextNode();
    }
    return found;
  }

  const cases: [string, Advice][] = [
    ['created', created],
    ['after first reveal', afterFirst],
    ['after second reveal', afterSecond],
    ['after terminate', afterTerminate],
  ];

  it.each(cases)('%s: every rendered number exists in a service payload', (_, advice) => {
    renderApp(sessionState(advice));
    const allowed = payloadNumbers([advice, created.features], new Set<string>());
    const rendered = renderedNumbers($('session-panel'));
    expect(rendered.length).toBeGreaterThan(0);
    for (const token of rendered) {
      expect(allowed, `rendered ${token} not found in any payload`).toContain(token);
    }
  });
});

describe('error surfaces', () => {
  it('server validation errors land inline without rewording', () => {
    const s = mutationFailed(
      sessionState(afterFirst),
      new ApiError(409, unaffordableErr.code, unaffordableErr.message),
    );
    renderApp(s);
    expect($('session-error').hidden).toBe(false);
    expect($('session-error').textContent).toBe(unaffordableErr.message);
    expect($('expired-banner').hidden).toBe(true);
  });

  it('a finished-session conflict reads exactly as the service sent it', () => {
    const s = mutationFailed(
      sessionState(afterTerminate),
      new ApiError(409, doneErr.code, doneErr.message),
    );
    renderApp(s);
    expect($('session-error').textContent).toBe(doneErr.message);
  });

  it('an evicted session prompts a restart instead of an error line', () => {
    const s = mutationFailed(
      sessionState(afterFirst),
      new ApiError(404, 'unknown_session', 'no session'),
    );
    renderApp(s);
    expect($('expired-banner').hidden).toBe(false);
    expect($('session-error').hidden).toBe(true);
    expect($('expired-restart-btn')).toBeTruthy();
  });
});
