// End-to-end check against the real service: a session driven through the
// HTTP client must match, field for field, the advice the library computes
// for the same history without HTTP in the loop.
import { execFileSync, spawn } from 'node:child_process';
import type { ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { AdvisorClient, ApiError } from '../src/api';
import { fmt, mountApp, renderApp } from '../src/render';
import { adviceArrived, initialState, metaLoaded, sessionStarted } from '../src/state';
import type { Advice } from '../src/types';

const HELPER = join(dirname(fileURLToPath(import.meta.url)), 'helpers', 'advice_probe.py');

interface HistoryOp {
  op: 'reveal' | 'terminate';
  feature?: string;
  value?: number;
}

let scratch = '';
let artifactsDir = '';
let server: ChildProcess | null = null;
let client: AdvisorClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const addr = srv.address();
      if (addr && typeof addr === 'object') srv.close(() => resolve(addr.port));
      else reject(new Error('could not allocate a port'));
    });
  });
}

async function waitForService(deadlineMs: number): Promise<void> {
  const t0 = Date.now();
  for (;;) {
    try {
      await client.meta();
      return;
    } catch (err) {
      if (Date.now() - t0 > deadlineMs) throw err;
      await new Promise((r) => setTimeout(r, 250));
    }
  }
}

function libraryAdvice(budget: number, history: HistoryOp[]): Advice {
  const out = execFileSync('python3', [
    HELPER,
    'replay',
    artifactsDir,
    JSON.stringify({ policy: 'tree', budget, history }),
  ]);
  return JSON.parse(out.toString()) as Advice;
}

// session ids differ by construction (the service mints a uuid, the replay
// does not); everything else must agree exactly
function comparable(a: Advice): Omit<Advice, 'session_id'> {
  const { session_id: _sid, ...rest } = a;
  return rest;
}

beforeAll(async () => {
  scratch = mkdtempSync(join(tmpdir(), 'advisor-ui-live-'));
  // the pipeline steps log progress; the helper prints the bundle path last
  const lines = execFileSync('python3', [HELPER, 'setup', scratch]).toString().trim().split('\n');
  artifactsDir = lines[lines.length - 1];
  const port = await freePort();
  server = spawn(
    'python3',
    ['-m', 'frugalnn.cli', 'serve', '--out-dir', artifactsDir, '--port', String(port)],
    { stdio: ['ignore', 'ignore', 'inherit'] },
  );
  client = new AdvisorClient(`http://127.0.0.1:${port}`);
  await waitForService(30_000);
}, 120_000);

afterAll(() => {
  server?.kill();
  if (scratch) rmSync(scratch, { recursive: true, force: true });
});

describe('live service parity', () => {
  it('a fresh session matches the library advice for an empty history', async () => {
    const created = await client.createSession('tree', 0.8);
    expect(created.features.length).toBeGreaterThan(0);
    const { features: _catalog, ...advice } = created;
    expect(comparable(advice)).toEqual(comparable(libraryAdvice(0.8, [])));
    await client.deleteSession(created.session_id);
  }, 30_000);

  it('reveals and terminate agree with the direct library replay', async () => {
    const created = await client.createSession('tree', 0.8);
    const sid = created.session_id;
    expect(created.suggestion.action).toBe('reveal');
    const history: HistoryOp[] = [];

    const first = created.suggestion.action === 'reveal' ? created.suggestion.feature : '';
    history.push({ op: 'reveal', feature: first, value: 0.42 });
    const afterFirst = await client.reveal(sid, first, 0.42);
    expect(comparable(afterFirst)).toEqual(comparable(libraryAdvice(0.8, history)));

    if (afterFirst.suggestion.action === 'reveal') {
      const second = afterFirst.suggestion.feature;
      history.push({ op: 'reveal', feature: second, value: 0.17 });
      const afterSecond = await client.reveal(sid, second, 0.17);
      expect(comparable(afterSecond)).toEqual(comparable(libraryAdvice(0.8, history)));
    }

    history.push({ op: 'terminate' });
    const finished = await client.terminate(sid);
    expect(finished.done).toBe(true);
    expect(comparable(finished)).toEqual(comparable(libraryAdvice(0.8, history)));
  }, 60_000);

  it('the screen after a live reveal shows the numbers the library computed', async () => {
    const created = await client.createSession('tree', 0.8);
    const first = created.suggestion.action === 'reveal' ? created.suggestion.feature : '';
    const live = await client.reveal(created.session_id, first, 0.42);
    const independent = libraryAdvice(0.8, [{ op: 'reveal', feature: first, value: 0.42 }]);

    document.body.innerHTML = '<div id="app"></div>';
    mountApp(document.getElementById('app') as HTMLElement);
    const meta = await client.meta();
    renderApp(adviceArrived(sessionStarted(metaLoaded(initialState(), meta), created), live));

    const budgetText = document.getElementById('budget-text')?.textContent ?? '';
    expect(budgetText).toContain(fmt(independent.remaining_budget));
    const card = document.querySelector(`.feature-card[data-feature="${first}"]`);
    expect(card?.textContent).toContain(fmt(independent.revealed[0].value));
    const rows = Array.from(document.querySelectorAll('#neighbor-table tbody tr'));
    expect(rows.map((r) => r.querySelectorAll('td')[1].textContent)).toEqual(
      independent.neighbors.map((n) => fmt(n.distance)),
    );
    await client.deleteSession(created.session_id);
  }, 60_000);
});

describe('live service rejections', () => {
  it('a zero budget is refused with the documented code', async () => {
    await expect(client.createSession('tree', 0)).rejects.toMatchObject({
      status: 400,
      code: 'invalid_budget',
    });
  }, 30_000);

  it('asking for a session that never existed yields unknown_session', async () => {
    const err = await client.getSession('nope').catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).code).toBe('unknown_session');
  }, 30_000);

  it('revealing beyond the budget returns the unaffordable conflict', async () => {
    const created = await client.createSession('tree', 0.3);
    const first = created.suggestion.action === 'reveal' ? created.suggestion.feature : '';
    await client.reveal(created.session_id, first, 0.5);
    const another = created.features.find(
      (f) => f.name !== first && f.cost > 0.3 - created.features[0].cost,
    );
    expect(another).toBeDefined();
    await expect(
      client.reveal(created.session_id, another ? another.name : '', 0.1),
    ).rejects.toMatchObject({ status: 409, code: 'unaffordable' });
  }, 30_000);
});
