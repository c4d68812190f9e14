import { afterEach, describe, expect, it, vi } from 'vitest';
import { AdvisorClient, ApiError } from '../src/api';

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

function stubFetch(response: Response | Error) {
  const mock = vi.fn((_url: string, _init?: RequestInit) =>
    response instanceof Error ? Promise.reject(response) : Promise.resolve(response),
  );
  vi.stubGlobal('fetch', mock);
  return mock;
}

afterEach(() => vi.unstubAllGlobals());

async function expectApiError(p: Promise<unknown>): Promise<ApiError> {
  try {
    await p;
  } catch (err) {
    expect(err).toBeInstanceOf(ApiError);
    return err as ApiError;
  }
  throw new Error('expected the request to reject');
}

describe('request shapes', () => {
  it('meta() GETs /meta under the configured base', async () => {
    const mock = stubFetch(jsonResponse(200, { models: ['tree'] }));
    const got = await new AdvisorClient('http://svc:9').meta();
    expect(mock).toHaveBeenCalledWith('http://svc:9/meta', undefined);
    expect(got.models).toEqual(['tree']);
  });

  it('createSession POSTs the model and budget as JSON', async () => {
    const mock = stubFetch(jsonResponse(201, { session_id: 'abc' }));
    await new AdvisorClient().createSession('tree', 0.8);
    const [url, init] = mock.mock.calls[0];
    expect(url).toBe('/sessions');
    expect(init?.method).toBe('POST');
    expect(JSON.parse(String(init?.body))).toEqual({ model: 'tree', budget: 0.8 });
    expect((init?.headers as Record<string, string>)['Content-Type']).toBe('application/json');
  });

  it('reveal POSTs feature and value to the session subresource', async () => {
    const mock = stubFetch(jsonResponse(200, { done: false }));
    await new AdvisorClient().reveal('abc', 'f3', 0.42);
    const [url, init] = mock.mock.calls[0];
    expect(url).toBe('/sessions/abc/reveal');
    expect(JSON.parse(String(init?.body))).toEqual({ feature: 'f3', value: 0.42 });
  });

  it('terminate POSTs with no body and delete resolves on 204', async () => {
    const mock = stubFetch(jsonResponse(200, { done: true }));
    await new AdvisorClient().terminate('abc');
    expect(mock.mock.calls[0][0]).toBe('/sessions/abc/terminate');
    expect(mock.mock.calls[0][1]?.body).toBeUndefined();

    stubFetch(new Response(null, { status: 204 }));
    await expect(new AdvisorClient().deleteSession('abc')).resolves.toBeUndefined();
  });
});

describe('error mapping', () => {
  it('a structured rejection surfaces status, code and message untouched', async () => {
    stubFetch(jsonResponse(409, { code: 'unaffordable', message: "'f1' costs too much" }));
    const err = await expectApiError(new AdvisorClient().reveal('abc', 'f1', 1));
    expect(err.status).toBe(409);
    expect(err.code).toBe('unaffordable');
    expect(err.message).toBe("'f1' costs too much");
  });

  it('a non-JSON failure body degrades to a generic http_error', async () => {
    stubFetch(new Response('boom', { status: 500 }));
    const err = await expectApiError(new AdvisorClient().meta());
    expect(err.status).toBe(500);
    expect(err.code).toBe('http_error');
    expect(err.message).toBe('HTTP 500');
  });

  it('a network failure becomes status 0 / unreachable', async () => {
    stubFetch(new TypeError('fetch failed'));
    const err = await expectApiError(new AdvisorClient().meta());
    expect(err.status).toBe(0);
    expect(err.code).toBe('unreachable');
  });
});
