import type { Advice, ErrorBody, Meta, SessionCreated } from './types';

/**
 * Error carrying the service's flat {code, message} body.  Status 0 means
 * the request never reached the service at all (network failure), which the
 * UI treats differently from a structured rejection.
 */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

const JSON_HEADERS = { 'Content-Type': 'application/json' };

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, 'unreachable', String(err));
  }
  if (res.status === 204) return undefined as T;
  let body: unknown = null;
  try {
    body = await res.json();
  } catch {
    body = null;
  }
  if (!res.ok) {
    const e = (body ?? {}) as Partial<ErrorBody>;
    throw new ApiError(res.status, e.code ?? 'http_error', e.message ?? `HTTP ${res.status}`);
  }
  return body as T;
}

export class AdvisorClient {
  constructor(readonly base: string = '') {}

  meta(): Promise<Meta> {
    return request(`${this.base}/meta`);
  }

  createSession(model: string, budget: number): Promise<SessionCreated> {
    return request(`${this.base}/sessions`, {
      method: 'POST',
      headers: JSON_HEADERS,
      body: JSON.stringify({ model, budget }),
    });
  }

  getSession(sid: string): Promise<Advice> {
    return request(`${this.base}/sessions/${sid}`);
  }

  reveal(sid: string, feature: string, value: number): Promise<Advice> {
    return request(`${this.base}/sessions/${sid}/reveal`, {
      method: 'POST',
      headers: JSON_HEADERS,
      body: JSON.stringify({ feature, value }),
    });
  }

  terminate(sid: string): Promise<Advice> {
    return request(`${this.base}/sessions/${sid}/terminate`, { method: 'POST' });
  }

  deleteSession(sid: string): Promise<void> {
    return request(`${this.base}/sessions/${sid}`, { method: 'DELETE' });
  }
}
