import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';
import type { ApiRequest, ApiResponse, Transport } from '../src/api';

export function loadFixture<T>(name: string): T {
  const path = fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
  return JSON.parse(readFileSync(path, 'utf8')) as T;
}

export interface RecordedStep {
  method: string;
  path: string;
  body?: unknown;
  response: unknown;
}

/** Serve recorded responses in order, regardless of the incoming request. */
export function recordedTransport(steps: RecordedStep[]): Transport {
  let i = 0;
  return async (_req: ApiRequest): Promise<ApiResponse> => {
    const step = steps[i++];
    if (!step) throw new Error(`no recorded response for request ${i}`);
    return { status: 200, body: step.response };
  };
}

/** Always answer with one fixed response. */
export function constantTransport(status: number, body: unknown): Transport {
  return async () => ({ status, body });
}

export function asRequests(steps: RecordedStep[]): ApiRequest[] {
  return steps.map((s) => {
    const req: ApiRequest = { method: s.method as ApiRequest['method'], path: s.path };
    if (s.body !== undefined) req.body = s.body;
    return req;
  });
}
