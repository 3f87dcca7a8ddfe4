import type {
  ApiError,
  CommunitiesPayload,
  EditOp,
  PropagationPayload,
  SankeyPayload,
  SessionPayload,
  SessionView,
  SnapshotPayload,
  TreemapPayload,
} from './types';

export interface ApiRequest {
  method: 'GET' | 'POST' | 'DELETE';
  path: string;
  body?: unknown;
}

export interface ApiResponse {
  status: number;
  body: unknown;
}

export type Transport = (req: ApiRequest) => Promise<ApiResponse>;

export class ApiRejection extends Error {
  constructor(
    readonly status: number,
    readonly error: ApiError,
  ) {
    super(error.message);
  }
}

export class StaleFingerprint extends Error {
  constructor(expected: string, got: string) {
    super(`payload fingerprint ${got} does not match dataset ${expected}`);
  }
}

export function httpTransport(base: string, fetchImpl: typeof fetch = fetch): Transport {
  return async (req) => {
    const res = await fetchImpl(base + req.path, {
      method: req.method,
      headers: req.body === undefined ? {} : { 'content-type': 'application/json' },
      body: req.body === undefined ? undefined : JSON.stringify(req.body),
    });
    return { status: res.status, body: await res.json() };
  };
}

/**
 * Thin client over the service API. Keeps a log of every request it sends
 * and rejects payloads recorded against a different dataset fingerprint.
 */
export class ApiClient {
  readonly log: ApiRequest[] = [];
  private fingerprint: string | null = null;

  constructor(private readonly transport: Transport) {}

  private async call<T>(req: ApiRequest): Promise<T> {
    this.log.push(req);
    const res = await this.transport(req);
    if (res.status >= 400) {
      throw new ApiRejection(res.status, res.body as ApiError);
    }
    const payload = res.body as T & { fingerprint: string };
    if (this.fingerprint === null) {
      this.fingerprint = payload.fingerprint;
    } else if (payload.fingerprint !== this.fingerprint) {
      throw new StaleFingerprint(this.fingerprint, payload.fingerprint);
    }
    return payload;
  }

  snapshot(date?: string): Promise<SnapshotPayload> {
    const q = date ? `?date=${date}` : '';
    return this.call({ method: 'GET', path: `/api/v1/network/snapshot${q}` });
  }

  communities(sessionId?: string): Promise<CommunitiesPayload> {
    const q = sessionId ? `?session_id=${sessionId}` : '';
    return this.call({ method: 'GET', path: `/api/v1/communities${q}` });
  }

  treemap(sessionId?: string): Promise<TreemapPayload> {
    const q = sessionId ? `?session_id=${sessionId}` : '';
    return this.call({ method: 'GET', path: `/api/v1/treemap${q}` });
  }

  createSession(date?: string): Promise<SessionPayload> {
    return this.call({
      method: 'POST',
      path: '/api/v1/sessions',
      body: date ? { date } : {},
    });
  }

  session(sessionId: string): Promise<SessionView> {
    return this.call({ method: 'GET', path: `/api/v1/sessions/${sessionId}` });
  }

  edit(sessionId: string, op: EditOp): Promise<SessionView> {
    return this.call({
      method: 'POST',
      path: `/api/v1/sessions/${sessionId}/edits`,
      body: op,
    });
  }

  propagation(node: string, sessionId?: string): Promise<PropagationPayload> {
    const q = sessionId ? `?session_id=${sessionId}` : '';
    return this.call({ method: 'GET', path: `/api/v1/propagation/${node}${q}` });
  }

  sankey(node: string, sessionId?: string): Promise<SankeyPayload> {
    const q = sessionId ? `?session_id=${sessionId}` : '';
    return this.call({ method: 'GET', path: `/api/v1/sankey/${node}${q}` });
  }
}
