import type {
  CalibrationResponse,
  EnrichmentPair,
  FetchLike,
  PredictResponse,
  QueueResponse,
  VerdictRequest,
  VerdictResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

export interface PredictQuery {
  text?: string;
  entryId?: string;
  rho: number;
  k: number;
}

/** Thin typed client for the service wire protocol; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    private readonly reviewerToken?: string,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`, 0);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        // plain-text error body
      }
      throw new ApiError(detail, response.status);
    }
    return response;
  }

  async predict(query: PredictQuery): Promise<PredictResponse> {
    const body: Record<string, unknown> = { rho: query.rho, k: query.k };
    if (query.entryId) body.entry_id = query.entryId;
    else body.text = query.text ?? '';
    const response = await this.request('/predict', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    return (await response.json()) as PredictResponse;
  }

  async queue(attack?: string): Promise<QueueResponse> {
    const suffix = attack ? `?attack=${encodeURIComponent(attack)}` : '';
    const response = await this.request('/queue' + suffix);
    return (await response.json()) as QueueResponse;
  }

  async verdict(request: VerdictRequest): Promise<VerdictResponse> {
    const headers: Record<string, string> = { 'content-type': 'application/json' };
    if (this.reviewerToken) headers['x-reviewer-token'] = this.reviewerToken;
    const response = await this.request('/verdict', {
      method: 'POST',
      headers,
      body: JSON.stringify(request),
    });
    return (await response.json()) as VerdictResponse;
  }

  async enrichment(): Promise<EnrichmentPair[]> {
    const response = await this.request('/enrichment');
    const text = await response.text();
    return text
      .split('\n')
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as EnrichmentPair);
  }

  async calibration(): Promise<CalibrationResponse> {
    const response = await this.request('/calibration');
    return (await response.json()) as CalibrationResponse;
  }
}
