// Thin client over the QC service HTTP API. This is the UI's only door to
// the backend: no direct store access, one request per analyst action.

import type {
  AnnotationExportWire,
  AnnotationWire,
  ClueWire,
  MissedWire,
  StageWire,
  TransitionRow,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }

  /** Conflicts and illegal transitions mean our view is stale: refetch. */
  get staleState(): boolean {
    return this.status === 409 || this.status === 422;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ApiOptions {
  fetchFn?: FetchLike;
  actor?: string;
}

export class QcApiClient {
  private readonly fetchFn: FetchLike;
  private readonly actor: string;

  constructor(
    readonly baseUrl: string,
    options: ApiOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
    this.actor = options.actor ?? 'analyst';
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: {
        'Content-Type': 'application/json',
        'X-Actor': this.actor,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let payload: unknown;
    try {
      payload = await response.json();
    } catch {
      throw new ApiError(response.status, 'bad_response', 'response body is not JSON');
    }
    const envelope = payload as { data?: T; error?: { code: string; message: string } };
    if (!response.ok || envelope.error) {
      const err = envelope.error ?? { code: 'unknown', message: `HTTP ${response.status}` };
      throw new ApiError(response.status, err.code, err.message);
    }
    return envelope.data as T;
  }

  getClues(imageId: string): Promise<ClueWire[]> {
    return this.request('GET', `/images/${encodeURIComponent(imageId)}/clues`);
  }

  async getAnnotations(imageId: string): Promise<AnnotationWire[]> {
    const data = await this.request<AnnotationExportWire>(
      'GET',
      `/images/${encodeURIComponent(imageId)}/annotations`,
    );
    return data.annotations;
  }

  getTransitions(): Promise<{ transitions: TransitionRow[] }> {
    return this.request('GET', '/transitions');
  }

  convertClue(
    imageId: string,
    clueId: string,
    body: { polygon?: number[]; timestamp?: number; damage_label?: string } = {},
  ): Promise<AnnotationWire> {
    return this.request(
      'POST',
      `/images/${encodeURIComponent(imageId)}/clues/${encodeURIComponent(clueId)}/convert`,
      body,
    );
  }

  dismissClue(imageId: string, clueId: string, body: { timestamp?: number } = {}): Promise<ClueWire> {
    return this.request(
      'POST',
      `/images/${encodeURIComponent(imageId)}/clues/${encodeURIComponent(clueId)}/dismiss`,
      body,
    );
  }

  drawAnnotation(
    imageId: string,
    polygon: number[],
    body: { timestamp?: number; damage_label?: string } = {},
  ): Promise<AnnotationWire> {
    return this.request('POST', `/images/${encodeURIComponent(imageId)}/annotations`, {
      polygon,
      ...body,
    });
  }

  approveAnnotation(imageId: string, annotationId: string, timestamp?: number): Promise<StageWire> {
    return this.request(
      'POST',
      `/images/${encodeURIComponent(imageId)}/annotations/${encodeURIComponent(annotationId)}/approve`,
      { timestamp },
    );
  }

  qcOpen(imageId: string, stage: 1 | 2, timestamp: number): Promise<StageWire> {
    return this.request('POST', `/images/${encodeURIComponent(imageId)}/qc${stage}/open`, {
      timestamp,
    });
  }

  qcClose(imageId: string, stage: 1 | 2, timestamp: number): Promise<StageWire> {
    return this.request('POST', `/images/${encodeURIComponent(imageId)}/qc${stage}/close`, {
      timestamp,
    });
  }

  qcComplete(imageId: string, stage: 1 | 2): Promise<StageWire> {
    return this.request('POST', `/images/${encodeURIComponent(imageId)}/qc${stage}/complete`, {});
  }

  flagMissed(imageId: string, body: { timestamp?: number; note?: string } = {}): Promise<MissedWire> {
    return this.request('POST', `/images/${encodeURIComponent(imageId)}/missed`, body);
  }
}
