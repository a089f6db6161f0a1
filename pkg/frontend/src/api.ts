import { ImageInfo, Region, SearchResult } from './types.js';

export type FetchLike = typeof fetch;

export class ApiError extends Error {
  constructor(public status: number, public code: string) {
    super(`API error ${status}: ${code}`);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let code = 'unknown';
    try {
      const body = (await resp.json()) as { error?: string };
      code = body.error ?? code;
    } catch {
      // non-JSON error body; keep the generic code
    }
    throw new ApiError(resp.status, code);
  }
  return (await resp.json()) as T;
}

/** Thin client over the backend API; all numbers pass through untouched. */
export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchImpl: FetchLike = fetch,
  ) {}

  listImages(): Promise<ImageInfo[]> {
    return this.fetchImpl(`${this.baseUrl}/api/images`).then((r) => asJson<ImageInfo[]>(r));
  }

  search(
    queryId: string,
    k: number,
    region: Region | null,
    groupClasses: number | null,
    signal?: AbortSignal,
  ): Promise<SearchResult[]> {
    const body: Record<string, unknown> = { query_id: queryId, k };
    if (region !== null) {
      body.region = region;
    }
    if (groupClasses !== null) {
      body.group_classes = groupClasses;
    }
    return this.fetchImpl(`${this.baseUrl}/api/search`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    }).then((r) => asJson<SearchResult[]>(r));
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/api/image/${id}`;
  }

  mapOverlayUrl(queryId: string, candidateId: string): string {
    return `${this.baseUrl}/api/map?i=${encodeURIComponent(queryId)}&j=${encodeURIComponent(
      candidateId,
    )}&direction=j&render=png`;
  }
}
