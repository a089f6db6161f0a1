import { ApiClient } from './api.js';
import { Region, SearchResult, SelectionState } from './types.js';

export interface ResultCard {
  rank: number;
  id: string;
  classLabel: string;
  /** Score string shown to the user: the API value, six decimals. */
  scoreText: string;
  score: number;
  imageUrl: string;
  overlayUrl: string;
}

export interface ViewHooks {
  onResults(cards: ResultCard[]): void;
  onError(message: string): void;
  onStateChange(state: SelectionState): void;
}

/**
 * Drives region search: keeps the selection state, issues at most one
 * in-flight request (latest wins), and discards stale responses. The UI
 * performs no similarity math; every displayed number comes from the API.
 */
export class SearchController {
  private state: SelectionState = { queryId: null, region: null, k: 9, groupClasses: null };
  private generation = 0;
  private abort: AbortController | null = null;

  constructor(
    private api: ApiClient,
    private hooks: ViewHooks,
    private formatScore: (s: number) => string,
  ) {}

  getState(): SelectionState {
    return { ...this.state };
  }

  setQuery(queryId: string): Promise<void> {
    // picking a query (including a result card) resets the region
    this.state = { ...this.state, queryId, region: null };
    this.hooks.onStateChange(this.getState());
    return this.runSearch();
  }

  setRegion(region: Region | null): Promise<void> {
    if (this.state.queryId === null) {
      return Promise.resolve();
    }
    this.state = { ...this.state, region };
    this.hooks.onStateChange(this.getState());
    return this.runSearch();
  }

  setK(k: number): Promise<void> {
    this.state = { ...this.state, k };
    return this.state.queryId === null ? Promise.resolve() : this.runSearch();
  }

  setGroupClasses(groupClasses: number | null): Promise<void> {
    this.state = { ...this.state, groupClasses };
    return this.state.queryId === null ? Promise.resolve() : this.runSearch();
  }

  async runSearch(): Promise<void> {
    const { queryId, region, k, groupClasses } = this.state;
    if (queryId === null) {
      return;
    }
    const myGeneration = ++this.generation;
    this.abort?.abort();
    this.abort = new AbortController();
    let results: SearchResult[];
    try {
      results = await this.api.search(queryId, k, region, groupClasses, this.abort.signal);
    } catch (err) {
      if ((err as Error).name === 'AbortError') {
        return; // superseded by a newer request
      }
      if (myGeneration === this.generation) {
        this.hooks.onError((err as Error).message);
      }
      return;
    }
    if (myGeneration !== this.generation) {
      return; // stale response
    }
    this.hooks.onResults(results.map((r) => this.toCard(queryId, r)));
  }

  private toCard(queryId: string, r: SearchResult): ResultCard {
    return {
      rank: r.rank,
      id: r.id,
      classLabel: r.class_label,
      scoreText: this.formatScore(r.score),
      score: r.score,
      imageUrl: this.api.imageUrl(r.id),
      overlayUrl: this.api.mapOverlayUrl(queryId, r.id),
    };
  }
}
