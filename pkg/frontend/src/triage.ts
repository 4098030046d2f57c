import { ApiClient, ApiError } from './api.js';
import type { PredictItem } from './types.js';

export type TriageStatus = 'idle' | 'loading' | 'ready' | 'error';

export interface TriageRow {
  cve: string;
  title: string;
  score: number;
  display: number;
  greyed: boolean; // below the threshold cut: shown but dimmed, never hidden
  inTruth: boolean;
  consensus: 'linked' | 'not-linked' | null;
}

export interface TriageQuery {
  text?: string;
  entryId?: string;
}

/**
 * State of the explore view. The list re-fetches on every query/rho/k change;
 * the displayed cut always mirrors the service's own threshold decision (the
 * per-item `kept` flag) — the UI never re-scores anything locally.
 */
export class TriageModel {
  status: TriageStatus = 'idle';
  error = '';
  rho = 58;
  k = 20;
  query: TriageQuery | null = null;
  items: PredictItem[] = [];
  fetches = 0;

  constructor(private readonly api: ApiClient) {}

  async explore(query: TriageQuery): Promise<void> {
    this.query = query;
    await this.refresh();
  }

  async setRho(rho: number): Promise<void> {
    if (rho === this.rho) return;
    this.rho = rho;
    if (this.query) await this.refresh();
  }

  async setK(k: number): Promise<void> {
    if (k === this.k) return;
    this.k = k;
    if (this.query) await this.refresh();
  }

  async retry(): Promise<void> {
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.query) return;
    this.status = 'loading';
    this.fetches += 1;
    try {
      const response = await this.api.predict({
        text: this.query.text,
        entryId: this.query.entryId,
        rho: this.rho,
        k: this.k,
      });
      this.items = response.items;
      this.status = 'ready';
      this.error = '';
    } catch (err) {
      // keep the stale list out of sight; an inline retry state replaces it
      this.status = 'error';
      this.error = err instanceof ApiError ? err.message : String(err);
    }
  }

  rows(): TriageRow[] {
    return this.items.map((item) => ({
      cve: item.cve,
      title: item.title,
      score: item.score,
      display: item.display,
      greyed: !item.kept,
      inTruth: item.in_truth,
      consensus: item.consensus,
    }));
  }

  keptCount(): number {
    return this.items.filter((item) => item.kept).length;
  }
}
