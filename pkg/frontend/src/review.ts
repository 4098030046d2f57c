import { ApiClient, ApiError } from './api.js';
import type { QueuePair, VerdictValue } from './types.js';

const MAX_ROUNDS = 2;

export interface ReviewOutcome {
  pair: QueuePair;
  verdict: VerdictValue;
  recordId: string;
  consensus: 'linked' | 'not-linked' | null;
}

/**
 * Keyboard-first review flow over the pending queue. Submissions advance the
 * queue optimistically; the server's consensus answer is reconciled into the
 * `enriched` set, and conflicts trigger a queue refresh instead of a silent
 * divergence.
 */
export class ReviewModel {
  pairs: QueuePair[] = [];
  position = 0;
  outcomes: ReviewOutcome[] = [];
  enriched = new Set<string>(); // "attack|cve" keys whose consensus is linked
  conflict = '';
  status: 'idle' | 'loading' | 'ready' | 'error' = 'idle';
  error = '';

  constructor(
    private readonly api: ApiClient,
    public reviewer: string,
  ) {}

  async loadQueue(attack?: string): Promise<void> {
    this.status = 'loading';
    try {
      const response = await this.api.queue(attack);
      this.pairs = response.pairs;
      this.position = 0;
      this.status = 'ready';
      this.error = '';
    } catch (err) {
      this.status = 'error';
      this.error = err instanceof ApiError ? err.message : String(err);
    }
  }

  current(): QueuePair | null {
    return this.position < this.pairs.length ? this.pairs[this.position] : null;
  }

  remaining(): number {
    return Math.max(0, this.pairs.length - this.position);
  }

  skip(): void {
    if (this.position < this.pairs.length) this.position += 1;
  }

  async submit(verdict: VerdictValue, note = ''): Promise<ReviewOutcome | null> {
    const pair = this.current();
    if (!pair) return null;
    this.position += 1; // optimistic advance; a conflict reloads the queue

    // First judgements always belong to round 1 (the server dedups identical
    // re-submissions there). Only a conflicting duplicate — the reviewer
    // changed their mind — escalates to the re-examination round.
    const rounds = [1];
    if (pair.rounds_used >= 1 && pair.rounds_used < MAX_ROUNDS) {
      rounds.push(pair.rounds_used + 1);
    }
    for (const round of rounds) {
      try {
        const response = await this.api.verdict({
          attack: pair.attack,
          attack_kind: pair.attack_kind,
          cve: pair.cve,
          verdict,
          reviewer: this.reviewer,
          round,
          note,
        });
        const outcome: ReviewOutcome = {
          pair,
          verdict,
          recordId: response.record_id,
          consensus: response.consensus,
        };
        this.outcomes.push(outcome);
        if (response.consensus === 'linked') {
          this.enriched.add(`${pair.attack}|${pair.cve}`);
        }
        return outcome;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          continue; // try the re-examination round, if any
        }
        this.position -= 1; // roll the optimistic advance back
        this.error = err instanceof ApiError ? err.message : String(err);
        this.status = 'error';
        return null;
      }
    }
    this.conflict = `verdict for ${pair.attack} / ${pair.cve}: conflicting duplicate verdict`;
    await this.loadQueue();
    return null;
  }

  badge(pair: QueuePair): 'enriched' | 'pending' {
    return this.enriched.has(`${pair.attack}|${pair.cve}`) ? 'enriched' : 'pending';
  }
}
