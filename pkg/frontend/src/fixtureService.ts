import type {
  EnrichmentPair,
  FetchLike,
  PredictItem,
  QueuePair,
  VerdictRequest,
  VerdictValue,
} from './types.js';

export interface FixtureCve {
  cve: string;
  title: string;
  score: number; // 0-100 scale, fixed per candidate
  inTruth: boolean;
}

interface VerdictRecord {
  attack: string;
  attack_kind: string;
  cve: string;
  verdict: VerdictValue;
  reviewer: string;
  round: number;
  record_id: string;
}

const MIN_REVIEWERS = 2;
const MAX_ROUNDS = 2;

function consensusOf(records: VerdictRecord[], attack: string, cve: string):
  'linked' | 'not-linked' | null {
  const latest = new Map<string, VerdictRecord>();
  for (const record of records) {
    if (record.attack !== attack || record.cve !== cve) continue;
    const current = latest.get(record.reviewer);
    if (!current || record.round > current.round) latest.set(record.reviewer, record);
  }
  const finals = [...latest.values()]
    .map((record) => record.verdict)
    .filter((verdict) => verdict !== 'undecided');
  if (finals.length < MIN_REVIEWERS) return null;
  if (finals.every((verdict) => verdict === 'linked')) return 'linked';
  if (finals.every((verdict) => verdict === 'not-linked')) return 'not-linked';
  return null;
}

/**
 * In-memory stand-in for the prediction/validation service, speaking the
 * documented wire contract verbatim. Rankings are fixed per construction so
 * scripted tests can sweep parameters deterministically.
 */
export class FixtureService {
  private records: VerdictRecord[] = [];
  private nextId = 1;

  constructor(
    private readonly attack: string,
    private readonly attackKind: string,
    private readonly candidates: FixtureCve[],
  ) {}

  private ranking(): FixtureCve[] {
    return [...this.candidates].sort(
      (a, b) => b.score - a.score || a.cve.localeCompare(b.cve),
    );
  }

  private predict(rho: number, k: number): { items: PredictItem[] } {
    const items = this.ranking()
      .slice(0, k)
      .map((candidate) => ({
        cve: candidate.cve,
        title: candidate.title,
        score: candidate.score,
        display: Math.round(candidate.score),
        kept: candidate.score > rho,
        in_truth: candidate.inTruth,
        consensus: consensusOf(this.records, this.attack, candidate.cve),
      }));
    return { items };
  }

  private queue(): { pairs: QueuePair[] } {
    const pairs = this.ranking()
      .filter((candidate) => !candidate.inTruth)
      .filter((candidate) => consensusOf(this.records, this.attack, candidate.cve) === null)
      .map((candidate) => ({
        attack: this.attack,
        attack_kind: this.attackKind,
        cve: candidate.cve,
        score: candidate.score,
        display: Math.round(candidate.score),
        attack_text: `description of ${this.attack}`,
        cve_text: candidate.title,
        rounds_used: Math.max(
          0,
          ...this.records
            .filter((r) => r.attack === this.attack && r.cve === candidate.cve)
            .map((r) => r.round),
        ),
      }));
    return { pairs };
  }

  private verdict(request: VerdictRequest): { status: number; body: unknown } {
    if (!this.candidates.some((candidate) => candidate.cve === request.cve)) {
      return { status: 404, body: { detail: 'pair is not a stored prediction' } };
    }
    if (request.round < 1 || request.round > MAX_ROUNDS) {
      return { status: 409, body: { detail: `round must be between 1 and ${MAX_ROUNDS}` } };
    }
    const existing = this.records.find(
      (record) =>
        record.attack === request.attack &&
        record.cve === request.cve &&
        record.reviewer === request.reviewer &&
        record.round === request.round,
    );
    if (existing) {
      if (existing.verdict !== request.verdict) {
        return { status: 409, body: { detail: 'conflicting duplicate verdict' } };
      }
      return {
        status: 200,
        body: {
          record_id: existing.record_id,
          consensus: consensusOf(this.records, request.attack, request.cve),
        },
      };
    }
    const record: VerdictRecord = {
      attack: request.attack,
      attack_kind: request.attack_kind,
      cve: request.cve,
      verdict: request.verdict,
      reviewer: request.reviewer,
      round: request.round,
      record_id: `rec-${this.nextId++}`,
    };
    this.records.push(record);
    return {
      status: 200,
      body: {
        record_id: record.record_id,
        consensus: consensusOf(this.records, request.attack, request.cve),
      },
    };
  }

  enrichment(): EnrichmentPair[] {
    const pairs = new Map<string, VerdictRecord[]>();
    for (const record of this.records) {
      const key = `${record.attack}|${record.cve}`;
      pairs.set(key, [...(pairs.get(key) ?? []), record]);
    }
    const out: EnrichmentPair[] = [];
    for (const [key, recs] of [...pairs.entries()].sort()) {
      const [attack, cve] = key.split('|');
      const candidate = this.candidates.find((c) => c.cve === cve);
      if (candidate?.inTruth) continue;
      if (consensusOf(this.records, attack, cve) !== 'linked') continue;
      out.push({
        attack,
        cve,
        reviewers: [...new Set(recs.map((r) => r.reviewer))].sort(),
        rounds: Math.max(...recs.map((r) => r.round)),
      });
    }
    return out;
  }

  /** The raw verdict log as JSON lines, as the real service persists it. */
  exportLog(): string {
    return this.records.map((record) => JSON.stringify(record)).join('\n');
  }

  /** A fresh service instance fed only by the exported log (replay path). */
  replayFromLog(log: string): FixtureService {
    const fresh = new FixtureService(this.attack, this.attackKind, this.candidates);
    for (const line of log.split('\n')) {
      if (line.trim()) fresh.records.push(JSON.parse(line) as VerdictRecord);
    }
    return fresh;
  }

  /** fetch-compatible entry point so ApiClient runs against the fixture unchanged. */
  fetcher(): FetchLike {
    return async (url, init) => {
      const path = url.replace(/^https?:\/\/[^/]+/, '');
      const respond = (status: number, body: unknown, contentType = 'application/json') =>
        new Response(
          contentType === 'application/json' ? JSON.stringify(body) : String(body),
          { status, headers: { 'content-type': contentType } },
        );

      if (path === '/predict' && init?.method === 'POST') {
        const body = JSON.parse(String(init.body));
        const rho = Number(body.rho ?? 58);
        const k = Number(body.k ?? 20);
        return respond(200, {
          query: body.entry_id ?? null,
          rho,
          k,
          ...this.predict(rho, k),
        });
      }
      if (path.startsWith('/queue')) {
        return respond(200, this.queue());
      }
      if (path === '/verdict' && init?.method === 'POST') {
        const result = this.verdict(JSON.parse(String(init.body)) as VerdictRequest);
        return respond(result.status, result.body);
      }
      if (path === '/enrichment') {
        const lines = this.enrichment().map((pair) => JSON.stringify(pair));
        return respond(200, lines.join('\n') + (lines.length ? '\n' : ''), 'text/plain');
      }
      if (path === '/calibration') {
        return respond(200, { rho: 58, k: 20 });
      }
      return respond(404, { detail: `no such route ${path}` });
    };
  }
}
