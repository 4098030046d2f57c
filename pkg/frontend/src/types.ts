// Wire types of the prediction/validation service. The UI renders these
// verbatim: every displayed number comes from a response field.

export interface PredictItem {
  cve: string;
  title: string;
  score: number;     // continuous 0-100 scale
  display: number;   // integer 0-100 presentation
  kept: boolean;     // inside the service's threshold cut for the requested rho
  in_truth: boolean;
  consensus: 'linked' | 'not-linked' | null;
}

export interface PredictResponse {
  query: string | null;
  rho: number;
  k: number;
  items: PredictItem[];
}

export interface QueuePair {
  attack: string;
  attack_kind: string;
  cve: string;
  score: number;
  display: number;
  attack_text: string;
  cve_text: string;
  rounds_used: number;
}

export interface QueueResponse {
  pairs: QueuePair[];
}

export type VerdictValue = 'linked' | 'not-linked' | 'undecided';

export interface VerdictRequest {
  attack: string;
  attack_kind: string;
  cve: string;
  verdict: VerdictValue;
  reviewer: string;
  round: number;
  note?: string;
}

export interface VerdictResponse {
  record_id: string;
  consensus: 'linked' | 'not-linked' | null;
}

export interface EnrichmentPair {
  attack: string;
  cve: string;
  reviewers: string[];
  rounds: number;
}

export interface CalibrationResponse {
  rho: number;
  k: number;
  auc?: number;
  rho_star?: number;
  eer_rho?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
