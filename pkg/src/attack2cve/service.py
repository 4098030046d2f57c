"""Long-running service: prediction endpoint, calibration artifacts, and the
manual-validation store that accumulates recommended new links.

The verdict log is append-only; consensus is a pure function of the log, so
replaying it reproduces the enrichment set exactly. A pair is accepted once
at least two reviewers hold final Linked verdicts within two review rounds.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse

from .corpus import Corpus, EntryId, EntryKind, detect_kind
from .embedding import EmbeddingProvider, EmbeddingStore, embed_text
from .linkgraph import GroundTruthMap
from .preprocess import clean_only
from .similarity import (
    PredictionSet,
    SimilarityKind,
    display_score,
    predict_set,
    rank_cves,
    scaled_score,
)

DEFAULT_RHO = 58.0
DEFAULT_K = 20


class ServiceError(Exception):
    """Verdict rejected or request malformed."""


class Verdict(str, Enum):
    LINKED = "linked"
    NOT_LINKED = "not-linked"
    UNDECIDED = "undecided"

    @property
    def final(self) -> bool:
        return self is not Verdict.UNDECIDED


@dataclass
class ValidationRecord:
    """One reviewer's judgement of one (attack, cve) pair in one round."""

    attack: EntryId
    cve: EntryId
    verdict: Verdict
    round: int
    reviewer: str
    timestamp: str
    note: str = ""
    record_id: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "attack": self.attack.raw_id,
                "attack_kind": self.attack.kind.value,
                "cve": self.cve.raw_id,
                "verdict": self.verdict.value,
                "round": self.round,
                "reviewer": self.reviewer,
                "timestamp": self.timestamp,
                "note": self.note,
                "record_id": self.record_id,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(line: str) -> "ValidationRecord":
        obj = json.loads(line)
        return ValidationRecord(
            attack=EntryId(EntryKind(obj["attack_kind"]), obj["attack"]),
            cve=EntryId.from_raw(obj["cve"]),
            verdict=Verdict(obj["verdict"]),
            round=int(obj["round"]),
            reviewer=obj["reviewer"],
            timestamp=obj["timestamp"],
            note=obj.get("note", ""),
            record_id=obj.get("record_id", ""),
        )


Pair = tuple[EntryId, EntryId]


@dataclass
class VerdictLog:
    """Append-only verdict store; consensus state derives from the records alone."""

    path: str | None = None
    min_reviewers: int = 2
    max_rounds: int = 2
    records: list[ValidationRecord] = field(default_factory=list)

    @staticmethod
    def load(path: str, min_reviewers: int = 2, max_rounds: int = 2) -> "VerdictLog":
        log = VerdictLog(path=path, min_reviewers=min_reviewers, max_rounds=max_rounds)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        log.records.append(ValidationRecord.from_json(line))
        return log

    def _find(self, record: ValidationRecord) -> ValidationRecord | None:
        for existing in self.records:
            if (
                existing.attack == record.attack
                and existing.cve == record.cve
                and existing.reviewer == record.reviewer
                and existing.round == record.round
            ):
                return existing
        return None

    def submit(self, record: ValidationRecord) -> str:
        """Validate and durably append one verdict; idempotent on exact duplicates."""
        if not record.reviewer:
            raise ServiceError("reviewer must be non-empty")
        if not 1 <= record.round <= self.max_rounds:
            raise ServiceError(f"round must be between 1 and {self.max_rounds}")
        existing = self._find(record)
        if existing is not None:
            if existing.verdict is record.verdict:
                return existing.record_id
            raise ServiceError(
                f"conflicting duplicate verdict from {record.reviewer} for "
                f"({record.attack}, {record.cve}) round {record.round}"
            )
        record.record_id = record.record_id or uuid.uuid4().hex
        record.timestamp = record.timestamp or datetime.now(timezone.utc).isoformat()
        self.records.append(record)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")
        return record.record_id

    def effective_verdicts(self, pair: Pair) -> dict[str, Verdict]:
        """Per reviewer, the verdict of their highest round for this pair."""
        latest: dict[str, ValidationRecord] = {}
        for record in self.records:
            if (record.attack, record.cve) != pair:
                continue
            current = latest.get(record.reviewer)
            if current is None or record.round > current.round:
                latest[record.reviewer] = record
        return {reviewer: rec.verdict for reviewer, rec in latest.items()}

    def consensus(self, pair: Pair) -> Verdict | None:
        """Unanimous final verdict of at least min_reviewers, else None."""
        finals = [v for v in self.effective_verdicts(pair).values() if v.final]
        if len(finals) < self.min_reviewers:
            return None
        if all(v is Verdict.LINKED for v in finals):
            return Verdict.LINKED
        if all(v is Verdict.NOT_LINKED for v in finals):
            return Verdict.NOT_LINKED
        return None

    def pairs(self) -> set[Pair]:
        return {(r.attack, r.cve) for r in self.records}

    def rounds_used(self, pair: Pair) -> int:
        return max((r.round for r in self.records if (r.attack, r.cve) == pair), default=0)

    def reviewers_of(self, pair: Pair) -> list[str]:
        return sorted({r.reviewer for r in self.records if (r.attack, r.cve) == pair})


def enrichment_set(log: VerdictLog, truth: GroundTruthMap) -> list[dict]:
    """Consensus-Linked pairs that were predictions outside the ground truth."""
    out = []
    for attack, cve in sorted(log.pairs()):
        if log.consensus((attack, cve)) is not Verdict.LINKED:
            continue
        if attack in truth.mapping and cve in truth.mapping[attack]:
            continue
        out.append(
            {
                "attack": attack.raw_id,
                "cve": cve.raw_id,
                "reviewers": log.reviewers_of((attack, cve)),
                "rounds": log.rounds_used((attack, cve)),
            }
        )
    return out


@dataclass
class ServiceState:
    """Everything the endpoints read; verdict writes are serialized by a lock."""

    corpus: Corpus
    store: EmbeddingStore
    provider: EmbeddingProvider
    truth: GroundTruthMap
    predictions: dict[EntryId, PredictionSet]
    log: VerdictLog
    rho: float = DEFAULT_RHO
    k: int = DEFAULT_K
    sim: SimilarityKind = SimilarityKind.COSINE
    calibration: dict = field(default_factory=dict)
    reviewer_token: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def pair_known(self, attack: EntryId, cve: EntryId) -> bool:
        preds = self.predictions.get(attack)
        return preds is not None and cve in preds.cut_ids

    def pending_candidates(self, attack: EntryId | None = None) -> list[dict]:
        """Predicted-but-unlinked pairs with no consensus yet, best score first."""
        rows = []
        for atk, preds in self.predictions.items():
            if attack is not None and atk != attack:
                continue
            known = self.truth.mapping.get(atk, frozenset())
            for cve, score in preds.cut:
                if cve in known:
                    continue
                if self.log.consensus((atk, cve)) is not None:
                    continue
                rows.append((atk, cve, score))
        rows.sort(key=lambda r: (-r[2], r[0].raw_id, r[1].raw_id))
        return [
            {
                "attack": atk.raw_id,
                "attack_kind": atk.kind.value,
                "cve": cve.raw_id,
                "score": round(scaled_score(score), 6),
                "display": display_score(score),
                "attack_text": self._text_of(atk),
                "cve_text": self._text_of(cve),
                "rounds_used": self.log.rounds_used((atk, cve)),
            }
            for atk, cve, score in rows
        ]

    def _text_of(self, entry_id: EntryId) -> str:
        try:
            return self.corpus.get(entry_id).raw_text
        except LookupError:
            return ""


def compute_predictions(
    corpus: Corpus,
    store: EmbeddingStore,
    truth: GroundTruthMap,
    rho: float = DEFAULT_RHO,
    k: int = DEFAULT_K,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> dict[EntryId, PredictionSet]:
    """Prediction sets for every truth-domain attack that has a stored vector."""
    out = {}
    for attack in sorted(truth.mapping):
        if attack not in store.vectors:
            continue
        ranking = rank_cves(store.get(attack), store, sim)
        out[attack] = predict_set(ranking, rho, k, attack=attack)
    return out


def create_app(state: ServiceState) -> FastAPI:
    """Wire the service endpoints around one shared state object."""
    app = FastAPI(title="attack2cve service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.engine = state

    def _resolve_query_vec(body: dict):
        if body.get("entry_id"):
            raw = str(body["entry_id"])
            kind = detect_kind(raw)
            if kind is None:
                raise HTTPException(422, f"cannot infer kind of entry ID {raw!r}")
            entry_id = EntryId(kind, raw)
            try:
                return entry_id, state.store.get(entry_id)
            except LookupError:
                raise HTTPException(404, f"no vector stored for {raw}")
        text = str(body.get("text") or "")
        cleaned = clean_only(text)
        if not cleaned:
            raise HTTPException(422, "empty query text")
        return None, embed_text(state.provider, cleaned, normalize=state.store.normalized)

    @app.post("/predict")
    def predict(body: dict):
        rho = float(body["rho"]) if body.get("rho") is not None else state.rho
        k = int(body["k"]) if body.get("k") is not None else state.k
        entry_id, vec = _resolve_query_vec(body)
        ranking = rank_cves(vec, state.store, state.sim)
        preds = predict_set(ranking, rho, k, attack=entry_id)
        truth_cves = state.truth.mapping.get(entry_id, frozenset()) if entry_id else frozenset()
        items = []
        for cve, score in preds.topk:
            consensus = state.log.consensus((entry_id, cve)) if entry_id else None
            items.append(
                {
                    "cve": cve.raw_id,
                    "title": _title(cve),
                    "score": round(scaled_score(score), 6),
                    "display": display_score(score),
                    "kept": cve in preds.cut_ids,
                    "in_truth": cve in truth_cves,
                    "consensus": consensus.value if consensus else None,
                }
            )
        return {
            "query": entry_id.raw_id if entry_id else None,
            "rho": rho,
            "k": k,
            "items": items,
        }

    def _title(entry_id: EntryId) -> str:
        try:
            entry = state.corpus.get(entry_id)
        except LookupError:
            return ""
        return entry.title or entry.raw_text[:120]

    @app.get("/calibration")
    def calibration():
        return {"rho": state.rho, "k": state.k, **state.calibration}

    @app.get("/queue")
    def queue(attack: str | None = None):
        attack_id = None
        if attack:
            kind = detect_kind(attack)
            if kind is None:
                raise HTTPException(422, f"cannot infer kind of attack ID {attack!r}")
            attack_id = EntryId(kind, attack)
        return {"pairs": state.pending_candidates(attack_id)}

    @app.post("/verdict")
    def verdict(body: dict, request: Request):
        if state.reviewer_token is not None:
            if request.headers.get("x-reviewer-token") != state.reviewer_token:
                raise HTTPException(401, "missing or wrong reviewer token")
        try:
            attack = EntryId.from_raw(str(body["attack"]),
                                      EntryKind(body["attack_kind"]) if body.get("attack_kind") else None)
            record = ValidationRecord(
                attack=attack,
                cve=EntryId.from_raw(str(body["cve"])),
                verdict=Verdict(body["verdict"]),
                round=int(body.get("round", 1)),
                reviewer=str(body.get("reviewer", "")),
                timestamp=str(body.get("timestamp", "")),
                note=str(body.get("note", "")),
            )
        except (KeyError, ValueError) as exc:
            raise HTTPException(422, f"malformed verdict: {exc}")
        if not state.pair_known(record.attack, record.cve):
            raise HTTPException(404, f"pair ({record.attack}, {record.cve}) is not a stored prediction")
        with state.lock:
            try:
                record_id = state.log.submit(record)
            except ServiceError as exc:
                raise HTTPException(409, str(exc))
            consensus = state.log.consensus((record.attack, record.cve))
        return {
            "record_id": record_id,
            "consensus": consensus.value if consensus else None,
        }

    @app.get("/enrichment", response_class=PlainTextResponse)
    def enrichment():
        lines = [json.dumps(row, sort_keys=True) for row in enrichment_set(state.log, state.truth)]
        return "\n".join(lines) + ("\n" if lines else "")

    return app


def create_embed_app(provider: EmbeddingProvider) -> FastAPI:
    """Minimal embedding endpoint speaking the texts-in/vectors-out wire contract."""
    app = FastAPI(title="embedding provider")

    @app.post("/embed")
    def embed(body: dict):
        texts = list(body.get("texts", []))
        vectors = provider.embed_batch(texts)
        return {"dim": provider.dim, "vectors": [[float(x) for x in row] for row in vectors]}

    return app
