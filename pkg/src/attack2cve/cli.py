"""Batch front door: scripted, reproducible pipeline runs.

Stages write their artifacts under --out; every artifact embeds (or is
paired with) the digest of the config that produced it, and identical
configs over identical inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

from . import corpus as corpus_mod
from .corpus import Corpus, EntryId, EntryKind
from .embedding import (
    embed_corpus,
    load_store,
    provider_from_spec,
    save_store,
)
from .linkgraph import GroundTruthMap, annotate_all, build_link_graph
from .metrics import (
    UncoveredPolicy,
    classify_attacks,
    overlap,
    pr_sweep,
    prf,
    roc_sweep,
)
from .news import evaluate_news
from .service import (
    ServiceState,
    VerdictLog,
    compute_predictions,
    create_app,
)
from .similarity import SimilarityKind, predict_set, rank_cves

logger = logging.getLogger(__name__)

ENV_PREFIX = "A2C_"


class DependencyError(Exception):
    """An upstream artifact is missing; names the stage that produces it."""

    def __init__(self, message: str, missing_stage: str):
        super().__init__(message)
        self.missing_stage = missing_stage


@dataclass
class RunConfig:
    """Everything that determines a run's outputs, minus the output location."""

    command: str
    corpus: list[str] = field(default_factory=list)
    news: str = ""
    provider: str = ""
    sim: str = "cosine"
    rho: float = 58.0
    k: int = 20
    grid: str = "1:100"
    seed: int = 0
    directed: bool = False
    use_title: bool = False
    raw_vectors: bool = False

    def digest(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _env(name: str, fallback):
    return os.environ.get(ENV_PREFIX + name, fallback)


def _parse_grid(spec: str) -> list[int]:
    lo, _, hi = spec.partition(":")
    return list(range(int(lo), int(hi) + 1))


def _require(path: str, stage: str) -> str:
    if not os.path.exists(path):
        raise DependencyError(f"missing artifact {path}; run the `{stage}` stage first", stage)
    return path


def _load_corpus_files(paths: list[str]) -> Corpus:
    merged = Corpus()
    for path in paths:
        part = corpus_mod.load_corpus(_require(path, "ingest"))
        for entry_id, entry in part.entries.items():
            if entry_id in merged.entries:
                raise corpus_mod.DuplicateEntryError(
                    f"duplicate entry ID {entry_id} across corpus files"
                )
            merged.entries[entry_id] = entry
        merged.issues.extend(part.issues)
    return merged


def _load_truth(path: str) -> GroundTruthMap:
    with open(_require(path, "annotate"), encoding="utf-8") as fh:
        return GroundTruthMap.from_lines(fh)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_curve_csv(path: str, points, digest: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_digest={digest}\n")
        fh.write("rho,tpr,fpr,precision,recall\n")
        for p in points:
            fh.write(
                f"{p.rho},{p.tpr:.6f},{p.fpr:.6f},{p.precision:.6f},{p.recall:.6f}\n"
            )


def cmd_ingest(args) -> int:
    config = _config_from(args)
    corpus = _load_corpus_files(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    corpus_mod.save_corpus(corpus, os.path.join(args.out, "corpus.jsonl"))
    _write_json(
        os.path.join(args.out, "ingest_report.json"),
        {
            "config_digest": config.digest(),
            "counts": {k.value: v for k, v in corpus.counts().items()},
            "entries": len(corpus),
            "issues": [{"line": i.line_no, "message": i.message} for i in corpus.issues],
        },
    )
    print(f"ingested {len(corpus)} entries -> {args.out}/corpus.jsonl")
    return 0


def cmd_annotate(args) -> int:
    config = _config_from(args)
    corpus = _load_corpus_files(args.corpus)
    graph = build_link_graph(corpus)
    truth, stats = annotate_all(graph, corpus, directed=args.directed)
    os.makedirs(args.out, exist_ok=True)
    truth_path = os.path.join(args.out, "ground_truth.jsonl")
    with open(truth_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config_digest": config.digest()}) + "\n")
        for line in truth.to_lines(with_provenance=not args.no_provenance):
            fh.write(line + "\n")
    _write_json(
        os.path.join(args.out, "link_stats.json"),
        {"config_digest": config.digest(), **stats.to_dict(),
         "dangling": sorted(d.raw_id for d in graph.dangling)},
    )
    linked = sum(1 for cves in truth.mapping.values() if cves)
    print(f"annotated {len(truth.mapping)} attacks ({linked} linked) -> {truth_path}")
    return 0


def cmd_embed(args) -> int:
    config = _config_from(args)
    corpus = _load_corpus_files(args.corpus)
    provider = provider_from_spec(args.provider)
    store = embed_corpus(
        provider,
        corpus,
        normalize=not args.raw_vectors,
        use_title=args.use_title,
    )
    store.config_digest = config.digest()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "vectors.bin")
    save_store(store, path)
    print(f"embedded {len(store)} entries at dim {store.dim} -> {path}")
    return 0


def cmd_predict(args) -> int:
    config = _config_from(args)
    store = load_store(_require(args.store, "embed"))
    truth = _load_truth(args.truth)
    sim = SimilarityKind(args.sim)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "predictions.jsonl")
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "config_digest": config.digest(),
                    "provider": store.provider_name,
                    "sim": sim.value,
                    "rho": args.rho,
                    "k": args.k,
                },
                sort_keys=True,
            )
            + "\n"
        )
        for attack in sorted(truth.mapping):
            if attack not in store.vectors:
                continue
            ranking = rank_cves(store.get(attack), store, sim)
            preds = predict_set(ranking, args.rho, args.k, attack=attack)
            fh.write(json.dumps(preds.to_record(), sort_keys=True) + "\n")
            written += 1
    print(f"predicted for {written} attacks -> {path}")
    return 0


def _load_predictions(path: str) -> tuple[dict, dict[EntryId, frozenset[EntryId]], dict]:
    """Returns (meta, attack -> kept CVE set, attack -> kind tag)."""
    meta: dict = {}
    cuts: dict[EntryId, frozenset[EntryId]] = {}
    kinds: dict[EntryId, str] = {}
    with open(_require(path, "predict"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "attack" not in obj:
                meta = obj
                continue
            attack = EntryId(EntryKind(obj["kind"]), obj["attack"])
            cuts[attack] = frozenset(
                EntryId.from_raw(item["cve"]) for item in obj["items"] if item["kept"]
            )
            kinds[attack] = obj["kind"]
    return meta, cuts, kinds


def _prediction_sets_from_artifact(path: str) -> dict[EntryId, "PredictionSet"]:
    """Rebuild prediction sets from a predictions artifact (display-scale scores)."""
    from .similarity import PredictionSet

    out: dict[EntryId, PredictionSet] = {}
    meta: dict = {}
    with open(_require(path, "predict"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "attack" not in obj:
                meta = obj
                continue
            attack = EntryId(EntryKind(obj["kind"]), obj["attack"])
            ranked = [(EntryId.from_raw(i["cve"]), i["score"] / 100.0) for i in obj["items"]]
            cut = [(EntryId.from_raw(i["cve"]), i["score"] / 100.0)
                   for i in obj["items"] if i["kept"]]
            out[attack] = PredictionSet(
                attack=attack, ranked=ranked, rho=meta.get("rho"), k=meta.get("k"), cut=cut
            )
    return out


def cmd_calibrate(args) -> int:
    config = _config_from(args)
    store = load_store(_require(args.store, "embed"))
    truth = _load_truth(args.truth)
    sim = SimilarityKind(args.sim)
    grid = _parse_grid(args.grid)
    rankings = {}
    for attack in sorted(truth.mapping):
        if attack in store.vectors:
            rankings[attack] = rank_cves(store.get(attack), store, sim)
    if not rankings:
        raise DependencyError("no attacks with stored vectors to calibrate on", "embed")
    truth_sets = {a: truth.mapping[a] for a in rankings}
    roc = roc_sweep(rankings, truth_sets, grid=grid, k=args.k)
    pr = pr_sweep(rankings, truth_sets, grid=grid, k=args.k)
    os.makedirs(args.out, exist_ok=True)
    digest = config.digest()
    _write_curve_csv(os.path.join(args.out, "roc_curve.csv"), roc.points, digest)
    _write_curve_csv(os.path.join(args.out, "pr_curve.csv"), pr.points, digest)
    _write_json(
        os.path.join(args.out, "calibration.json"),
        {
            "config_digest": digest,
            "auc": round(roc.auc, 6),
            "rho_star": roc.rho_star,
            "eer_rho": pr.eer_rho,
            "grid": args.grid,
            "k": args.k,
            "attacks": len(rankings),
        },
    )
    print(f"calibrated on {len(rankings)} attacks: AUC={roc.auc:.3f} "
          f"rho*={roc.rho_star} eer_rho={pr.eer_rho} -> {args.out}/calibration.json")
    return 0


def cmd_evaluate(args) -> int:
    config = _config_from(args)
    meta, cuts, _ = _load_predictions(args.predictions)
    truth = _load_truth(args.truth)
    digest = config.digest()
    model = meta.get("provider", "unknown")
    policy = UncoveredPolicy(args.uncovered)

    by_kind: dict[str, dict] = {}
    for attack in sorted(cuts):
        by_kind.setdefault(attack.kind.value, {})[attack] = cuts[attack]
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "classification_report.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_digest={digest}\n")
        fh.write("model,attack_kind,precision,recall,f1,tp,fp,fn,tn,unclassified,degenerate\n")
        groups = sorted(by_kind.items()) + [("all", cuts)]
        for kind_label, group in groups:
            counts = classify_attacks(group, truth.mapping, policy=policy)
            scores = prf(counts)
            fh.write(
                f"{model},{kind_label},{scores.precision:.6f},{scores.recall:.6f},"
                f"{scores.f1:.6f},{counts.tp},{counts.fp},{counts.fn},{counts.tn},"
                f"{counts.unclassified},{str(scores.degenerate).lower()}\n"
            )

    overlap_path = os.path.join(args.out, "overlap_report.csv")
    with open(overlap_path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_digest={digest}\n")
        fh.write("model,attack,attack_kind,jaccard,mapping_acc,detection_acc,"
                 "size_predicted,size_truth,size_intersection,degenerate\n")
        for attack in sorted(cuts):
            m = overlap(cuts[attack], truth.mapping[attack])
            fh.write(
                f"{model},{attack.raw_id},{attack.kind.value},{m.jaccard:.6f},"
                f"{m.mapping_acc:.6f},{m.detection_acc:.6f},{m.size_predicted},"
                f"{m.size_truth},{m.size_intersection},{str(m.degenerate).lower()}\n"
            )
    print(f"evaluated {len(cuts)} attacks -> {report_path}")
    return 0


def cmd_news(args) -> int:
    config = _config_from(args)
    corpus = _load_corpus_files(args.corpus)
    news_corpus = corpus_mod.load_corpus(_require(args.news, "ingest"))
    reports = news_corpus.news_reports()
    store = load_store(_require(args.store, "embed"))
    provider = provider_from_spec(args.provider)
    summary = evaluate_news(
        reports, corpus, provider, store,
        rho=args.rho, k=args.k, sim=SimilarityKind(args.sim),
    )
    os.makedirs(args.out, exist_ok=True)
    digest = config.digest()
    validations = summary.pop("validations")
    path = os.path.join(args.out, "news_validations.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config_digest": digest}) + "\n")
        for validation in validations:
            fh.write(json.dumps(validation.to_record(), sort_keys=True) + "\n")
    _write_json(os.path.join(args.out, "news_summary.json"),
                {"config_digest": digest, **summary})
    print(f"validated {summary['reports']} reports -> {args.out}/news_summary.json")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    corpus = _load_corpus_files(args.corpus)
    store = load_store(_require(args.store, "embed"))
    truth = _load_truth(args.truth)
    provider = provider_from_spec(args.provider)
    sim = SimilarityKind(args.sim)
    calibration = {}
    if args.calibration and os.path.exists(args.calibration):
        with open(args.calibration, encoding="utf-8") as fh:
            calibration = json.load(fh)
    if args.predictions:
        predictions = _prediction_sets_from_artifact(args.predictions)
    else:
        predictions = compute_predictions(corpus, store, truth,
                                          rho=args.rho, k=args.k, sim=sim)
    if args.news:
        from .news import predict_from_news

        news_corpus = corpus_mod.load_corpus(_require(args.news, "ingest"))
        corpus.entries.update(news_corpus.entries)
        for report in news_corpus.news_reports():
            predictions[report.id] = predict_from_news(
                report, provider, store, k=args.k, sim=sim
            )
    state = ServiceState(
        corpus=corpus,
        store=store,
        provider=provider,
        truth=truth,
        predictions=predictions,
        log=VerdictLog.load(args.log),
        rho=args.rho,
        k=args.k,
        sim=sim,
        calibration=calibration,
        reviewer_token=args.token,
    )
    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _config_from(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        corpus=list(getattr(args, "corpus", []) or []),
        news=getattr(args, "news", "") or "",
        provider=getattr(args, "provider", "") or "",
        sim=getattr(args, "sim", "cosine"),
        rho=float(getattr(args, "rho", 58.0)),
        k=int(getattr(args, "k", 20)),
        grid=getattr(args, "grid", "1:100"),
        seed=int(getattr(args, "seed", 0)),
        directed=bool(getattr(args, "directed", False)),
        use_title=bool(getattr(args, "use_title", False)),
        raw_vectors=bool(getattr(args, "raw_vectors", False)),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attack2cve",
        description="Link attack descriptions to CVE records via embedding similarity.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, corpus=False, store=False, truth=False, provider=False, news=False,
               predictions=False):
        p.add_argument("--out", default=_env("OUT", "out"), help="output directory")
        p.add_argument("--rho", type=float, default=float(_env("RHO", 58.0)),
                       help="similarity threshold on the 0-100 scale")
        p.add_argument("--k", type=int, default=int(_env("K", 20)), help="top-K bound")
        p.add_argument("--sim", choices=[s.value for s in SimilarityKind],
                       default=_env("SIM", "cosine"))
        p.add_argument("--grid", default=_env("GRID", "1:100"),
                       help="threshold sweep range lo:hi")
        p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
        if corpus:
            p.add_argument("--corpus", nargs="+", required=True, help="canonical corpus file(s)")
        if store:
            p.add_argument("--store", default=_env("STORE", "out/vectors.bin"),
                           help="vector store file")
        if truth:
            p.add_argument("--truth", default=_env("TRUTH", "out/ground_truth.jsonl"),
                           help="ground-truth file")
        if provider:
            p.add_argument("--provider", default=_env("PROVIDER", "hash:384"),
                           help="provider spec: hash:<dim> | remote:<name>:<dim>:<url> | st:<model>")
        if news:
            p.add_argument("--news", required=True, help="news corpus file")
        if predictions:
            p.add_argument("--predictions", default=_env("PREDICTIONS", "out/predictions.jsonl"))

    p = sub.add_parser("ingest", help="validate and normalize a corpus")
    common(p, corpus=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("annotate", help="build the link graph and derive ground truth")
    common(p, corpus=True)
    p.add_argument("--directed", action="store_true",
                   help="traverse page-listed edge directions strictly")
    p.add_argument("--no-provenance", action="store_true", help="omit provenance chains")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("embed", help="embed corpus texts into a vector store")
    common(p, corpus=True, provider=True)
    p.add_argument("--raw-vectors", action="store_true", help="skip L2 normalization")
    p.add_argument("--use-title", action="store_true",
                   help="concatenate titles with descriptions before embedding")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("predict", help="rank CVEs for every ground-truth attack")
    common(p, store=True, truth=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("calibrate", help="ROC/PR threshold sweeps and operating point")
    common(p, store=True, truth=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="classification and overlap tables")
    common(p, truth=True, predictions=True)
    p.add_argument("--uncovered", choices=[u.value for u in UncoveredPolicy],
                   default="fp", help="how to count disjoint-nonempty attacks")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("news", help="M2-M4 news validation and match summary")
    common(p, corpus=True, store=True, provider=True, news=True)
    p.set_defaults(func=cmd_news)

    p = sub.add_parser("serve", help="start the prediction/validation service")
    common(p, corpus=True, store=True, truth=True, provider=True, predictions=False)
    p.add_argument("--predictions", default=None,
                   help="optional predictions artifact to serve from")
    p.add_argument("--news", default=None,
                   help="optional news corpus whose top-K predictions join the review queue")
    p.add_argument("--calibration", default=_env("CALIBRATION", "out/calibration.json"))
    p.add_argument("--log", default=_env("LOG", "verdicts.jsonl"), help="verdict log path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--token", default=None, help="static reviewer token")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DependencyError as exc:
        _emit_error(args.command, str(exc), missing_stage=exc.missing_stage)
        return 3
    except Exception as exc:  # noqa: BLE001 - single front door for scripted runs
        _emit_error(args.command, str(exc))
        return 1


def _emit_error(command: str, message: str, missing_stage: str | None = None) -> None:
    payload = {"error": {"command": command, "message": message}}
    if missing_stage:
        payload["error"]["missing_stage"] = missing_stage
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
