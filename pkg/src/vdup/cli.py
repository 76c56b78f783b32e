"""Command-line entry point.

Subcommands map one-to-one onto the pipeline stages::

    synth           generate a labeled synthetic corpus
    ingest          add a video (or import features / OCR text) to a corpus
    train-codebook  k-means visual vocabulary
    build-idf       visual-word document frequencies from a reference corpus
    index-text      textual index over the corpus documents
    gen-tasks       duplicate-detection tasks from a labeled dataset
    query           rank the corpus against one query report
    evaluate        run a configuration grid over a tasks file

Exit codes: 0 success, 2 input error, 3 state error (corpus or index not
built). A JSON config file can supply defaults; flags win. The corpus root
defaults to $VDUP_ROOT.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import evaluation, ingest, sequence, synth
from .bovw import IdfTable, VisualCodebook, build_idf, train_codebook
from .corpus import CorpusStore
from .errors import StateError, ValidationError, VdupError
from .features import FrameFeatureExtractor, extractor_from_id
from .ranker import VISUAL_CONFIGS, DuplicateRanker, FusionConfig
from .text import DOC_STRATEGIES, TextDocument, TextSimilarityIndex

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STATE = 3


def _load_config_file(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path}: invalid JSON ({exc})") from exc


def _opt(args, config: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _corpus_root(args, config: dict) -> Path:
    root = _opt(args, config, "root", None) or os.environ.get("VDUP_ROOT")
    if not root:
        raise ValidationError("no corpus root: pass --root or set VDUP_ROOT")
    return Path(root)


def _require_store(root: Path) -> CorpusStore:
    store = CorpusStore(root)
    if not store.manifest_path.exists():
        raise StateError(f"no corpus at {root} (manifest.json missing)")
    return store


def _load_state(cls, path, what: str):
    if not path:
        raise StateError(f"{what} required: pass its file path")
    if not Path(path).exists():
        raise StateError(f"{what} not built: {path} does not exist")
    return cls.load(path)


def _reference_features_and_docs(extractor: FrameFeatureExtractor, count: int, seed: int,
                                 codebook: VisualCodebook | None = None):
    """Features (and, with a codebook, word documents) from the bundled
    deterministic reference screens."""
    images = synth.reference_images(count=count, seed=seed)
    per_image = [extractor.extract(img) for img in images]
    if codebook is None:
        return [v for vecs in per_image for v in vecs], None
    docs = [codebook.predict(vecs) for vecs in per_image]
    return None, docs


def _corpus_extractor(store: CorpusStore) -> FrameFeatureExtractor:
    extractor_id = store.read_manifest().extractor_id
    extractor = extractor_from_id(extractor_id) if extractor_id else None
    if extractor is None:
        raise StateError(
            f"corpus extractor {extractor_id!r} is not a built-in; "
            "pass prebuilt --codebook/--idf files instead"
        )
    return extractor


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    extractor = FrameFeatureExtractor(mode=args.mode)
    bug_map = synth.synth_corpus(
        root,
        bugs=args.bugs,
        videos_per_bug=args.videos_per_bug,
        frames_per_video=args.frames,
        shared_frame_ratio=args.shared_frame_ratio,
        vocab_overlap=args.vocab_overlap,
        seed=_opt(args, config, "seed", 0),
        fps=_opt(args, config, "fps", 5),
        extractor=extractor,
    )
    n_videos = sum(len(v) for v in bug_map.values())
    print(f"synth corpus at {root}: {len(bug_map)} bugs, {n_videos} videos")
    return EXIT_OK


def cmd_ingest(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = CorpusStore(root)

    if args.video:
        if not Path(args.video).exists():
            raise ValidationError(f"video file not found: {args.video}")
        report_id = args.id or Path(args.video).stem
        app_id = args.app or "default"
        cfg = ingest.IngestionConfig(
            fps=int(_opt(args, config, "fps", 5)),
            decoder_command=_opt(args, config, "decoder_cmd", ingest.DEFAULT_DECODER_COMMAND),
            max_frames=args.max_frames,
        )
        with tempfile.TemporaryDirectory() as staging:
            report, frames_dir = ingest.sample_frames(args.video, cfg, report_id, app_id, staging)
            extractor_id = ""
            if args.extract != "none":
                extractor = FrameFeatureExtractor(mode=args.extract)
                for fr in report.frames:
                    fr.vectors = extractor.extract(frames_dir / Path(fr.image).name)
                extractor_id = extractor.extractor_id
            store.write_report(report, frames_dir=frames_dir, extractor_id=extractor_id)
        report = store.read_report(report_id)
    elif args.features:
        if not Path(args.features).exists():
            raise ValidationError(f"features file not found: {args.features}")
        if not args.report:
            raise ValidationError("--features needs --report ID")
        report = ingest.import_features(store, args.report, args.features)
    elif args.ocr:
        if not Path(args.ocr).exists():
            raise ValidationError(f"OCR file not found: {args.ocr}")
        if not args.report:
            raise ValidationError("--ocr needs --report ID")
        report = ingest.import_ocr_text(store, args.report, args.ocr)
    elif args.ocr_cmd:
        if not args.report:
            raise ValidationError("--ocr-cmd needs --report ID")
        report = ingest.run_ocr(store, args.report, args.ocr_cmd)
    else:
        raise ValidationError("nothing to ingest: pass --video, --features, --ocr or --ocr-cmd")

    mode = report.feature_mode or "-"
    dim = report.vector_dim or "-"
    print(f"{report.report_id}: frames={len(report.frames)} mode={mode} dim={dim}")
    return EXIT_OK


def cmd_train_codebook(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = _require_store(root)
    seed = int(_opt(args, config, "seed", 0))
    k = int(_opt(args, config, "k", 1000))

    if args.from_corpus:
        extractor_id = store.read_manifest().extractor_id
        features = [v for r in store.read_all().values() for v in r.all_vectors()]
    else:
        extractor = _corpus_extractor(store)
        extractor_id = extractor.extractor_id
        count = max(args.reference_count, k)
        features, _ = _reference_features_and_docs(extractor, count, seed)
    if args.sample_size is not None and args.sample_size < len(features):
        rng = np.random.default_rng(seed)
        picks = sorted(rng.choice(len(features), size=args.sample_size, replace=False))
        features = [features[i] for i in picks]

    cb = train_codebook(features, k=k, seed=seed, max_iters=args.max_iters, tol=args.tol,
                        extractor_id=extractor_id)
    cb.save(args.out)
    print(f"codebook k={k} dim={cb.dim} inertia={cb.inertia_:.6f} -> {args.out}")
    return EXIT_OK


def cmd_build_idf(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = _require_store(root)
    cb = _load_state(VisualCodebook, args.codebook, "codebook")
    seed = int(_opt(args, config, "seed", 0))

    if args.from_corpus:
        docs = []
        for report in store.read_all().values():
            vectors = report.all_vectors()
            if vectors:
                docs.append(cb.predict(vectors))
    else:
        extractor = _corpus_extractor(store)
        _, docs = _reference_features_and_docs(extractor, args.reference_count, seed, codebook=cb)
    idf = build_idf(docs)
    idf.save(args.out)
    print(f"idf over {idf.doc_count} reference documents -> {args.out}")
    return EXIT_OK


def cmd_index_text(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = _require_store(root)
    strategy = _opt(args, config, "strategy", "all_text")
    reports = store.read_all()
    docs = [TextDocument.from_report(r, strategy) for r in reports.values()]
    index = TextSimilarityIndex(strategy=strategy).fit(docs)
    index.save(args.out)
    print(f"text index: {index.n_docs_} documents, {len(index.df_)} terms -> {args.out}")
    return EXIT_OK


def cmd_gen_tasks(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    _require_store(root)
    dataset = synth.load_dataset(args.dataset or root)
    seed = int(_opt(args, config, "seed", 0))
    tasks = evaluation.generate_tasks(dataset["bugs"], dataset["app_id"], seed=seed)
    evaluation.save_tasks(tasks, args.out)
    print(f"{len(tasks)} tasks -> {args.out}")
    return EXIT_OK


def _fusion_config(args, config: dict) -> FusionConfig:
    return FusionConfig(
        w=float(_opt(args, config, "w", 0.2)),
        visual_config=str(_opt(args, config, "visual_config", "bovw")).lower(),
        selective=bool(_opt(args, config, "selective", True)),
        va_threshold=float(_opt(args, config, "va_threshold", 0.128)),
        tau=float(_opt(args, config, "tau", 0.7)),
        wlcs_scheme=_opt(args, config, "wlcs_denominator", sequence.DENOMINATOR_PRINTED),
        strategy=_opt(args, config, "strategy", "all_text"),
    )


def cmd_query(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = _require_store(root)
    cb = _load_state(VisualCodebook, args.codebook, "codebook")
    idf = _load_state(IdfTable, args.idf, "IDF table")
    fcfg = _fusion_config(args, config)
    text_index = _load_state(TextSimilarityIndex, args.text_index, "text index")
    text_index.strategy = fcfg.strategy

    reports = store.read_all()
    if args.id not in reports:
        raise StateError(f"query report {args.id!r} is not in the corpus")
    corpus_ids = sorted(rid for rid in reports if rid != args.id)
    if not corpus_ids:
        raise StateError("corpus has no candidate reports besides the query")

    ranker = DuplicateRanker(reports, cb, idf, text_index, fcfg)
    dup_vals = nondup_vals = None
    history = args.history or ((Path(root) / "dataset.json") if (Path(root) / "dataset.json").exists() else None)
    if fcfg.selective and history:
        dataset = synth.load_dataset(Path(history).parent if Path(history).name == "dataset.json" else history)
        dup_vals, nondup_vals = evaluation.app_agreement_history(reports, dataset["bugs"], fcfg.strategy)
    result = ranker.rank(args.id, corpus_ids, dup_agreements=dup_vals, nondup_agreements=nondup_vals)

    for pos, entry in enumerate(result.entries[: args.top], start=1):
        print(f"{pos:2d}. {entry.report_id}  s_final={entry.s_final:.6f} "
              f"(s_vis={entry.s_vis:.6f}, s_txt={entry.s_txt:.6f}, mode={result.mode_used})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=1)
            fh.write("\n")
    if args.dump_lcs:
        dump_dir = Path(args.dump_lcs)
        dump_dir.mkdir(parents=True, exist_ok=True)
        fsim = ranker._frame_sim_config(reports[args.id])
        for rid in corpus_ids:
            trace = sequence.lcs_debug_dump(reports[args.id], reports[rid], fsim)
            with open(dump_dir / f"{args.id}__{rid}.json", "w", encoding="utf-8") as fh:
                json.dump(trace, fh)
    return EXIT_OK


def _parse_grid(specs: list[str]) -> dict[str, list[str]]:
    axes: dict[str, list[str]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ValidationError(f"grid axis must look like key=v1,v2 got {spec!r}")
        key, _, values = spec.partition("=")
        key = key.strip().replace("-", "_")
        if key not in ("fps", "k", "w", "tau", "visual_config", "strategy"):
            raise ValidationError(f"unknown grid axis {key!r}")
        axes[key] = [v.strip() for v in values.split(",") if v.strip()]
        if not axes[key]:
            raise ValidationError(f"grid axis {key!r} has no values")
    return axes


def cmd_evaluate(args) -> int:
    config = _load_config_file(args.config)
    root = _corpus_root(args, config)
    store = _require_store(root)
    if not Path(args.tasks).exists():
        raise ValidationError(f"tasks file not found: {args.tasks}")
    tasks = evaluation.load_tasks(args.tasks)
    if not tasks:
        raise ValidationError(f"tasks file {args.tasks} is empty")
    seed = int(_opt(args, config, "seed", 0))
    jobs = int(_opt(args, config, "jobs", 1))
    base = _fusion_config(args, config)

    axes = _parse_grid(args.grid or [])
    if args.codebook and "k" in axes:
        raise ValidationError("--codebook fixes k; drop the k grid axis or the file")
    fps_values = [int(v) for v in axes.get("fps", [0])]  # 0 = stored fps
    k_values = [int(v) for v in axes.get("k", [int(_opt(args, config, "k", 50))])]
    w_values = [float(v) for v in axes.get("w", [base.w])]
    tau_values = [float(v) for v in axes.get("tau", [base.tau])]
    vc_values = [v.lower() for v in axes.get("visual_config", [base.visual_config])]
    strat_values = axes.get("strategy", [base.strategy])

    reports_full = store.read_all()
    dataset = None
    dataset_path = Path(args.dataset) if args.dataset else Path(root) / "dataset.json"
    if dataset_path.exists():
        dataset = synth.load_dataset(dataset_path.parent if dataset_path.name == "dataset.json" else dataset_path)

    codebooks: dict[tuple[int, int], VisualCodebook] = {}
    idfs: dict[tuple[int, int], IdfTable] = {}

    def components(k: int) -> tuple[VisualCodebook, IdfTable]:
        key = (k, seed)
        if key not in codebooks:
            if args.codebook and len(k_values) == 1:
                codebooks[key] = _load_state(VisualCodebook, args.codebook, "codebook")
                idfs[key] = _load_state(IdfTable, args.idf, "IDF table")
            else:
                extractor = _corpus_extractor(store)
                count = max(args.reference_count, k)
                features, _ = _reference_features_and_docs(extractor, count, seed)
                cb = train_codebook(features, k=k, seed=seed, extractor_id=extractor.extractor_id)
                _, docs = _reference_features_and_docs(extractor, count, seed, codebook=cb)
                codebooks[key] = cb
                idfs[key] = build_idf(docs)
        return codebooks[key], idfs[key]

    rows = []
    results_json = {}
    apps = sorted({t.app_id for t in tasks})
    for fps, k, w, tau, vc, strat in itertools.product(
        fps_values, k_values, w_values, tau_values, vc_values, strat_values
    ):
        cb, idf = components(k)
        reports = reports_full
        if fps:
            reports = {rid: ingest.subsample_report(r, fps) for rid, r in reports_full.items()}
        docs = [TextDocument.from_report(r, strat) for r in reports.values()]
        text_index = TextSimilarityIndex(strategy=strat).fit(docs)
        fcfg = FusionConfig(w=w, visual_config=vc, selective=base.selective,
                            va_threshold=base.va_threshold, tau=tau,
                            wlcs_scheme=base.wlcs_scheme, strategy=strat)
        ranker = DuplicateRanker(reports, cb, idf, text_index, fcfg)
        dup_vals = nondup_vals = None
        if dataset is not None:
            dup_vals, nondup_vals = evaluation.app_agreement_history(reports, dataset["bugs"], strat)
        label = f"{vc}|fps={fps or 'stored'}|k={k}|{strat}|w={w}|tau={tau}"
        for app in apps:
            app_tasks = [t for t in tasks if t.app_id == app]
            outcomes = evaluation.run_tasks(ranker, app_tasks, dup_vals, nondup_vals, jobs=jobs)
            report = evaluation.aggregate([m for _, _, m in outcomes])
            rows.append((app, label, report))
            results_json[f"{app}|{label}"] = report.to_dict()
            print(f"{app} {label}: mRR={report.mrr:.4f} mAP={report.map:.4f} "
                  f"meanRank={report.mean_rank:.3f} HIT@1={report.hit_rate[1]:.4f} "
                  f"HIT@2={report.hit_rate[2]:.4f}")

    if args.out_csv:
        evaluation.write_metrics_csv(args.out_csv, rows)
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            json.dump(results_json, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--root", help="corpus root (default $VDUP_ROOT)")
    p.add_argument("--config", help="JSON config file with default values")
    p.add_argument("--seed", type=int, help="seed for anything randomized")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vdup",
                                     description="Duplicate detection for video-based bug reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    _add_common(p)
    p.add_argument("--bugs", type=int, default=4)
    p.add_argument("--videos-per-bug", type=int, default=3)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--shared-frame-ratio", type=float, default=0.8)
    p.add_argument("--vocab-overlap", type=float, default=0.0)
    p.add_argument("--fps", type=int)
    p.add_argument("--mode", choices=["single", "multi"], default="single")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="add a video or import features / OCR text")
    _add_common(p)
    p.add_argument("--video", help="video file to decode and sample")
    p.add_argument("--id", help="report id (default: video stem)")
    p.add_argument("--app", help="app id for new reports")
    p.add_argument("--fps", type=int)
    p.add_argument("--decoder-cmd", help="decoder template with {input} {outdir} {fps}")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--extract", choices=["single", "multi", "none"], default="single")
    p.add_argument("--features", help="feature JSONL to import")
    p.add_argument("--ocr", help="OCR JSONL to import")
    p.add_argument("--ocr-cmd", help="OCR command template with {image}")
    p.add_argument("--report", help="target report id for imports")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-codebook", help="train the k-means visual vocabulary")
    _add_common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--from-corpus", action="store_true",
                   help="train on corpus frames instead of reference screens")
    p.add_argument("--reference-count", type=int, default=synth.DEFAULT_REFERENCE_COUNT)
    p.add_argument("--sample-size", type=int, help="seeded subsample of the training features")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("build-idf", help="visual-word document frequencies")
    _add_common(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--from-corpus", action="store_true")
    p.add_argument("--reference-count", type=int, default=synth.DEFAULT_REFERENCE_COUNT)
    p.set_defaults(func=cmd_build_idf)

    p = sub.add_parser("index-text", help="build the textual index")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=DOC_STRATEGIES)
    p.set_defaults(func=cmd_index_text)

    p = sub.add_parser("gen-tasks", help="generate duplicate-detection tasks")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", help="dataset.json path (default <root>/dataset.json)")
    p.set_defaults(func=cmd_gen_tasks)

    p = sub.add_parser("query", help="rank the corpus against a query report")
    _add_common(p)
    p.add_argument("--id", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--idf", required=True)
    p.add_argument("--text-index", required=True)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--w", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--visual-config", choices=VISUAL_CONFIGS)
    p.add_argument("--strategy", choices=DOC_STRATEGIES)
    p.add_argument("--selective", dest="selective", action="store_true", default=None)
    p.add_argument("--no-selective", dest="selective", action="store_false")
    p.add_argument("--va-threshold", type=float)
    p.add_argument("--wlcs-denominator",
                   choices=[sequence.DENOMINATOR_PRINTED, sequence.DENOMINATOR_END_ALIGNED])
    p.add_argument("--history", help="dataset.json with duplicate history for selective mode")
    p.add_argument("--out", help="write the full ranking as JSON")
    p.add_argument("--dump-lcs", help="directory for per-pair alignment traces")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="run a configuration grid over tasks")
    _add_common(p)
    p.add_argument("--tasks", required=True)
    p.add_argument("--codebook", help="prebuilt codebook (otherwise trained from reference screens)")
    p.add_argument("--idf", help="prebuilt IDF table")
    p.add_argument("--dataset", help="dataset.json for selective-mode history")
    p.add_argument("--k", type=int)
    p.add_argument("--w", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--visual-config", choices=VISUAL_CONFIGS)
    p.add_argument("--strategy", choices=DOC_STRATEGIES)
    p.add_argument("--selective", dest="selective", action="store_true", default=None)
    p.add_argument("--no-selective", dest="selective", action="store_false")
    p.add_argument("--va-threshold", type=float)
    p.add_argument("--wlcs-denominator",
                   choices=[sequence.DENOMINATOR_PRINTED, sequence.DENOMINATOR_END_ALIGNED])
    p.add_argument("--grid", nargs="*", help="axes like fps=1,5 k=100,500 w=0,0.2")
    p.add_argument("--jobs", type=int)
    p.add_argument("--reference-count", type=int, default=synth.DEFAULT_REFERENCE_COUNT)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (VdupError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
