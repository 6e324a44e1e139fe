"""Command-line interface: thin delegates over the library.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .completion import complete_entity, find_incomplete, write_back
from .config import ToolkitConfig, load_config, make_backend, make_embedder
from .errors import BackendError, DataError
from .evaluation import (
    PrecisionSample,
    TranseConfig,
    hits_at_q,
    hits_csv,
    ks_statistic,
    precision,
    sample_entities,
    transe_to_vd,
    transe_train,
    triples_from_kg,
)
from .fusion import FusionConfig, fuse
from .ingest import (
    StructuredRecordMapping,
    extract_from_latex,
    ingest_structured,
    to_input_kg,
)
from .kg import EntityType, KnowledgeGraph, load_kg, save_kg
from .llm import augment_graph
from .vectordb import build_vd, load_vd, save_vd
from .vis import export_vis

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

__all__ = ["main", "run_cli"]


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _parse_counts(spec: str) -> dict[EntityType, int]:
    counts: dict[EntityType, int] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, value = part.partition("=")
        try:
            entity_type = EntityType(name.strip())
        except ValueError as exc:
            raise DataError(f"unknown entity type {name.strip()!r}") from exc
        try:
            counts[entity_type] = int(value)
        except ValueError as exc:
            raise DataError(f"bad count {value!r} for {name.strip()!r}") from exc
    return counts


def _load_json_file(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _cmd_ingest(args, config: ToolkitConfig) -> int:
    raws = []
    for latex_path in args.latex or []:
        text = Path(latex_path).read_text(encoding="utf-8")
        raws.extend(extract_from_latex(text, source_tag=Path(latex_path).name))
    if args.structured:
        if not args.mapping:
            raise DataError("--structured requires --mapping")
        mapping_data = _load_json_file(args.mapping)
        if not isinstance(mapping_data, dict):
            raise DataError("mapping file must hold a JSON object")
        if "entity_type" in mapping_data:
            mapping_data["entity_type"] = EntityType(mapping_data["entity_type"])
        try:
            mapping = StructuredRecordMapping(**mapping_data)
        except TypeError as exc:
            raise DataError(f"bad mapping: {exc}") from exc
        records = []
        with open(args.structured, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(
                        f"{args.structured}:{line_no} is not valid JSON: {exc}"
                    ) from exc
        raws.extend(ingest_structured(records, mapping, Path(args.structured).name))
    if not raws:
        raise DataError("nothing to ingest: no --latex or --structured inputs")
    kg = to_input_kg(raws)
    save_kg(kg, args.out)
    print(f"ingested {len(kg)} entities, {kg.edge_count} edges -> {args.out}")
    return EXIT_OK


def _cmd_augment(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    backend = make_backend(config)
    warnings = augment_graph(
        kg,
        backend,
        retries=config.retries,
        parallelism=args.parallelism or config.parallelism,
    )
    out = args.out or args.kg
    save_kg(kg, out)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"augmented {len(kg)} entities, {kg.edge_count} edges -> {out}")
    return EXIT_OK


def _cmd_build_vd(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    embedder = make_embedder(config)
    weights = None
    if args.weights:
        weights = tuple(float(x) for x in args.weights.split(","))
    mask = None
    if args.mask:
        from .embedding import SentenceMask

        mask = SentenceMask.of(*[s.strip() for s in args.mask.split(",")])
    db, failures = build_vd(
        kg, embedder, strategy=args.strategy, weights=weights, mask=mask
    )
    save_vd(db, args.out)
    if failures:
        print(f"warning: {len(failures)} entities not embedded: {failures}",
              file=sys.stderr)
    print(f"indexed {len(db)} vectors ({args.strategy}) -> {args.out}")
    return EXIT_OK


def _cmd_search(args, config: ToolkitConfig) -> int:
    db = load_vd(args.vd)
    if args.entity_id is not None:
        if args.entity_id not in db:
            raise DataError(f"entity {args.entity_id} has no vector in the index")
        query = db.vector(args.entity_id)
        exclude = {args.entity_id}
    else:
        query = make_embedder(config).embed_text(args.text)
        exclude = set()
    hits = db.top_k(query, args.k, exclude=exclude)
    titles = {}
    if args.kg:
        kg = load_kg(args.kg)
        titles = {h.entity_id: kg.entity(h.entity_id).title for h in hits
                  if h.entity_id in kg}
    if args.format == "json":
        print(json.dumps(
            [{"entity_id": h.entity_id, "score": h.score,
              **({"title": titles[h.entity_id]} if h.entity_id in titles else {})}
             for h in hits], ensure_ascii=False))
    else:
        for hit in hits:
            title = f"\t{titles[hit.entity_id]}" if hit.entity_id in titles else ""
            print(f"{hit.entity_id}\t{hit.score:.6f}{title}")
    return EXIT_OK


def _cmd_fuse(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    db = load_vd(args.vd)
    incoming = load_kg(args.incoming)
    backend = make_backend(config)
    embedder = make_embedder(config)
    report = fuse(
        kg, incoming, db, embedder, backend,
        FusionConfig(n_candidates=args.candidates or config.fusion_n),
    )
    out = args.out or args.kg
    save_kg(kg, out)
    save_vd(db, args.vd_out or args.vd)
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    print(
        f"fused {report.added + report.merged + report.skipped} entities: "
        f"{report.added} added, {report.merged} merged, {report.skipped} skipped "
        f"-> {out}"
    )
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _cmd_complete(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    backend = make_backend(config)
    embedder = make_embedder(config)
    vd = load_vd(args.vd) if args.vd else None
    if args.entity_id is not None:
        targets = [args.entity_id]
    else:
        targets = [entity.id for entity in find_incomplete(kg)]
    outcomes = []
    for entity_id in targets:
        try:
            result, bundle = complete_entity(
                kg, entity_id, backend,
                vd=vd, embedder=embedder,
                max_rounds=args.max_rounds or config.max_rounds,
                fuzzy_k=config.fuzzy_k, retries=config.retries,
            )
        except BackendError as exc:
            print(f"warning: entity {entity_id}: {exc}", file=sys.stderr)
            outcomes.append({"entity_id": entity_id, "status": "error",
                             "message": str(exc)})
            continue
        if result.status == "complete":
            write_back(kg, entity_id, result, bundle)
        outcomes.append({**result.to_dict(), "bundle": bundle.to_dict()})
    out = args.out or args.kg
    save_kg(kg, out)
    completed = sum(1 for o in outcomes if o.get("status") == "complete")
    if args.report:
        Path(args.report).write_text(
            json.dumps(outcomes, ensure_ascii=False, indent=2), encoding="utf-8"
        )
    print(f"completed {completed}/{len(targets)} entities -> {out}")
    return EXIT_OK


def _cmd_eval_reach(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    db = load_vd(args.vd)
    counts = _parse_counts(args.counts)
    samples = sample_entities(kg, counts, args.seed)
    q_values = [int(x) for x in args.q.split(",") if x.strip()]
    result = hits_at_q(kg, db, samples, args.k, q_values, args.direction)
    if args.csv:
        Path(args.csv).write_text(hits_csv(result), encoding="utf-8")
    payload = json.dumps(result.to_dict(), ensure_ascii=False, indent=2)
    _write_or_print(payload, args.json)
    return EXIT_OK


def _cmd_eval_precision(args, config: ToolkitConfig) -> int:
    data = _load_json_file(args.labels)
    if not isinstance(data, list):
        raise DataError("labels file must hold a JSON list")
    samples = []
    for row in data:
        try:
            samples.append(
                PrecisionSample(int(row["entity_id"]), tuple(bool(x) for x in row["labels"]))
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad label row {row!r}: {exc}") from exc
    try:
        summary = precision(samples)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write_or_print(json.dumps(summary.to_dict(), indent=2), args.json)
    return EXIT_OK


def _cmd_eval_ks(args, config: ToolkitConfig) -> int:
    a = _load_json_file(args.a)
    b = _load_json_file(args.b)
    if not isinstance(a, list) or not isinstance(b, list):
        raise DataError("K-S inputs must be JSON lists of numbers")
    try:
        d = ks_statistic(a, b)
    except (TypeError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    _write_or_print(json.dumps({"d": d}), args.json)
    return EXIT_OK


def _cmd_eval_transe(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    triples = triples_from_kg(kg)
    cfg = TranseConfig(
        dim=args.dim, margin=args.margin, learning_rate=args.lr,
        epochs=args.epochs, seed=args.seed,
    )
    result = transe_train(triples, cfg)
    if args.out:
        save_vd(transe_to_vd(result, dim=cfg.dim), args.out)
    if args.losses:
        Path(args.losses).write_text(
            json.dumps(result.epoch_losses), encoding="utf-8"
        )
    summary = {
        "entities": len(result.entity_vectors),
        "relations": len(result.relation_vectors),
        "epochs": cfg.epochs,
        "final_loss": result.epoch_losses[-1] if result.epoch_losses else None,
    }
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_stats(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    print(json.dumps(kg.stats().to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def _cmd_export_vis(args, config: ToolkitConfig) -> int:
    kg = load_kg(args.kg)
    _write_or_print(export_vis(kg, args.format), args.out)
    return EXIT_OK


def _cmd_serve(args, config: ToolkitConfig) -> int:
    from .service import serve

    serve(
        config,
        kg_path=args.kg,
        vd_path=args.vd,
        host=args.host,
        port=args.port,
        allow_mutations=args.allow_mutations,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amkg",
        description="Build, augment, search, fuse, complete, and evaluate "
        "a mathematical knowledge graph.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="extract entities into a knowledge graph")
    p.add_argument("--latex", nargs="+", help="LaTeX source files")
    p.add_argument("--structured", help="JSONL records file")
    p.add_argument("--mapping", help="JSON field mapping for --structured")
    p.add_argument("--out", required=True, help="output KG file")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("augment", help="fill missing attributes via the LLM")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", help="output KG file (default: in place)")
    p.add_argument("--parallelism", type=int, default=0)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("build-vd", help="embed all entities into an index")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True, help="output index file")
    p.add_argument("--strategy", default="strategy1",
                   choices=["strategy1", "strategy2"])
    p.add_argument("--weights", help="five comma-separated weights (strategy2)")
    p.add_argument("--mask", help="comma-separated sentence slots to include")
    p.set_defaults(func=_cmd_build_vd)

    p = sub.add_parser("search", help="query an index")
    p.add_argument("--vd", required=True)
    p.add_argument("--kg", help="KG file to resolve hit titles")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text")
    group.add_argument("--entity-id", type=int)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--format", default="text", choices=["text", "json"])
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("fuse", help="merge an incoming KG into an existing one")
    p.add_argument("--kg", required=True, help="existing KG file")
    p.add_argument("--incoming", required=True, help="incoming KG file")
    p.add_argument("--vd", required=True, help="existing index file")
    p.add_argument("--out", help="output KG file (default: in place)")
    p.add_argument("--vd-out", help="output index file (default: in place)")
    p.add_argument("--candidates", type=int, default=0)
    p.add_argument("--report", help="write the fusion report JSON here")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("complete", help="derive missing proofs and solutions")
    p.add_argument("--kg", required=True)
    p.add_argument("--vd", help="index for fuzzy retrieval")
    p.add_argument("--entity-id", type=int, help="one entity (default: all)")
    p.add_argument("--out", help="output KG file (default: in place)")
    p.add_argument("--max-rounds", type=int, default=0)
    p.add_argument("--report", help="write per-entity results JSON here")
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("eval", help="quantitative evaluation")
    esub = p.add_subparsers(dest="eval_command", required=True)

    e = esub.add_parser("reach", help="k-hop reachability hit rates")
    e.add_argument("--kg", required=True)
    e.add_argument("--vd", required=True)
    e.add_argument("--k", type=int, default=5)
    e.add_argument("--q", default="1,5,10,15")
    e.add_argument("--direction", default="either",
                   choices=["forward", "backward", "either"])
    e.add_argument("--counts", default="definition=50,theorem=30,problem=20")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--csv", help="write (q, rate) CSV here")
    e.add_argument("--json", help="write the JSON report here")
    e.set_defaults(func=_cmd_eval_reach)

    e = esub.add_parser("precision", help="labeled retrieval precision")
    e.add_argument("--labels", required=True, help="JSON label file")
    e.add_argument("--json", help="write the JSON report here")
    e.set_defaults(func=_cmd_eval_precision)

    e = esub.add_parser("ks", help="two-sample Kolmogorov-Smirnov statistic")
    e.add_argument("--a", required=True, help="JSON array file")
    e.add_argument("--b", required=True, help="JSON array file")
    e.add_argument("--json", help="write the JSON report here")
    e.set_defaults(func=_cmd_eval_ks)

    e = esub.add_parser("transe", help="train the TransE baseline")
    e.add_argument("--kg", required=True)
    e.add_argument("--dim", type=int, default=384)
    e.add_argument("--margin", type=float, default=1.0)
    e.add_argument("--lr", type=float, default=0.01)
    e.add_argument("--epochs", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="write a transe-tagged index here")
    e.add_argument("--losses", help="write the loss curve JSON here")
    e.set_defaults(func=_cmd_eval_transe)

    p = sub.add_parser("stats", help="print graph statistics")
    p.add_argument("--kg", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("export-vis", help="export for graph viewers")
    p.add_argument("--kg", required=True)
    p.add_argument("--format", default="visjson", choices=["visjson", "dot"])
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_export_vis)

    p = sub.add_parser("serve", help="run the retrieval service")
    p.add_argument("--kg", help="KG file (default: from config)")
    p.add_argument("--vd", help="index file (default: from config)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--allow-mutations", action="store_true")
    p.set_defaults(func=_cmd_serve)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    """Parse arguments and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if getattr(args, "command", None) is None:
        parser.print_help()
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
