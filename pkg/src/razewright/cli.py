"""Single command-line entry point wiring corpus ingestion, indexing,
retrieval, dataset synthesis, the exam harness, metric evaluation, the
five-role proposal pipeline, scenario prompts, and fine-tune config emission.

Every subcommand accepts `--mock <script.jsonl>` to run against scripted
providers with zero network access. Runtime failures print one
machine-parseable line (`error <Type>: <message>`) and exit 1; usage errors
exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import collab, dataset, exam, lora, metrics, retrieve, templates
from .config import AppConfig, load_config
from .corpus import Chunk, chunk_document, clean_text, load_corpus
from .errors import InvalidInput, RazewrightError
from .index import IndexStore, VectorRecord, extract_graph, load_index, merge_extraction, save_index
from .providers import HttpClient, ProviderConfig, load_mock_script, user_request


def _write_or_print(text: str, out: str | None):
    if out:
        Path(out).write_text(text + ("" if text.endswith("\n") else "\n"), encoding="utf-8")
    else:
        print(text)


def _read_chunks_file(path: str) -> list[Chunk]:
    chunks = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            chunks.append(
                Chunk(obj["doc_id"], int(obj["seq"]), obj["text"], int(obj["char_start"]), int(obj["char_end"]))
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidInput(f"{path}:{lineno}: bad chunk record: {exc}") from exc
    if not chunks:
        raise InvalidInput(f"{path}: no chunks")
    return chunks


def _resolve_providers(args, cfg: AppConfig, need_chat=True, need_embed=False):
    """Mock script if given, else HTTP clients from the config."""
    if getattr(args, "mock", None):
        script = load_mock_script(args.mock)
        return script.chat, script.embedder
    chat_client = None
    embed_client = None
    if need_chat:
        if not cfg.chat.base_url:
            raise InvalidInput("no chat endpoint configured: pass --mock or set chat.base_url")
        chat_client = HttpClient(
            ProviderConfig(cfg.chat.base_url, cfg.chat.model, api_key_env=cfg.chat.api_key_env)
        )
    if need_embed:
        if not cfg.embed.base_url:
            raise InvalidInput("no embedding endpoint configured: pass --mock or set embed.base_url")
        embed_client = HttpClient(
            ProviderConfig(cfg.embed.base_url, cfg.embed.model, api_key_env=cfg.embed.api_key_env)
        )
    return chat_client, embed_client


def _load_cfg(args) -> AppConfig:
    cfg = load_config(getattr(args, "config", None))
    # flags beat the config file
    if getattr(args, "mode", None):
        cfg.retrieval.mode = args.mode
    if getattr(args, "top_k", None) is not None:
        cfg.retrieval.top_k = args.top_k
    if getattr(args, "context_budget", None) is not None:
        cfg.retrieval.context_budget = args.context_budget
    if getattr(args, "votes", None) is not None:
        cfg.exam.votes_per_round = args.votes
    if getattr(args, "max_rounds", None) is not None:
        cfg.exam.max_rounds = args.max_rounds
    if getattr(args, "temperature", None) is not None:
        cfg.exam.temperature = args.temperature
        cfg.chat.temperature = args.temperature
    if getattr(args, "templates", None):
        cfg.paths.templates = args.templates
    return cfg


def _templates_dir(cfg: AppConfig):
    return cfg.paths.templates or None


# --- subcommand handlers ------------------------------------------------------


def cmd_ingest(args) -> int:
    docs = load_corpus(args.corpus)
    n_chunks = 0
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for doc in docs:
            doc.cleaned_text = clean_text(doc.raw_text)
            if not doc.cleaned_text:
                print(f"skipping {doc.id}: empty after cleaning", file=sys.stderr)
                continue
            for chunk in chunk_document(doc, size=args.size, overlap=args.overlap):
                fh.write(
                    json.dumps(
                        {
                            "chunk_id": chunk.chunk_id,
                            "doc_id": chunk.doc_id,
                            "seq": chunk.seq,
                            "text": chunk.text,
                            "char_start": chunk.char_start,
                            "char_end": chunk.char_end,
                            "kind": doc.kind.value,
                            "title": doc.title,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                n_chunks += 1
    print(f"ingested {len(docs)} documents -> {n_chunks} chunks -> {args.out}")
    return 0


def cmd_index(args) -> int:
    cfg = _load_cfg(args)
    chunks = _read_chunks_file(args.chunks)
    chat_client, embedder = _resolve_providers(args, cfg, need_chat=not args.no_graph, need_embed=True)
    vectors = embedder.embed([c.text for c in chunks])
    store = IndexStore(embed_model=cfg.embed.model if not args.mock else "mock-hash")
    store.vectors.upsert(
        [VectorRecord(c.chunk_id, v, c.text) for c, v in zip(chunks, vectors)]
    )
    skipped = 0
    if not args.no_graph:
        template = templates.load_template("extraction", _templates_dir(cfg))
        for chunk in chunks:
            result = extract_graph(chunk, chat_client, template, model=cfg.chat.model)
            merge_extraction(store.graph, result)
            skipped += result.skipped
    save_index(store, args.out)
    print(
        f"indexed {len(store.vectors)} vectors, {len(store.graph.entities)} entities, "
        f"{len(store.graph.relations)} relations ({skipped} records skipped) -> {args.out}"
    )
    return 0


def cmd_query(args) -> int:
    cfg = _load_cfg(args)
    store = load_index(args.index)
    chat_client, embedder = _resolve_providers(args, cfg, need_chat=True, need_embed=True)
    query = retrieve.Query(args.text, cfg.retrieval.mode, cfg.retrieval.top_k)
    bundle = retrieve.retrieve(
        query,
        store,
        embedder,
        llm=chat_client,
        context_budget=cfg.retrieval.context_budget,
        keyword_template=templates.load_template("keywords", _templates_dir(cfg)),
    )
    template = templates.load_template("answer", _templates_dir(cfg))
    prompt = retrieve.assemble_prompt(query, bundle, template)
    answer = chat_client.chat(user_request(cfg.chat.model, prompt, temperature=cfg.chat.temperature))
    if args.transcript:
        payload = {
            "query": args.text,
            "mode": cfg.retrieval.mode,
            "top_k": cfg.retrieval.top_k,
            "chunks": [[c.chunk_id, c.text, c.score] for c in bundle.chunks],
            "prompt": prompt,
            "answer": answer,
        }
        Path(args.transcript).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )
    if args.json:
        print(json.dumps({"answer": answer, "chunks": [c.chunk_id for c in bundle.chunks]}, ensure_ascii=False))
    else:
        print(answer)
    return 0


def cmd_dataset_gen(args) -> int:
    cfg = _load_cfg(args)
    chunks = _read_chunks_file(args.chunks)
    chat_client, _ = _resolve_providers(args, cfg, need_chat=True)
    template = templates.load_template("dataset_generation", _templates_dir(cfg))
    result = dataset.generate_entries(
        chunks, chat_client, template, per_chunk=args.per_chunk, model=cfg.chat.model,
        temperature=cfg.chat.temperature,
    )
    entries = dataset.dedupe(result.entries)
    dataset.write_entries(entries, args.out)
    if args.rejects:
        dataset.write_rejects(result.rejects, args.rejects)
    dupes = len(result.entries) - len(entries)
    print(
        f"generated {len(entries)} entries ({dupes} duplicates dropped, "
        f"{len(result.rejects)} rejects) -> {args.out}"
    )
    if result.error:
        print(f"error {result.error} at chunk {result.failed_chunk_id}; partial results written", file=sys.stderr)
        return 1
    return 0


def cmd_dataset_split(args) -> int:
    entries = dataset.read_entries(args.entries)
    result = dataset.split(entries, args.ratio, args.seed)
    dataset.write_entries(result.train, args.train_out)
    dataset.write_entries(result.test, args.test_out)
    print(f"split {len(entries)} entries -> train {len(result.train)} / test {len(result.test)}")
    return 0


def cmd_exam_run(args) -> int:
    cfg = _load_cfg(args)
    bank = exam.load_bank(args.bank)
    chat_client, _ = _resolve_providers(args, cfg, need_chat=True)
    voting = exam.VotingConfig(
        votes_per_round=cfg.exam.votes_per_round,
        max_rounds=cfg.exam.max_rounds,
        temperature=cfg.exam.temperature,
        fresh_rounds=args.fresh_rounds,
        model=cfg.chat.model,
    )
    report = exam.run_exam(bank, chat_client, voting, _templates_dir(cfg))
    if args.out:
        Path(args.out).write_text(
            json.dumps(exam.report_to_json(report), ensure_ascii=False, indent=2), encoding="utf-8"
        )
    print(json.dumps(report.as_dict(), ensure_ascii=False) if args.json else report.as_text())
    return 1 if report.incomplete else 0


def cmd_exam_compare(args) -> int:
    nested: dict[str, dict[str, exam.ExamReport]] = {}
    for cell in args.cell:
        try:
            key, path = cell.split("=", 1)
            model, config_name = key.split(":", 1)
        except ValueError:
            raise InvalidInput(f"--cell must look like MODEL:CONFIG=path, got {cell!r}") from None
        nested.setdefault(model, {})[config_name] = exam.load_report(path)
    table = exam.compare_reports(nested, metric=args.metric)
    print(json.dumps(table.as_dict(), ensure_ascii=False) if args.json else table.as_text())
    return 0


def cmd_evaluate(args) -> int:
    pairs = []
    for lineno, line in enumerate(Path(args.pairs).read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            pairs.append(
                (
                    metrics.tokenize(obj["candidate"], args.tokenizer),
                    metrics.tokenize(obj["reference"], args.tokenizer),
                )
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"{args.pairs}:{lineno}: bad pair: {exc}") from exc
    report = metrics.evaluate_corpus(pairs)
    print(json.dumps(report.as_dict(), ensure_ascii=False) if args.json else report.as_text())
    return 0


def cmd_propose(args) -> int:
    cfg = _load_cfg(args)
    text = Path(args.precondition).read_text(encoding="utf-8")
    pre = collab.parse_precondition(text)
    chat_client, embedder = _resolve_providers(args, cfg, need_chat=True, need_embed=bool(args.index))
    retriever = None
    if args.index:
        store = load_index(args.index)
        keyword_template = templates.load_template("keywords", _templates_dir(cfg))

        def retriever(query_text: str):
            query = retrieve.Query(query_text, cfg.retrieval.mode, cfg.retrieval.top_k)
            return retrieve.retrieve(
                query, store, embedder, llm=chat_client,
                context_budget=cfg.retrieval.context_budget, keyword_template=keyword_template,
            )

    roles = collab.default_roles(_templates_dir(cfg))
    try:
        bundle = collab.run_pipeline(
            pre, chat_client, roles=roles, retriever=retriever,
            model=cfg.chat.model, temperature=cfg.chat.temperature,
        )
    except collab.PipelineAborted as aborted:
        if args.transcript:
            Path(args.transcript).write_text(aborted.partial.to_json(), encoding="utf-8")
        raise
    if args.transcript:
        Path(args.transcript).write_text(bundle.to_json(), encoding="utf-8")
    _write_or_print(bundle.proposal, args.out)
    for warning in bundle.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_scenario(args) -> int:
    cfg = _load_cfg(args)
    prompt = collab.scenario_prompt(args.kind, args.body or "")
    if args.prompt_only:
        print(prompt)
        return 0
    chat_client, _ = _resolve_providers(args, cfg, need_chat=True)
    reply = chat_client.chat(user_request(cfg.chat.model, prompt, temperature=cfg.chat.temperature))
    print(reply)
    return 0


def cmd_lora_config_emit(args) -> int:
    overrides = {
        name: value
        for name, value in (
            ("learning_rate", args.learning_rate),
            ("epochs", args.epochs),
            ("cutoff_len", args.cutoff_len),
            ("batch_size", args.batch_size),
            ("compute_type", args.compute_type),
            ("lr_scheduler", args.lr_scheduler),
            ("optimizer", args.optimizer),
            ("lora_rank", args.lora_rank),
            ("lora_target", args.lora_target),
        )
        if value is not None
    }
    cfg = lora.FinetuneConfig(**overrides)
    lora.emit_config(cfg, args.out)
    print(f"wrote fine-tune config -> {args.out}")
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="razewright",
        description="Offline-testable RAG, collaboration-pipeline, and evaluation toolkit "
        "for structural-demolition text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (section-prefixed keys)")
    common.add_argument("--mock", help="JSONL mock-provider script; runs with no network")
    common.add_argument("--templates", help="directory of template overrides")
    common.add_argument("--json", action="store_true", help="emit JSON instead of text tables")

    p = sub.add_parser("ingest", help="corpus directory -> cleaned chunk file", parents=[common])
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=800)
    p.add_argument("--overlap", type=int, default=200)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("index", help="chunk file -> vector + graph index", parents=[common])
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-graph", action="store_true", help="skip entity/relation extraction")
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser("query", help="one-shot retrieval-augmented answer", parents=[common])
    p.add_argument("--index", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--mode", choices=[m.value for m in retrieve.RetrievalMode])
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--context-budget", type=int, dest="context_budget")
    p.add_argument("--transcript", help="write the full retrieval/answer transcript JSON here")
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("dataset", help="instruction dataset operations")
    dataset_sub = p.add_subparsers(dest="dataset_command", required=True)
    g = dataset_sub.add_parser("gen", help="chunks -> instruction entries", parents=[common])
    g.add_argument("--chunks", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--rejects", help="write rejected replies (JSONL) here")
    g.add_argument("--per-chunk", type=int, default=1, dest="per_chunk")
    g.set_defaults(handler=cmd_dataset_gen)
    s = dataset_sub.add_parser("split", help="entries -> train/test files", parents=[common])
    s.add_argument("--entries", required=True)
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train-out", required=True, dest="train_out")
    s.add_argument("--test-out", required=True, dest="test_out")
    s.set_defaults(handler=cmd_dataset_split)

    p = sub.add_parser("exam", help="objective-question harness")
    exam_sub = p.add_subparsers(dest="exam_command", required=True)
    r = exam_sub.add_parser("run", help="vote through a question bank", parents=[common])
    r.add_argument("--bank", required=True)
    r.add_argument("--out", help="write the full report JSON here")
    r.add_argument("--votes", type=int, help="votes per round (default 5)")
    r.add_argument("--max-rounds", type=int, dest="max_rounds")
    r.add_argument("--temperature", type=float)
    r.add_argument("--fresh-rounds", action="store_true", dest="fresh_rounds",
                   help="count each round alone instead of accumulating")
    r.set_defaults(handler=cmd_exam_run)
    c = exam_sub.add_parser("compare", help="model-by-config accuracy table", parents=[common])
    c.add_argument("--cell", action="append", required=True, metavar="MODEL:CONFIG=PATH")
    c.add_argument("--metric", choices=["mean_of_kinds", "micro"], default="mean_of_kinds")
    c.set_defaults(handler=cmd_exam_compare)

    p = sub.add_parser("evaluate", help="BLEU/ROUGE over candidate/reference pairs", parents=[common])
    p.add_argument("--pairs", required=True, help="JSONL of {candidate, reference}")
    p.add_argument("--tokenizer", choices=["word", "char"], default="word")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("propose", help="run the five-role proposal pipeline", parents=[common])
    p.add_argument("--precondition", required=True, help="text file with the structure precondition")
    p.add_argument("--index", help="index directory for retrieval-augmented roles")
    p.add_argument("--out", help="write the final proposal here (default: stdout)")
    p.add_argument("--transcript", help="write the full bundle JSON here")
    p.add_argument("--mode", choices=[m.value for m in retrieve.RetrievalMode])
    p.add_argument("--top-k", type=int, dest="top_k")
    p.set_defaults(handler=cmd_propose)

    p = sub.add_parser("scenario", help="canned persona prompts (safety rules, scheme outline)", parents=[common])
    p.add_argument("--kind", required=True, choices=["safety_rules", "scheme_outline", "custom"])
    p.add_argument("--body", help="task sentence for --kind custom")
    p.add_argument("--prompt-only", action="store_true", dest="prompt_only")
    p.set_defaults(handler=cmd_scenario)

    p = sub.add_parser("lora-config", help="fine-tune hyperparameter file")
    lora_sub = p.add_subparsers(dest="lora_command", required=True)
    e = lora_sub.add_parser("emit", help="write the key=value fine-tune config", parents=[common])
    e.add_argument("--out", required=True)
    e.add_argument("--learning-rate", type=float, dest="learning_rate")
    e.add_argument("--epochs", type=int)
    e.add_argument("--cutoff-len", type=int, dest="cutoff_len")
    e.add_argument("--batch-size", type=int, dest="batch_size")
    e.add_argument("--compute-type", dest="compute_type")
    e.add_argument("--lr-scheduler", dest="lr_scheduler")
    e.add_argument("--optimizer")
    e.add_argument("--lora-rank", type=int, dest="lora_rank")
    e.add_argument("--lora-target", dest="lora_target")
    e.set_defaults(handler=cmd_lora_config_emit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except RazewrightError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
