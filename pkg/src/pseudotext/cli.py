"""Command-line entry point wiring corpora, detectors, the knowledge graph,
rewriting, the LLM chain, and the evaluators into reproducible batch runs.

Every run writes its outputs atomically (temp file + rename) plus a
manifest.json next to the output, echoing the resolved configuration, tool
version, input digests, and any per-document failures. Exit codes: 0 success,
1 partial per-document failures, 2 configuration or usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
import tempfile
from pathlib import Path

from pseudotext import __version__
from pseudotext.corpus import (
    ConllParseError,
    Document,
    JsonlSchemaError,
    parse_conll,
    read_jsonl,
    write_jsonl,
)
from pseudotext.detect import DetectorError, make_detector
from pseudotext.evaluation import (
    TrainConfig,
    classify_syntheticity,
    leakage_report,
    load_model,
    prf,
    read_labeled_jsonl,
    save_model,
    train_syntheticity,
)
from pseudotext.kg import KgLoadError, load_kg
from pseudotext.llm import HttpChatClient, LlmEndpoint, MockChatClient, llm_pseudonymize_batch
from pseudotext.rewrite import (
    PSEUDONYMIZE,
    SANITIZE,
    AllDocumentsFailedError,
    generate_parallel_corpus,
    rewrite_corpus,
    write_parallel_tsv,
)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Plumbing


def _atomic_write(path: Path, data: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc}") from exc


def _read_docs(path: str) -> list[Document]:
    raw = _read_text(path, "corpus")
    try:
        return read_jsonl(raw)
    except JsonlSchemaError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _config_dict(args: argparse.Namespace) -> dict:
    config = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func",):
            continue
        config[key] = str(value) if isinstance(value, Path) else value
    return config


def _write_manifest(
    args: argparse.Namespace,
    inputs: list[str],
    outputs: list[str],
    failures: list[tuple[str, str]],
    extra: dict | None = None,
) -> None:
    out_dir = Path(outputs[0]).parent if outputs else Path(".")
    manifest = {
        "tool": "pseudotext",
        "version": __version__,
        "subcommand": args.command,
        "config": _config_dict(args),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "inputs": {path: _sha256(Path(path)) for path in inputs},
        "outputs": outputs,
        "failures": [{"id": doc_id, "error": error} for doc_id, error in failures],
    }
    if extra:
        manifest.update(extra)
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _finish(args, inputs, outputs, failures, extra=None) -> int:
    _write_manifest(args, inputs, outputs, failures, extra)
    if failures:
        print(f"{len(failures)} document(s) failed; see manifest.json", file=sys.stderr)
        return 1
    return 0


def _detector(args: argparse.Namespace):
    try:
        return make_detector(args.detector, workers=getattr(args, "workers", 1))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot build detector {args.detector!r}: {exc}") from exc


def _kg(args: argparse.Namespace):
    if not args.kg:
        raise UsageError("this subcommand requires --kg")
    try:
        return load_kg(args.kg)
    except OSError as exc:
        raise UsageError(f"cannot read KG {args.kg!r}: {exc}") from exc
    except KgLoadError as exc:
        raise UsageError(f"{args.kg}: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands


def cmd_conll_import(args: argparse.Namespace) -> int:
    raw = _read_text(args.infile, "CoNLL file")
    try:
        docs = parse_conll(raw)
    except ConllParseError as exc:
        raise UsageError(f"{args.infile}: {exc}") from exc
    _atomic_write(Path(args.out), write_jsonl(docs))
    return _finish(args, [args.infile], [args.out], [])


def cmd_detect(args: argparse.Namespace) -> int:
    docs = _read_docs(args.infile)
    detector = _detector(args)
    annotated = []
    failures = []
    for doc in docs:
        try:
            spans = detector.detect(doc)
        except (DetectorError, ValueError) as exc:
            failures.append((doc.id, str(exc)))
            continue
        annotated.append(Document(doc.id, doc.text, gold_spans=spans))
    _atomic_write(Path(args.out), write_jsonl(annotated))
    return _finish(args, [args.infile], [args.out], failures)


def _cmd_rewrite(args: argparse.Namespace, mode: str) -> int:
    docs = _read_docs(args.infile)
    detector = _detector(args)
    kg = _kg(args) if mode == PSEUDONYMIZE else None
    inputs = [args.infile] + ([args.kg] if kg is not None else [])
    try:
        rewritten, failures = rewrite_corpus(
            docs,
            detector,
            mode,
            kg=kg,
            seed=args.seed,
            link_scope=args.link_scope,
            workers=args.workers,
        )
    except AllDocumentsFailedError as exc:
        _atomic_write(Path(args.out), "")
        return _finish(args, inputs, [args.out], exc.failures)
    _atomic_write(Path(args.out), write_jsonl(r.to_document() for r in rewritten))
    return _finish(args, inputs, [args.out], failures)


def cmd_sanitize(args: argparse.Namespace) -> int:
    return _cmd_rewrite(args, SANITIZE)


def cmd_pseudonymize(args: argparse.Namespace) -> int:
    return _cmd_rewrite(args, PSEUDONYMIZE)


def cmd_gen_parallel(args: argparse.Namespace) -> int:
    docs = _read_docs(args.infile)
    detector = _detector(args)
    kg = _kg(args)
    try:
        pairs, failures = generate_parallel_corpus(
            docs, detector, kg, seed=args.seed, workers=args.workers
        )
    except AllDocumentsFailedError as exc:
        _atomic_write(Path(args.out), "")
        return _finish(args, [args.infile, args.kg], [args.out], exc.failures)
    _atomic_write(Path(args.out), write_parallel_tsv(pairs))
    return _finish(args, [args.infile, args.kg], [args.out], failures)


def cmd_llm_pseudonymize(args: argparse.Namespace) -> int:
    docs = _read_docs(args.infile)
    if args.mock:
        try:
            client = MockChatClient.from_yaml(args.mock)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load mock fixture {args.mock!r}: {exc}") from exc
        extract_client = replace_client = client
        retries = args.max_retries
    elif args.endpoint:
        extract_client = HttpChatClient(
            LlmEndpoint(
                args.endpoint,
                args.model_extract,
                api_key_env=args.api_key_env,
                timeout=args.timeout,
                max_retries=args.max_retries,
            )
        )
        replace_client = HttpChatClient(
            LlmEndpoint(
                args.endpoint,
                args.model_replace,
                api_key_env=args.api_key_env,
                timeout=args.timeout,
                max_retries=args.max_retries,
            )
        )
        retries = args.max_retries
    else:
        raise UsageError("llm-pseudonymize requires --endpoint or --mock")

    results, failures = llm_pseudonymize_batch(
        docs,
        extract_client,
        replace_client,
        align_retries=retries,
        max_in_flight=args.max_in_flight,
    )
    _atomic_write(Path(args.out), write_jsonl(r.to_document() for r in results))
    inputs = [args.infile] + ([args.mock] if args.mock else [])
    diagnostics = {
        "unmatched": {r.id: r.unmatched for r in results if r.unmatched},
        "self_replacements": {r.id: r.self_replacements for r in results if r.self_replacements},
        "suspect_non_entities": {
            r.id: r.suspect_non_entities for r in results if r.suspect_non_entities
        },
    }
    return _finish(args, inputs, [args.out], failures, extra={"diagnostics": diagnostics})


def cmd_eval_privacy(args: argparse.Namespace) -> int:
    gold = _read_docs(args.infile)
    rewritten = _read_docs(args.rewritten)
    try:
        report = leakage_report(gold, rewritten, fold_case=args.fold_case)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _atomic_write(Path(args.out), json.dumps(report.to_json_dict(), indent=2) + "\n")
    return _finish(args, [args.infile, args.rewritten], [args.out], [])


def cmd_synth_train(args: argparse.Namespace) -> int:
    items = read_labeled_jsonl(_read_text(args.infile, "labeled corpus"))
    if not 0.0 < args.split <= 1.0:
        raise UsageError(f"--split must be in (0, 1], got {args.split}")
    order = list(range(len(items)))
    random.Random(args.seed).shuffle(order)
    cut = int(len(order) * args.split)
    train_items = [items[i] for i in order[:cut]]
    held_items = [items[i] for i in order[cut:]]
    config = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        hash_bits=args.hash_bits,
    )
    try:
        model = train_syntheticity(train_items, config, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save_model(model, args.out)
    metrics: dict = {"final_loss": model.final_loss, "train_size": len(train_items)}
    if held_items:
        predictions = [classify_syntheticity(model, text)[0] for text, _ in held_items]
        result = prf(predictions, [label for _, label in held_items])
        metrics["held_out"] = result.to_json_dict() | {"size": len(held_items)}
    print(f"final training loss {model.final_loss:.4f}", file=sys.stderr)
    return _finish(args, [args.infile], [args.out], [], extra={"metrics": metrics})


def cmd_synth_eval(args: argparse.Namespace) -> int:
    items = read_labeled_jsonl(_read_text(args.infile, "labeled corpus"))
    try:
        model = load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load model {args.model!r}: {exc}") from exc
    predictions = [classify_syntheticity(model, text)[0] for text, _ in items]
    result = prf(predictions, [label for _, label in items])
    report = result.to_json_dict() | {"size": len(items)}
    _atomic_write(Path(args.out), json.dumps(report, indent=2) + "\n")
    return _finish(args, [args.infile, args.model], [args.out], [])


# ---------------------------------------------------------------------------
# Parser


def _add_io(sub: argparse.ArgumentParser, out_help: str) -> None:
    sub.add_argument("--in", dest="infile", required=True, help="input path")
    sub.add_argument("--out", required=True, help=out_help)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    sub.add_argument("--workers", type=int, default=1, help="document parallelism (default 1)")


def _add_detector(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--detector",
        default="oracle",
        help="oracle | gazetteer:<lexicon.json> | external:<command>",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudotext",
        description="Pseudonymize or sanitize entity mentions in text corpora, and evaluate the result.",
    )
    parser.add_argument("--version", action="version", version=f"pseudotext {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("conll-import", help="convert CoNLL-2003 data to document JSONL")
    _add_io(sub, "output document JSONL")
    _add_common(sub)
    sub.set_defaults(func=cmd_conll_import)

    sub = commands.add_parser("detect", help="annotate documents with detected entities")
    _add_io(sub, "output document JSONL with detected entities")
    _add_common(sub)
    _add_detector(sub)
    sub.set_defaults(func=cmd_detect)

    for name, func in (("sanitize", cmd_sanitize), ("pseudonymize", cmd_pseudonymize)):
        sub = commands.add_parser(name, help=f"{name} detected mentions")
        _add_io(sub, "output document JSONL (rewritten)")
        _add_common(sub)
        _add_detector(sub)
        sub.add_argument("--kg", help="knowledge graph JSONL (required for pseudonymize)")
        sub.add_argument(
            "--link-scope",
            choices=("doc", "corpus"),
            default="doc",
            help="surrogate consistency scope (default doc)",
        )
        sub.set_defaults(func=func)

    sub = commands.add_parser("gen-parallel", help="emit (original, pseudonymized) TSV pairs")
    _add_io(sub, "output TSV")
    _add_common(sub)
    _add_detector(sub)
    sub.add_argument("--kg", required=True, help="knowledge graph JSONL")
    sub.set_defaults(func=cmd_gen_parallel)

    sub = commands.add_parser("llm-pseudonymize", help="two-stage LLM rewriting")
    _add_io(sub, "output document JSONL (rewritten, no span annotations)")
    _add_common(sub)
    sub.add_argument("--endpoint", help="chat-completions URL")
    sub.add_argument("--model-extract", default="text-curie-001", help="stage-1 model name")
    sub.add_argument("--model-replace", default="gpt-turbo-3.5", help="stage-2 model name")
    sub.add_argument("--api-key-env", default="LLM_API_KEY", help="env var holding the API key")
    sub.add_argument("--mock", help="YAML fixture file; runs the chain offline")
    sub.add_argument("--timeout", type=float, default=30.0)
    sub.add_argument("--max-retries", type=int, default=2)
    sub.add_argument("--max-in-flight", type=int, default=4)
    sub.set_defaults(func=cmd_llm_pseudonymize)

    sub = commands.add_parser("eval-privacy", help="false-negative (leakage) rates")
    sub.add_argument("--in", dest="infile", required=True, help="gold corpus JSONL")
    sub.add_argument("--rewritten", required=True, help="rewritten corpus JSONL")
    sub.add_argument("--out", required=True, help="output report JSON")
    sub.add_argument("--fold-case", action="store_true", help="case-insensitive leak matching")
    _add_common(sub)
    sub.set_defaults(func=cmd_eval_privacy)

    sub = commands.add_parser("synth-train", help="train the syntheticity classifier")
    _add_io(sub, "output model file")
    _add_common(sub)
    sub.add_argument("--split", type=float, default=0.9, help="train fraction (default 0.9)")
    sub.add_argument("--epochs", type=int, default=20)
    sub.add_argument("--learning-rate", type=float, default=0.1)
    sub.add_argument("--batch-size", type=int, default=32)
    sub.add_argument("--hash-bits", type=int, default=18)
    sub.set_defaults(func=cmd_synth_train)

    sub = commands.add_parser("synth-eval", help="apply a trained syntheticity model")
    sub.add_argument("--in", dest="infile", required=True, help="labeled corpus JSONL")
    sub.add_argument("--model", required=True, help="model file from synth-train")
    sub.add_argument("--out", required=True, help="output report JSON")
    _add_common(sub)
    sub.set_defaults(func=cmd_synth_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return code
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'pseudotext {args.command} --help' for usage", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
