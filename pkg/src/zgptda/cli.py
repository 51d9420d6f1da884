"""Command-line surface: analyze, compare, and augment.

Every command writes a run manifest next to its primary output (command,
full config snapshot, input hashes, tool version, seed, wall-clock), so runs
with deterministic transports and providers are reproducible byte-exactly.

Exit codes: 0 success, 1 input error, 2 transport/provider failure.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

from . import __version__
from .augment import (
    API_KEY_ENV,
    DEFAULT_PROMPT,
    GenerationConfig,
    LiveTransport,
    MockTransport,
    PartialGeneration,
    RecordingTransport,
    ReplayTransport,
    TransportError,
    compare_corpora,
    corpus_report_dict,
    emit_dataset,
    evaluate_corpus,
    run_augmentation,
)
from .corpus import LoadError, load_jsonl
from .laws import HILBERG_MAX_BLOCK, TAYLOR_SEGMENT_LEN
from .mfdfa import FileVectorEmbedder, ProviderError
from .zscore import describe_rulebase

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TRANSPORT = 2


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path, text: str):
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    # numpy scalars and arrays leak into reports from the numerics layer
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _write_json(path, obj):
    _atomic_write_text(
        path,
        json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True, default=_json_default) + "\n",
    )


def _write_manifest(out_path, command: str, args: argparse.Namespace, inputs, started: float):
    finished = time.time()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "input_sha256": {str(p): _sha256_file(p) for p in inputs},
        "seed": getattr(args, "seed", None),
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished_at": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
        "duration_s": finished - started,
    }
    _write_json(f"{out_path}.manifest.json", manifest)


def _embedder(args):
    if getattr(args, "embeddings", None):
        return FileVectorEmbedder(args.embeddings)
    return None


def _series_csv(ev, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for report in ev.reports:
        if report.series is None:
            continue
        fitted = report.fit.fitted_y if report.fit is not None else [""] * len(report.series)
        lines = ["x,y,fitted"]
        for x, y, f in zip(report.series.x, report.series.y, fitted):
            lines.append(f"{float(x)},{float(y)},{float(f) if f != '' else ''}")
        _atomic_write_text(os.path.join(out_dir, f"{report.law}.csv"), "\n".join(lines) + "\n")
    if ev.spectrum is not None:
        s = ev.spectrum
        for i, q in enumerate(s.q_grid):
            lines = ["s,F"]
            for scale, value in zip(s.scales, s.fluctuation[i]):
                lines.append(f"{int(scale)},{float(value)}")
            _atomic_write_text(
                os.path.join(out_dir, f"fq_q{float(q):+.1f}.csv"), "\n".join(lines) + "\n"
            )


def cmd_analyze(args) -> int:
    started = time.time()
    docs = load_jsonl(args.input)
    if not docs:
        print(f"error: {args.input} contains no documents", file=sys.stderr)
        return EXIT_INPUT
    ev = evaluate_corpus(
        docs,
        name=os.path.splitext(os.path.basename(args.input))[0],
        embedder=_embedder(args),
        segment_len=args.segment_len,
        max_block=args.max_block,
        with_spectrum=True,
        detrend_order=args.detrend_order,
    )
    report = {"schema_version": SCHEMA_VERSION, "corpus": corpus_report_dict(ev)}
    _write_json(args.out, report)
    if args.series_csv:
        _series_csv(ev, args.series_csv)
    _write_manifest(args.out, "analyze", args, [args.input], started)
    unfittable = [r.law for r in ev.reports if not r.fittable]
    if unfittable:
        print(f"warning: unfittable laws: {', '.join(unfittable)}", file=sys.stderr)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    started = time.time()
    docs_a = load_jsonl(args.corpus_a)
    docs_b = load_jsonl(args.corpus_b)
    if not docs_a or not docs_b:
        print("error: both corpora must be non-empty", file=sys.stderr)
        return EXIT_INPUT
    name_a = os.path.splitext(os.path.basename(args.corpus_a))[0]
    name_b = os.path.splitext(os.path.basename(args.corpus_b))[0]
    if name_a == name_b:
        name_a, name_b = f"{name_a}#a", f"{name_b}#b"
    report = compare_corpora(
        docs_a,
        docs_b,
        name_a=name_a,
        name_b=name_b,
        embedder=_embedder(args),
        segment_len=args.segment_len,
        max_block=args.max_block,
    )
    _write_json(args.out, report)
    if args.csv:
        _comparison_csv(report, args.csv)
    _write_manifest(args.out, "compare", args, [args.corpus_a, args.corpus_b], started)
    nulls = [
        f"{name}:{law}"
        for name, corpus in report["corpora"].items()
        for law, cell in corpus["laws"].items()
        if not cell["fittable"]
    ]
    if nulls:
        print(f"warning: null cells: {', '.join(nulls)}", file=sys.stderr)
    print(f"wrote {args.out}")
    return EXIT_OK


def _comparison_csv(report: dict, path):
    names = list(report["corpora"])
    lines = ["law,corpus,exponent,secondary_exponent,r2,kl,js,mape"]
    for law in report["laws"]:
        for name in names:
            cell = report["corpora"][name]["laws"][law]
            if cell["fittable"]:
                m = cell["metrics"]
                second = cell["secondary_exponent"]
                lines.append(
                    f"{law},{name},{cell['exponent']},{second if second is not None else ''},"
                    f"{m['r2']},{m['kl']},{m['js']},{m['mape']}"
                )
            else:
                lines.append(f"{law},{name},,,,,,")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _scores_payload(runs, cfg: GenerationConfig) -> dict:
    payload_runs = []
    for run in runs:
        instances = []
        for item in run.instances:
            entry = {
                "id": item.instance.id,
                "rank": item.rank,
                "suitability": item.suitability.s,
                "s_prime_centroid": item.suitability.s_prime_centroid,
                "no_signal": item.no_signal,
                "excluded_laws": item.excluded_laws,
                "laws": {
                    r.law: (
                        {
                            "r2": r.fit.metrics.r2,
                            "kl": r.fit.metrics.kl,
                            "js": r.fit.metrics.js,
                            "mape": r.fit.metrics.mape,
                            "exponent": r.fit.exponent,
                        }
                        if r.fittable
                        else None
                    )
                    for r in item.law_reports
                },
            }
            if item.z is not None:
                entry["z"] = {"a_t": item.z.a_t, "b_t": item.z.b_t, "laws_used": item.z.laws_used}
            instances.append(entry)
        payload_runs.append({
            "raw_id": run.raw.id,
            "transport": run.provenance["transport"],
            "config_sha256": run.provenance["config_sha256"],
            "partial": run.provenance["partial"],
            "selected_ids": [s.instance.id for s in run.selected],
            "instances": instances,
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "config": {**cfg.__dict__},
        "rulebase": describe_rulebase(),
        "runs": payload_runs,
    }


def cmd_augment(args) -> int:
    started = time.time()
    raws = load_jsonl(args.input)
    if not raws:
        print(f"error: {args.input} contains no documents", file=sys.stderr)
        return EXIT_INPUT
    cfg = GenerationConfig(
        n_instances=args.n,
        prompt_template=args.prompt_template,
        top_fraction=args.fraction,
        model=args.model,
        temperature=args.temperature,
        seed=args.seed,
        max_in_flight=args.max_in_flight,
    )
    if args.transport == "mock":
        transport = MockTransport(seed=args.seed)
    elif args.transport == "replay":
        if not args.replay_file:
            print("error: --transport replay requires --replay-file", file=sys.stderr)
            return EXIT_INPUT
        transport = ReplayTransport(args.replay_file)
    else:
        if not args.endpoint:
            print("error: --transport live requires --endpoint", file=sys.stderr)
            return EXIT_INPUT
        if not os.environ.get(API_KEY_ENV):
            print(f"warning: {API_KEY_ENV} is not set", file=sys.stderr)
        transport = LiveTransport(args.endpoint)
    recorder = None
    if args.record_file:
        recorder = RecordingTransport(transport)
        transport = recorder

    runs, error = run_augmentation(raws, cfg, transport, embedder=_embedder(args))

    if error is not None and not args.keep_partial:
        print(f"error: {error} (rerun with --keep-partial to keep partial results)",
              file=sys.stderr)
        return EXIT_TRANSPORT

    n_records = emit_dataset(raws, runs, args.out)
    _write_json(args.scores, _scores_payload(runs, cfg))
    if recorder is not None:
        recorder.dump(args.record_file)
    _write_manifest(args.out, "augment", args, [args.input], started)
    print(f"wrote {args.out} ({n_records} records) and {args.scores}")
    if error is not None:
        print(f"error: {error} (partial results kept)", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_OK


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zgptda",
        description="Scaling-law conformity analysis and Z-number guided text augmentation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--config",
        help="JSON file of flag defaults (keys are flag names with dashes as underscores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: list[argparse.ArgumentParser] = []

    def common_law_flags(p):
        p.add_argument("--segment-len", type=int, default=TAYLOR_SEGMENT_LEN,
                       help="segment length in words for the count-variance law")
        p.add_argument("--max-block", type=int, default=HILBERG_MAX_BLOCK,
                       help="largest block size for the block-entropy law")
        p.add_argument("--embeddings",
                       help="JSONL file of precomputed unit vectors (default: built-in hashed embedder)")
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")

    p_analyze = sub.add_parser("analyze", help="evaluate all eight laws on one corpus")
    p_analyze.add_argument("input", help="JSONL dataset")
    p_analyze.add_argument("--out", default="report.json", help="report path")
    p_analyze.add_argument("--series-csv", help="directory for per-law series and F_q(s) CSV dumps")
    p_analyze.add_argument("--detrend-order", type=int, default=1,
                           help="polynomial order for fluctuation detrending (1..3)")
    common_law_flags(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_compare = sub.add_parser("compare", help="side-by-side law grid for two corpora")
    p_compare.add_argument("corpus_a", help="first JSONL dataset")
    p_compare.add_argument("corpus_b", help="second JSONL dataset")
    p_compare.add_argument("--out", default="comparison.json", help="report path")
    p_compare.add_argument("--csv", help="also write the metric grid as CSV")
    common_law_flags(p_compare)
    p_compare.set_defaults(func=cmd_compare)

    p_augment = sub.add_parser("augment", help="generate, score, and select paraphrase instances")
    p_augment.add_argument("input", help="JSONL dataset of raw examples")
    p_augment.add_argument("--out", default="augmented.jsonl", help="output dataset path")
    p_augment.add_argument("--scores", default="scores.json", help="per-instance score report path")
    p_augment.add_argument("--transport", choices=("mock", "replay", "live"), default="mock")
    p_augment.add_argument("--replay-file", help="recorded generations for --transport replay")
    p_augment.add_argument("--record-file", help="record completions to this replay file")
    p_augment.add_argument("--endpoint", help="chat-completion URL for --transport live")
    p_augment.add_argument("--model", default="gpt-4")
    p_augment.add_argument("--temperature", default="1.0")
    p_augment.add_argument("--n", type=int, default=10, help="instances per raw example")
    p_augment.add_argument("--fraction", type=float, default=0.5,
                           help="fraction of instances kept, by descending suitability")
    p_augment.add_argument("--prompt-template", default=DEFAULT_PROMPT)
    p_augment.add_argument("--max-in-flight", type=int, default=4)
    p_augment.add_argument("--keep-partial", action="store_true",
                           help="keep partial outputs when the transport fails")
    common_law_flags(p_augment)
    p_augment.set_defaults(func=cmd_augment)
    subparsers.extend([p_analyze, p_compare, p_augment])

    if config_defaults:
        # defaults must land on the subparsers: argparse resolves subcommand
        # arguments against the subparser's own defaults
        for sp in subparsers:
            dests = {action.dest for action in sp._actions}
            sp.set_defaults(**{k: v for k, v in config_defaults.items() if k in dests})
    return parser


def main(argv=None) -> int:
    # a config file provides defaults; explicit flags still win
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config_defaults = None
    if known.config:
        try:
            with open(known.config, encoding="utf-8") as fh:
                config_defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {known.config}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    parser = build_parser(config_defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LoadError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TransportError, PartialGeneration, ProviderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
