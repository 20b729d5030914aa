"""Command-line entry point: the full pipeline as subcommands.

Configuration lives in a flat INI file; every key can be overridden by a
flag of the same name. All randomness flows from master_seed. Exit codes:
0 success, 1 validation failure, 2 configuration error, 3 I/O error.
Machine-readable diagnostics go to stderr as JSON lines.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import protocol, report
from .audio import wav_info
from .embedding_metrics import read_embeddings
from .errors import (
    AdapterProtocolError,
    ConfigurationError,
    EvaluationGapsError,
    FormatError,
    MetricValidationError,
    PsevalError,
)
from .manifest import (
    UtteranceRef,
    build_manifest,
    load_manifest,
    register_augmentation,
    save_manifest,
    scan_corpus,
    validate_manifest,
)
from .records import read_records, write_records
from .text_metrics import read_transcripts

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIGURATION = 2
EXIT_IO = 3

MIX_SETS = ("pse_test", "six_min", "thirty_min")


@dataclass
class RunConfig:
    corpus_root: str = ""
    manifest: str = ""
    output_dir: str = "out"
    master_seed: int = 0
    parallelism: int = 1
    interval_kind: str = "spread_1p96"
    mix_encoding: str = "float32"
    pesq_adapter: str = ""
    mos_adapter: str = ""


_CONFIG_KEYS = {f.strip() for f in RunConfig.__dataclass_fields__}
_INT_KEYS = {"master_seed", "parallelism"}


def emit_diagnostic(payload: dict) -> None:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"config file not found: {path}")
    merged: dict = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key not in _CONFIG_KEYS:
                raise ConfigurationError(f"unknown config key [{section}] {key}")
            merged[key] = value
    return merged


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, raw in file_values.items():
        setattr(cfg, key, int(raw) if key in _INT_KEYS else raw)
    for key in _CONFIG_KEYS:
        override = getattr(args, key, None)
        if override is not None:
            setattr(cfg, key, override)
    if cfg.parallelism < 1:
        raise ConfigurationError(f"parallelism must be >= 1, got {cfg.parallelism}")
    if cfg.interval_kind not in report.INTERVAL_KINDS:
        raise ConfigurationError(f"interval_kind must be one of {report.INTERVAL_KINDS}")
    if cfg.mix_encoding not in ("pcm16", "float32"):
        raise ConfigurationError("mix_encoding must be pcm16 or float32")
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI run-configuration file")
    parser.add_argument("--corpus-root", dest="corpus_root")
    parser.add_argument("--manifest", dest="manifest")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--master-seed", dest="master_seed", type=int)
    parser.add_argument("--parallelism", dest="parallelism", type=int)
    parser.add_argument("--interval-kind", dest="interval_kind", choices=report.INTERVAL_KINDS)
    parser.add_argument("--mix-encoding", dest="mix_encoding", choices=("pcm16", "float32"))
    parser.add_argument("--pesq-adapter", dest="pesq_adapter")
    parser.add_argument("--mos-adapter", dest="mos_adapter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_manifest = sub.add_parser("manifest", help="build/validate the challenge manifest")
    manifest_sub = p_manifest.add_subparsers(dest="subcommand", required=True)
    p_build = manifest_sub.add_parser("build")
    _add_common(p_build)
    p_validate = manifest_sub.add_parser("validate")
    _add_common(p_validate)
    p_register = manifest_sub.add_parser("register")
    _add_common(p_register)
    p_register.add_argument("--synthetic-root", required=True,
                            help="directory of synthetic speech: <root>/<speaker_id>/*.wav")

    p_mix = sub.add_parser("mix", help="plan or synthesize noisy mixtures")
    mix_sub = p_mix.add_subparsers(dest="subcommand", required=True)
    for name in ("plan", "run"):
        p = mix_sub.add_parser(name)
        _add_common(p)
        p.add_argument("--set", dest="mix_set", choices=MIX_SETS, default="pse_test")

    p_eval = sub.add_parser("eval", help="run an evaluation phase")
    eval_sub = p_eval.add_subparsers(dest="subcommand", required=True)
    p_tts = eval_sub.add_parser("tts")
    _add_common(p_tts)
    p_tts.add_argument("--hypotheses", required=True, help="transcript JSON from the ASR adapter")
    p_tts.add_argument("--embeddings", required=True, help="embeddings of the generated speech")
    p_tts.add_argument("--ref-embeddings", required=True, help="embeddings of the enrollment speech")
    p_tts.add_argument("--mos-records", help="optional MetricRecord JSONL with MOS scores")
    p_tts.add_argument("--generated-root", help="generated wav root, required with --mos-adapter")
    p_tts.add_argument("--condition", default="", help="condition label (model name)")
    p_pse = eval_sub.add_parser("pse")
    _add_common(p_pse)
    p_pse.add_argument("--enhanced-root", required=True, help="submission root: <root>/<speaker>/<mixture>.wav")
    p_pse.add_argument("--ledger", help="mixture ledger (default: output_dir/mixtures/pse_test_ledger.jsonl)")
    p_pse.add_argument("--condition", default="", help="condition label (model/size)")

    p_report = sub.add_parser("report", help="re-summarize existing record files")
    _add_common(p_report)
    p_report.add_argument("--records", nargs="+", required=True)
    p_report.add_argument("--format", dest="fmt", choices=("markdown", "csv", "json"), default="markdown")
    p_report.add_argument("--out", help="output file (default: stdout)")
    return parser


def _require(cfg_value: str, name: str) -> str:
    if not cfg_value:
        raise ConfigurationError(f"{name} is required (config key or flag)")
    return cfg_value


def _manifest_path(cfg: RunConfig) -> Path:
    if cfg.manifest:
        return Path(cfg.manifest)
    return Path(cfg.output_dir) / "manifest.json"


def _report_validation(rep) -> int:
    for violation in rep.violations:
        emit_diagnostic({"error": "manifest_violation", **violation.to_record()})
    if rep.valid:
        print("manifest valid")
        return EXIT_OK
    print(f"manifest INVALID: {len(rep.violations)} violations")
    return EXIT_VALIDATION


def cmd_manifest(args: argparse.Namespace, cfg: RunConfig) -> int:
    manifest_path = _manifest_path(cfg)
    if args.subcommand == "build":
        index = scan_corpus(_require(cfg.corpus_root, "corpus_root"))
        manifest = build_manifest(index, cfg.master_seed)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        save_manifest(manifest, str(manifest_path))
        print(f"wrote {manifest_path}")
        return _report_validation(validate_manifest(manifest))
    if args.subcommand == "validate":
        return _report_validation(validate_manifest(load_manifest(str(manifest_path))))
    # register
    manifest = load_manifest(str(manifest_path))
    synthetic_root = Path(args.synthetic_root)
    registered = 0
    for entry in manifest.speakers:
        speaker_dir = synthetic_root / entry.speaker_id
        if not speaker_dir.is_dir():
            continue
        utterances = []
        for wav_path in sorted(speaker_dir.glob("*.wav")):
            info = wav_info(str(wav_path))
            utterances.append(UtteranceRef(
                utterance_id=wav_path.stem,
                path=str(wav_path.resolve()),
                duration_s=info.duration_seconds,
                text="",
            ))
        if utterances:
            register_augmentation(manifest, entry.speaker_id, utterances)
            registered += 1
    save_manifest(manifest, str(manifest_path))
    print(f"registered augmentation for {registered} speakers")
    return EXIT_OK


def _plan_for_set(manifest, mix_set: str):
    if mix_set == "pse_test":
        return protocol.plan_pse_testset(manifest)
    return protocol.plan_finetune_set(manifest, mix_set)


def cmd_mix(args: argparse.Namespace, cfg: RunConfig) -> int:
    manifest = load_manifest(str(_manifest_path(cfg)))
    specs = _plan_for_set(manifest, args.mix_set)
    mix_root = Path(cfg.output_dir) / "mixtures"
    mix_root.mkdir(parents=True, exist_ok=True)
    if args.subcommand == "plan":
        plan_path = mix_root / f"{args.mix_set}_plan.jsonl"
        protocol.write_ledger(specs, str(plan_path))
        print(f"planned {len(specs)} mixtures -> {plan_path}")
        return EXIT_OK
    done = protocol.synthesize_specs(
        manifest, specs, str(mix_root),
        parallelism=cfg.parallelism, encoding=cfg.mix_encoding,
    )
    ledger_path = mix_root / f"{args.mix_set}_ledger.jsonl"
    protocol.write_ledger(done, str(ledger_path))
    print(f"synthesized {len(done)} mixtures -> {ledger_path}")
    return EXIT_OK


def _write_outputs(records, cfg: RunConfig, phase: str, condition: str) -> None:
    out_dir = Path(cfg.output_dir)
    records_dir = out_dir / "records"
    reports_dir = out_dir / "reports"
    records_dir.mkdir(parents=True, exist_ok=True)
    reports_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{phase}_{condition}" if condition else phase
    write_records(records, str(records_dir / f"{tag}.jsonl"))
    stats = report.summarize(records, interval_kind=cfg.interval_kind)
    for fmt, suffix in (("markdown", "md"), ("csv", "csv"), ("json", "json")):
        (reports_dir / f"{tag}.{suffix}").write_text(report.render(stats, fmt), encoding="utf-8")
    print(f"wrote {len(records)} records and reports under {out_dir} (tag {tag})")


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    manifest = load_manifest(str(_manifest_path(cfg)))
    if args.subcommand == "tts":
        hypotheses = read_transcripts(args.hypotheses)
        generated = read_embeddings(args.embeddings)
        reference = read_embeddings(args.ref_embeddings)
        mos_records = read_records(args.mos_records) if args.mos_records else None
        if cfg.mos_adapter:
            if not args.generated_root:
                raise ConfigurationError("--generated-root is required when a MOS adapter is configured")
            pairs = []
            root = Path(args.generated_root)
            for entry in manifest.speakers:
                for utt in entry.tts_eval:
                    wav = root / entry.speaker_id / f"{utt.utterance_id}.wav"
                    pairs.append((utt.utterance_id, str(wav), str(wav)))
            from .signal_metrics import run_external_metric

            mos_records = run_external_metric(cfg.mos_adapter, pairs, kind="mos")
        records = protocol.run_tts_eval(
            manifest, hypotheses, generated, reference,
            mos_records=mos_records, condition=args.condition,
        )
        _write_outputs(records, cfg, "tts", args.condition)
        return EXIT_OK

    ledger_path = args.ledger or str(Path(cfg.output_dir) / "mixtures" / "pse_test_ledger.jsonl")
    ledger = protocol.read_ledger(ledger_path)
    records = protocol.run_pse_eval(
        manifest, ledger, args.enhanced_root,
        mix_root=str(Path(cfg.output_dir) / "mixtures"),
        condition=args.condition,
        parallelism=cfg.parallelism,
        pesq_adapter=cfg.pesq_adapter,
    )
    _write_outputs(records, cfg, "pse", args.condition)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, cfg: RunConfig) -> int:
    records = []
    for path in args.records:
        records.extend(read_records(path))
    stats = report.summarize(records, interval_kind=cfg.interval_kind)
    rendered = report.render(stats, args.fmt)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


_COMMANDS = {
    "manifest": cmd_manifest,
    "mix": cmd_mix,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](args, cfg)
    except EvaluationGapsError as exc:
        for gap in exc.gaps:
            emit_diagnostic({"error": "evaluation_gap", **gap})
        emit_diagnostic({"error": "incomplete_inputs", "message": str(exc)})
        return EXIT_VALIDATION
    except (ConfigurationError, AdapterProtocolError, MetricValidationError) as exc:
        emit_diagnostic({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_CONFIGURATION
    except (FormatError, OSError) as exc:
        emit_diagnostic({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_IO
    except PsevalError as exc:
        emit_diagnostic({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
