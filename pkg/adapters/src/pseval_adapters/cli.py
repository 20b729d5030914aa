"""Adapter command line: every bridge as a subcommand.

The ``pesq`` subcommand implements the evaluation harness's external-metric
contract: it reads a reference<TAB>estimate manifest and prints one score
per line on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bridges import AdapterError, extract_embeddings, pesq_scores, predict_mos, transcribe
from .finetune import FinetuneConfig, finetune_pse, make_toy_checkpoint
from .synthesize import synthesize_batch


def _wav_list(args) -> list[str]:
    paths = []
    for item in args.wavs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(str(q) for q in p.rglob("*.wav")))
        else:
            paths.append(str(p))
    if not paths:
        raise AdapterError("no input wavs found")
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseval-adapters", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-embeddings", help="speaker embeddings -> EMB1 binary")
    p.add_argument("wavs", nargs="+", help="wav files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="speechbrain", choices=("speechbrain", "spectral"))

    p = sub.add_parser("transcribe", help="ASR hypotheses -> transcript JSON")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="whisper", choices=("whisper", "sidecar"))
    p.add_argument("--model", default="base", help="whisper model name")

    p = sub.add_parser("predict-mos", help="MOS predictions -> MetricRecord JSONL")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="utmos", choices=("utmos", "stub"))

    p = sub.add_parser("pesq", help="external-metric contract: manifest in, scores on stdout")
    p.add_argument("manifest", help="two-column file: reference_path<TAB>estimate_path")
    p.add_argument("--backend", default="pesq", choices=("pesq", "stub"))

    p = sub.add_parser("finetune", help="fine-tune the generalist on one speaker's ledger")
    p.add_argument("--generalist", required=True, help="generalist checkpoint path")
    p.add_argument("--ledger", required=True, help="fine-tune mixture ledger (JSONL)")
    p.add_argument("--mix-root", required=True, help="root the ledger paths are relative to")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", help="training-log JSONL path")
    p.add_argument("--size", default="tiny", choices=("medium", "small", "tiny"))
    p.add_argument("--learning-rate", type=float, default=1e-6)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--max-epochs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("make-toy-checkpoint", help="random-init generalist for desk-scale tests")
    p.add_argument("--size", default="tiny", choices=("medium", "small", "tiny"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synthesize", help="drive a zero-shot TTS through the shell contract")
    p.add_argument("--tts-command", required=True, dest="tts_command",
                   help="template with {enrollment} {text_file} {out_dir}")
    p.add_argument("--enrollment", required=True)
    p.add_argument("--texts", required=True, help="file with one sentence per line")
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract-embeddings":
            written, failures = extract_embeddings(_wav_list(args), args.out, backend=args.backend)
            for failure in failures:
                sys.stderr.write(json.dumps(failure, sort_keys=True) + "\n")
            print(f"wrote {len(written)} embeddings -> {args.out} ({len(failures)} failures)")
        elif args.command == "transcribe":
            transcripts = transcribe(_wav_list(args), args.out, backend=args.backend, model_name=args.model)
            print(f"wrote {len(transcripts)} hypotheses -> {args.out}")
        elif args.command == "predict-mos":
            records = predict_mos(_wav_list(args), args.out, backend=args.backend)
            print(f"wrote {len(records)} MOS records -> {args.out}")
        elif args.command == "pesq":
            pairs = []
            with open(args.manifest, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    ref_path, est_path = line.split("\t")
                    pairs.append((ref_path, est_path))
            for score in pesq_scores(pairs, backend=args.backend):
                print(f"{score:.6f}")
        elif args.command == "finetune":
            cfg = FinetuneConfig(
                model_size=args.size,
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                early_stop_patience=args.patience,
                max_epochs=args.max_epochs,
                seed=args.seed,
            )
            result = finetune_pse(
                args.generalist, args.ledger, args.mix_root, cfg, args.out, log_path=args.log
            )
            print(
                f"fine-tuned {args.size}: {result.epochs_run} epochs, "
                f"best val loss {result.best_val_loss:.6f} -> {args.out}"
            )
        elif args.command == "make-toy-checkpoint":
            make_toy_checkpoint(args.size, args.seed, args.out)
            print(f"wrote toy {args.size} checkpoint -> {args.out}")
        elif args.command == "synthesize":
            texts = [
                line.strip()
                for line in Path(args.texts).read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            wavs = synthesize_batch(args.tts_command, args.enrollment, texts, args.out_dir)
            print(f"synthesized {len(wavs)} utterances -> {args.out_dir}")
        return 0
    except AdapterError as exc:
        sys.stderr.write(json.dumps({"error": "adapter", "message": str(exc)}) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
