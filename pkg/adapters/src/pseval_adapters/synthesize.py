"""Drive an external zero-shot TTS system through a shell contract.

Any TTS can plug in by accepting a command template with {enrollment}
{text_file} {out_dir}: one wav per text line must appear in out_dir as
utt_0000.wav, utt_0001.wav, ... The driver validates and normalizes the
outputs to 16 kHz mono.
"""

from __future__ import annotations

import shlex
import subprocess
from pathlib import Path

from .bridges import AdapterError
from .wavio import read_wav, write_wav

TARGET_RATE = 16000


def synthesize_batch(
    command_template: str,
    enrollment_wav: str,
    texts: list[str],
    out_dir: str,
    utterance_ids: list[str] | None = None,
) -> list[str]:
    """Run the TTS command and collect one wav per text.

    Returns the final wav paths (renamed to ``utterance_ids`` when given).
    """
    if not texts:
        return []
    if utterance_ids is not None and len(utterance_ids) != len(texts):
        raise AdapterError("utterance_ids and texts must align")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    text_file = out_path / "texts.txt"
    text_file.write_text("".join(line.replace("\n", " ") + "\n" for line in texts), encoding="utf-8")

    command = command_template.format(
        enrollment=shlex.quote(str(enrollment_wav)),
        text_file=shlex.quote(str(text_file)),
        out_dir=shlex.quote(str(out_path)),
    )
    proc = subprocess.run(command, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        raise AdapterError(
            f"TTS command failed with status {proc.returncode}: {proc.stderr.strip()[:500]}"
        )

    results = []
    for i in range(len(texts)):
        produced = out_path / f"utt_{i:04d}.wav"
        if not produced.is_file():
            raise AdapterError(f"TTS command produced no {produced.name}")
        samples, rate = read_wav(str(produced))
        if rate != TARGET_RATE:
            raise AdapterError(
                f"{produced.name}: TTS output at {rate} Hz; the contract requires {TARGET_RATE}"
            )
        final = produced
        if utterance_ids is not None:
            final = out_path / f"{utterance_ids[i]}.wav"
            write_wav(samples, rate, str(final), "float32")
            produced.unlink()
        results.append(str(final))
    return results
