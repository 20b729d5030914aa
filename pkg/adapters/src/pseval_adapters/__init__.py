"""Model bridges and the fine-tune runner for the evaluation harness.

Everything here talks to the harness through files: EMB1 embedding
binaries, transcript JSON, MetricRecord JSONL, the PESQ stdout contract,
and fine-tune mixture ledgers.
"""

__version__ = "0.1.0"
