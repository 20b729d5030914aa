"""Challenge harness for TTS-augmented personalized speech enhancement.

Deterministic dataset manifesting, SNR-controlled mixture synthesis, native
SDR/SDRI/eSTOI/WER/SECS metrics, and statistical report generation, with
all neural-model inference isolated behind file-format adapters.
"""

__version__ = "0.1.0"
