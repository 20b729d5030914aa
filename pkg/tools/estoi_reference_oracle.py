"""Loop-based reference oracle for the extended intelligibility metric.

Development tool only: used once by make_estoi_fixtures.py to compute the
frozen fixture scores that tests/test_signal_metrics.py and the acceptance
suite assert against. Deliberately written as a straight, scalar-style
transcription of the published reference algorithm, independent of the
vectorized implementation in pseval.signal_metrics.

Operates on 10 kHz signals only (the metric's internal rate), so no
resampler is involved on either side of the comparison.
"""

from __future__ import annotations

import numpy as np

FS = 10000
N_FRAME = 256
K_FFT = 512
J_BANDS = 15
MIN_CF_HZ = 150.0
N_SEG = 30
DYN_RANGE_DB = 40.0


def hanning_matlab(n: int) -> np.ndarray:
    # MATLAB hanning(n): sin^2 without zero endpoints
    k = np.arange(1, n + 1)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n + 1)))


def thirdoct(fs: int, nfft: int, num_bands: int, mn: float) -> np.ndarray:
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    obm = np.zeros((num_bands, len(f)))
    for i in range(num_bands):
        f_low = mn * 2.0 ** ((2.0 * i - 1.0) / 6.0)
        f_high = mn * 2.0 ** ((2.0 * i + 1.0) / 6.0)
        # snap band edges to the nearest DFT bin
        lo_bin = int(np.argmin((f - f_low) ** 2))
        hi_bin = int(np.argmin((f - f_high) ** 2))
        for b in range(lo_bin, hi_bin):
            obm[i, b] = 1.0
    return obm


def remove_silent_frames(x: np.ndarray, y: np.ndarray, dyn_range: float, framelen: int, hop: int):
    w = hanning_matlab(framelen)
    frames = list(range(0, len(x) - framelen + 1, hop))
    energies = []
    for start in frames:
        seg = w * x[start : start + framelen]
        energies.append(20.0 * np.log10(np.linalg.norm(seg) + np.finfo(float).eps))
    max_energy = max(energies)
    keep = [i for i, e in enumerate(energies) if e > max_energy - dyn_range]
    if not keep:
        return np.zeros(0), np.zeros(0)
    out_len = (len(keep) - 1) * hop + framelen
    x_out = np.zeros(out_len)
    y_out = np.zeros(out_len)
    for j, i in enumerate(keep):
        start_in = frames[i]
        start_out = j * hop
        x_out[start_out : start_out + framelen] += w * x[start_in : start_in + framelen]
        y_out[start_out : start_out + framelen] += w * y[start_in : start_in + framelen]
    return x_out, y_out


def stdft(x: np.ndarray, framelen: int, hop: int, nfft: int) -> np.ndarray:
    w = hanning_matlab(framelen)
    starts = list(range(0, len(x) - framelen, hop))
    spec = np.zeros((len(starts), nfft // 2 + 1), dtype=complex)
    for m, start in enumerate(starts):
        spec[m, :] = np.fft.rfft(w * x[start : start + framelen], n=nfft)
    return spec.T  # bins x frames


def estoi_reference(x: np.ndarray, y: np.ndarray, fs: int) -> float:
    if fs != FS:
        raise ValueError("reference oracle expects 10 kHz input")
    if len(x) != len(y):
        raise ValueError("signals must have equal length")
    x, y = remove_silent_frames(x, y, DYN_RANGE_DB, N_FRAME, N_FRAME // 2)

    x_spec = stdft(x, N_FRAME, N_FRAME // 2, K_FFT)
    y_spec = stdft(y, N_FRAME, N_FRAME // 2, K_FFT)
    obm = thirdoct(FS, K_FFT, J_BANDS, MIN_CF_HZ)
    num_frames = x_spec.shape[1]
    X = np.zeros((J_BANDS, num_frames))
    Y = np.zeros((J_BANDS, num_frames))
    for m in range(num_frames):
        for j in range(J_BANDS):
            X[j, m] = np.sqrt(np.sum(obm[j, :] * np.abs(x_spec[:, m]) ** 2))
            Y[j, m] = np.sqrt(np.sum(obm[j, :] * np.abs(y_spec[:, m]) ** 2))

    if num_frames < N_SEG:
        raise ValueError("too few frames for a segment")

    d_sum = 0.0
    seg_count = 0
    for m in range(N_SEG, num_frames + 1):
        X_seg = X[:, m - N_SEG : m].copy()
        Y_seg = Y[:, m - N_SEG : m].copy()
        for j in range(J_BANDS):  # normalize rows
            X_seg[j, :] -= np.mean(X_seg[j, :])
            Y_seg[j, :] -= np.mean(Y_seg[j, :])
            nx, ny = np.linalg.norm(X_seg[j, :]), np.linalg.norm(Y_seg[j, :])
            if nx > 0:
                X_seg[j, :] /= nx
            if ny > 0:
                Y_seg[j, :] /= ny
        for n in range(N_SEG):  # normalize columns
            X_seg[:, n] -= np.mean(X_seg[:, n])
            Y_seg[:, n] -= np.mean(Y_seg[:, n])
            nx, ny = np.linalg.norm(X_seg[:, n]), np.linalg.norm(Y_seg[:, n])
            if nx > 0:
                X_seg[:, n] /= nx
            if ny > 0:
                Y_seg[:, n] /= ny
        d_sum += np.sum(X_seg * Y_seg) / N_SEG
        seg_count += 1
    return d_sum / seg_count
