"""From a WAV file to log mel-filterbank features.

Frames of 25 ms every 10 ms, Hann window, power spectrum, 26 triangular
filters spaced evenly on the mel scale, natural log with a 1e-10 floor.
"""
import tempfile
from pathlib import Path

import numpy as np

from crnn.data import MelConfig, log_mel, mel_filterbank, read_wav, write_wav

rate = 16000
t = np.arange(rate) / rate
# one second that starts as a 250 Hz tone and ends as a 2500 Hz tone
samples = 0.5 * np.sin(2 * np.pi * 250.0 * t)
samples[rate // 2:] = 0.5 * np.sin(2 * np.pi * 2500.0 * t[rate // 2:])

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sweep.wav"
    write_wav(path, samples, rate)
    loaded, rate2 = read_wav(path)
print(f"round trip: {len(loaded)} samples at {rate2} Hz, "
      f"max abs error {np.max(np.abs(loaded - samples)):.2e}")

cfg = MelConfig(sample_rate=rate)
feats = log_mel(loaded, cfg)
print(f"features: {feats.shape[0]} filters x {feats.shape[1]} frames")

fb = mel_filterbank(cfg)
centers = np.array([np.argmax(row) for row in fb]) * rate / cfg.fft_size
first = int(np.argmax(feats[:, :40].mean(axis=1)))
second = int(np.argmax(feats[:, 60:].mean(axis=1)))
print(f"hottest filter, first half : {first:2d} (~{centers[first]:.0f} Hz)")
print(f"hottest filter, second half: {second:2d} (~{centers[second]:.0f} Hz)")

print("\ncoarse spectrogram (filter x time, 10-frame bins, * above median):")
bins = feats[:, :90].reshape(26, 9, 10).mean(axis=2)
cut = np.median(bins)
for row in range(25, -1, -5):
    line = "".join("*" if bins[row, b] > cut else "." for b in range(9))
    print(f"filter {row:2d} |{line}|")
