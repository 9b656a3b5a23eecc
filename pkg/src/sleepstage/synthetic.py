"""Seeded synthetic data: ECG with known beat times, class-coded epoch sets,
and full record stores for exercising the pipeline end to end.

Every generator is deterministic given its seed.  The class-coded signals
give each stage a distinct spectral signature per channel plus an amplitude
boost on its "own" channel, so a small network can separate them quickly.
"""

from __future__ import annotations

import numpy as np

from sleepstage.records import (
    EPOCH_SECONDS,
    MODEL_INPUT_KINDS,
    N_STAGES,
    Channel,
    PsgRecord,
    save_record,
)

#: per-class tone frequency (Hz) for each model input channel; EOG rows stay
#: below the 25 Hz native Nyquist and EMG rows above the 15 Hz high-pass.
CLASS_FREQS = {
    "EEG1": (4.0, 8.0, 13.0, 20.0, 30.0),
    "EEG2": (5.0, 9.0, 14.0, 22.0, 32.0),
    "EOG_L": (2.0, 5.0, 8.0, 12.0, 18.0),
    "EOG_R": (2.5, 5.5, 9.0, 13.0, 19.0),
    "EMG": (18.0, 24.0, 30.0, 38.0, 46.0),
}
NATIVE_RATES = {"EEG1": 125, "EEG2": 125, "EOG_L": 50, "EOG_R": 50, "EMG": 125, "ECG": 125}


def qrs_pulse(rate: int, sigma_s: float = 0.02, half_width_s: float = 0.08) -> np.ndarray:
    """Zero-mean cardiac-shaped pulse (Ricker wavelet), peak amplitude 1."""
    n = int(round(half_width_s * rate))
    t = np.arange(-n, n + 1) / rate
    u = t / sigma_s
    return (1.0 - u * u) * np.exp(-0.5 * u * u)


def synthetic_ecg(
    duration_s: float,
    rate: int,
    bpm: float = 60.0,
    seed: int = 0,
    jitter_s: float = 0.0,
    noise_rms: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Periodic spike-train ECG; returns (signal, true beat times in seconds)."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate))
    x = np.zeros(n)
    pulse = qrs_pulse(rate)
    half = (len(pulse) - 1) // 2
    period = 60.0 / bpm
    beat_times = []
    t = period / 2
    while t < duration_s - period / 4:
        tj = t + (rng.uniform(-jitter_s, jitter_s) if jitter_s else 0.0)
        idx = int(round(tj * rate))
        lo, hi = idx - half, idx + half + 1
        if lo >= 0 and hi <= n:
            x[lo:hi] += pulse
            beat_times.append(idx / rate)
        t += period
    if noise_rms > 0:
        x += rng.normal(0.0, noise_rms, size=n)
    return x, np.asarray(beat_times)


def ecg_noise_rms_for_snr(signal: np.ndarray, snr_db: float) -> float:
    """Noise RMS that puts additive white noise at the requested SNR."""
    p_sig = float(np.mean(np.square(signal)))
    return float(np.sqrt(p_sig / (10.0 ** (snr_db / 10.0))))


def class_coded_epochs(
    n_epochs: int,
    seed: int = 0,
    rate: int = 125,
    noise_rms: float = 0.3,
    boost: float = 0.8,
) -> tuple[np.ndarray, np.ndarray]:
    """Build (X, y): X (n, 30 s * rate, 5) float32, labels cycling 0..4.

    Class c puts a tone at CLASS_FREQS[channel][c] on every channel and an
    extra amplitude boost on channel c.
    """
    rng = np.random.default_rng(seed)
    n_samples = EPOCH_SECONDS * rate
    t = np.arange(n_samples) / rate
    y = np.arange(n_epochs) % N_STAGES
    rng.shuffle(y)
    X = np.empty((n_epochs, n_samples, len(MODEL_INPUT_KINDS)), dtype=np.float32)
    for i, c in enumerate(y):
        for col, kind in enumerate(MODEL_INPUT_KINDS):
            f = CLASS_FREQS[kind][c]
            amp = 1.0 + (boost if col == c else 0.0)
            phase = rng.uniform(0, 2 * np.pi)
            sig = amp * np.sin(2 * np.pi * f * t + phase)
            sig += rng.normal(0.0, noise_rms, size=n_samples)
            X[i, :, col] = sig
    return X, y.astype(np.int64)


def synthetic_record(
    record_id: str,
    n_epochs: int,
    seed: int = 0,
    mains_amp: float = 0.5,
    mains_hz: float = 60.0,
    cardiac_amp: float = 0.4,
    noise_rms: float = 0.3,
) -> PsgRecord:
    """A full raw record at native rates with everything the pipeline handles:
    class-coded stage content, 60 Hz mains on EEG/EMG, an ECG channel, and a
    cardiac artifact leaked into the EEG channels.
    """
    rng = np.random.default_rng(seed)
    duration = n_epochs * EPOCH_SECONDS
    stages = np.tile(np.arange(N_STAGES), n_epochs // N_STAGES + 1)[:n_epochs]
    rng.shuffle(stages)

    ecg, beat_times = synthetic_ecg(
        duration, NATIVE_RATES["ECG"], bpm=60.0, seed=seed + 1, noise_rms=0.02
    )
    pulse125 = qrs_pulse(125)
    half = (len(pulse125) - 1) // 2

    channels: dict[str, Channel] = {}
    for kind in MODEL_INPUT_KINDS:
        r = NATIVE_RATES[kind]
        n = duration * r
        t = np.arange(n) / r
        sig = rng.normal(0.0, noise_rms, size=n)
        for i, c in enumerate(stages):
            sl = slice(i * EPOCH_SECONDS * r, (i + 1) * EPOCH_SECONDS * r)
            f = CLASS_FREQS[kind][c]
            amp = 1.0 + (0.8 if MODEL_INPUT_KINDS.index(kind) == c else 0.0)
            phase = rng.uniform(0, 2 * np.pi)
            sig[sl] += amp * np.sin(2 * np.pi * f * t[sl] + phase)
        if kind in ("EEG1", "EEG2", "EMG") and mains_amp:
            sig += mains_amp * np.sin(2 * np.pi * mains_hz * t + rng.uniform(0, 2 * np.pi))
        if kind in ("EEG1", "EEG2") and cardiac_amp and r == 125:
            for bt in beat_times:
                idx = int(round(bt * r))
                lo, hi = idx - half, idx + half + 1
                if lo >= 0 and hi <= n:
                    sig[lo:hi] += cardiac_amp * pulse125
        channels[kind] = Channel(r, sig.astype(np.float32))
    channels["ECG"] = Channel(NATIVE_RATES["ECG"], ecg.astype(np.float32), unit="mV")

    record = PsgRecord(record_id, channels, stages.astype(np.int64))
    record.validate()
    return record


def synthetic_store(
    root,
    record_ids: list[str],
    n_epochs: int,
    seed: int = 0,
    **kwargs,
) -> None:
    """Write one synthetic raw record per id under ``root``."""
    for i, rid in enumerate(record_ids):
        rec = synthetic_record(rid, n_epochs, seed=seed + 1000 * i, **kwargs)
        save_record(rec, f"{root}/{rid}")
