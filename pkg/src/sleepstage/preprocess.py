"""Noise reduction and cardiac-artifact removal ahead of epoching.

The chain applied to a raw record, in order:

1. mains notch (60 Hz biquad, zero phase) on EEG and EMG at native rate,
2. 15 Hz high-pass (4th-order Butterworth, zero phase) on EMG,
3. polyphase upsampling of every channel to 125 Hz,
4. QRS detection on the ECG, signal-quality screening, and subtraction of a
   running beat-locked template from EEG/EOG/EMG inside quality intervals.

The QRS detector is a derivative / squaring / moving-window-integration
chain with an adaptive threshold and a 0.2 s refractory period
(Pan-Tompkins style).  All filters are zero-phase and length preserving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt, find_peaks, iirnotch

from sleepstage.errors import ConfigError, DataError
from sleepstage.records import MODEL_INPUT_KINDS, TARGET_RATE, Channel, PsgRecord, resample


@dataclass
class FilterSpec:
    """Parameters of one noise filter.

    kind "notch": ``freq`` is the center frequency, ``q`` the quality factor.
    kind "highpass": ``freq`` is the cutoff, ``order`` the Butterworth order.
    """

    kind: str
    freq: float
    q: float = 30.0
    order: int = 4


@dataclass
class BeatSeries:
    """Detected heartbeat positions (sample indices) on the ECG channel.

    detect_qrs guarantees strictly increasing indices with gaps of at least
    0.2 s; hand-built series only need to be increasing.
    """

    indices: np.ndarray
    rate: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise DataError("beat indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def times(self) -> np.ndarray:
        return self.indices / self.rate


@dataclass
class QualityMask:
    """Per-sample boolean marking intervals safe for adaptive filtering."""

    samples: np.ndarray
    window_seconds: float = 10.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=bool)

    def fraction_true(self) -> float:
        return float(np.mean(self.samples)) if len(self.samples) else 0.0


@dataclass
class PreprocessConfig:
    """Every preprocessing knob, with the pipeline defaults."""

    notch_freq: float = 60.0
    notch_q: float = 30.0
    notch_kinds: tuple[str, ...] = ("EEG1", "EEG2", "EMG")
    emg_highpass_hz: float = 15.0
    emg_highpass_order: int = 4
    target_rate: int = TARGET_RATE
    qrs_refractory_s: float = 0.2
    quality_window_s: float = 10.0
    quality_min_bpm: float = 30.0
    quality_max_bpm: float = 180.0
    quality_max_cv: float = 0.5
    template_pre_s: float = 0.2
    template_post_s: float = 0.4
    template_update: float = 0.9
    artifact_kinds: tuple[str, ...] = field(
        default_factory=lambda: MODEL_INPUT_KINDS
    )


def apply_notch(signal: np.ndarray, rate: int, spec: FilterSpec) -> np.ndarray:
    """Attenuate the mains component with a zero-phase biquad notch.

    Requires rate > 2x the notch frequency's applicability bound (120 Hz for
    the 60 Hz default): the low-rate channels do not carry the interference.
    """
    if rate <= 2 * spec.freq:
        raise ConfigError(
            f"notch not applicable at {rate} Hz (center {spec.freq} Hz)"
        )
    b, a = iirnotch(spec.freq, spec.q, fs=rate)
    return filtfilt(b, a, np.asarray(signal, dtype=np.float64))


def apply_highpass(signal: np.ndarray, rate: int, spec: FilterSpec) -> np.ndarray:
    """Remove DC and sub-cutoff energy with a zero-phase Butterworth high-pass."""
    if spec.freq >= rate / 2:
        raise ConfigError(
            f"invalid cutoff {spec.freq} Hz at sample rate {rate} Hz"
        )
    b, a = butter(spec.order, spec.freq, btype="highpass", fs=rate)
    return filtfilt(b, a, np.asarray(signal, dtype=np.float64))


def _integrated_envelope(ecg: np.ndarray, rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Band-pass, differentiate, square, and moving-window integrate the ECG."""
    x = np.asarray(ecg, dtype=np.float64)
    # 5-15 Hz band isolates QRS energy before the derivative stage
    b, a = butter(2, [5.0, 15.0], btype="bandpass", fs=rate)
    bp = filtfilt(b, a, x)
    deriv = np.gradient(bp)
    sq = deriv * deriv
    win = max(1, int(round(0.15 * rate)))
    kernel = np.ones(win) / win
    mwi = np.convolve(sq, kernel, mode="same")
    return mwi, bp


def detect_qrs(ecg: np.ndarray, rate: int, refractory_s: float = 0.2) -> BeatSeries:
    """Locate QRS complexes with an adaptive-threshold integration detector.

    Returns one index near each beat, strictly increasing, no two closer
    than the refractory period.  An empty series is a valid result for
    flat or beat-free signals.
    """
    ecg = np.asarray(ecg, dtype=np.float64)
    if len(ecg) < 2 * rate or not np.any(ecg):
        return BeatSeries(np.empty(0, dtype=np.int64), rate)

    mwi, bp = _integrated_envelope(ecg, rate)
    distance = max(1, int(round(refractory_s * rate)))
    peaks, _ = find_peaks(mwi, distance=distance)
    if len(peaks) == 0:
        return BeatSeries(np.empty(0, dtype=np.int64), rate)

    # classic running signal/noise peak estimates
    spki = float(np.max(mwi[: 2 * rate]))
    npki = float(np.mean(mwi[: 2 * rate]))
    beats = []
    refine = max(1, int(round(0.1 * rate)))
    for p in peaks:
        threshold = npki + 0.25 * (spki - npki)
        if mwi[p] > threshold:
            lo, hi = max(0, p - refine), min(len(ecg), p + refine + 1)
            r = lo + int(np.argmax(np.abs(bp[lo:hi])))
            if not beats or r - beats[-1] >= distance:
                beats.append(r)
                spki = 0.125 * mwi[p] + 0.875 * spki
            # peaks that refine onto an already-claimed beat still count
            # as signal, not noise, so leave the estimates alone otherwise
        else:
            npki = 0.125 * mwi[p] + 0.875 * npki
    return BeatSeries(np.asarray(beats, dtype=np.int64), rate)


def assess_quality(
    ecg: np.ndarray,
    beats: BeatSeries,
    rate: int,
    window_s: float = 10.0,
    min_bpm: float = 30.0,
    max_bpm: float = 180.0,
    max_cv: float = 0.5,
) -> QualityMask:
    """Mark windows whose detected rhythm is physiologically plausible.

    A window is safe iff the estimated rate lies in [min_bpm, max_bpm] and
    the inter-beat-interval coefficient of variation is below max_cv.
    The verdict is expanded to a per-sample mask covering the whole ECG.
    """
    n = len(ecg)
    mask = np.zeros(n, dtype=bool)
    win = int(round(window_s * rate))
    times = beats.indices
    for start in range(0, n, win):
        end = min(start + win, n)
        duration = (end - start) / rate
        in_win = times[(times >= start) & (times < end)]
        bpm = len(in_win) / duration * 60.0 if duration > 0 else 0.0
        ok = min_bpm <= bpm <= max_bpm
        if ok and len(in_win) >= 3:
            ibis = np.diff(in_win) / rate
            cv = float(np.std(ibis) / np.mean(ibis))
            ok = cv < max_cv
        elif ok:
            ok = False  # too few beats to judge rhythm regularity
        mask[start:end] = ok
    return QualityMask(mask, window_s)


def remove_ecg_artifact(
    channel: np.ndarray,
    beats: BeatSeries,
    mask: QualityMask,
    rate: int,
    pre_s: float = 0.2,
    post_s: float = 0.4,
    update: float = 0.9,
) -> np.ndarray:
    """Subtract a running beat-locked template inside quality intervals.

    For each beat falling in a masked-true region, the current template is
    subtracted from the window (-pre_s, +post_s) around the beat (only at
    masked-true samples), then the template is updated from the original
    window: template <- update * template + (1 - update) * window.  Samples
    outside masked-true intervals are returned unchanged; an empty beat
    series makes this the identity.
    """
    x = np.asarray(channel, dtype=np.float64)
    if len(mask.samples) != len(x):
        raise DataError("channel and quality mask are not time-aligned")
    out = x.copy()
    if len(beats) == 0:
        return out
    pre = int(round(pre_s * rate))
    post = int(round(post_s * rate))
    template = np.zeros(pre + post + 1, dtype=np.float64)
    for b in beats.indices:
        lo, hi = b - pre, b + post + 1
        if lo < 0 or hi > len(x):
            continue  # partial windows at the edges are left untouched
        if not mask.samples[b]:
            continue
        window = x[lo:hi]
        apply_at = mask.samples[lo:hi]
        out[lo:hi][apply_at] -= template[apply_at]
        template = update * template + (1.0 - update) * window
    return out


def preprocess_record(record: PsgRecord, cfg: PreprocessConfig) -> PsgRecord:
    """Run the full filtering chain on one record, returning a new record.

    Order: notch/high-pass at native rates, upsample everything to the
    target rate, then QRS-locked artifact removal (skipped when the record
    carries no ECG).  Stage annotations pass through unchanged.
    """
    filtered: dict[str, np.ndarray] = {}
    units: dict[str, str] = {}
    for kind, ch in record.channels.items():
        sig = np.asarray(ch.samples, dtype=np.float64)
        if kind in cfg.notch_kinds:
            sig = apply_notch(sig, ch.rate, FilterSpec("notch", cfg.notch_freq, q=cfg.notch_q))
        if kind == "EMG":
            sig = apply_highpass(
                sig, ch.rate, FilterSpec("highpass", cfg.emg_highpass_hz, order=cfg.emg_highpass_order)
            )
        filtered[kind] = resample(sig, ch.rate, cfg.target_rate)
        units[kind] = ch.unit

    if "ECG" in filtered:
        ecg = filtered["ECG"]
        beats = detect_qrs(ecg, cfg.target_rate, cfg.qrs_refractory_s)
        mask = assess_quality(
            ecg, beats, cfg.target_rate, cfg.quality_window_s,
            cfg.quality_min_bpm, cfg.quality_max_bpm, cfg.quality_max_cv,
        )
        for kind in cfg.artifact_kinds:
            if kind in filtered and kind != "ECG":
                filtered[kind] = remove_ecg_artifact(
                    filtered[kind], beats, mask, cfg.target_rate,
                    cfg.template_pre_s, cfg.template_post_s, cfg.template_update,
                )

    channels = {
        kind: Channel(cfg.target_rate, sig.astype(np.float32), units[kind])
        for kind, sig in filtered.items()
    }
    out = PsgRecord(record.record_id, channels, record.stages.copy())
    out.validate()
    return out
