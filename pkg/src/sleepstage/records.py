"""Recording ingestion, resampling, normalization statistics, and epoching.

A recording lives in its own directory:

* ``meta``   -- text header: record id, epoch length, channel table
  (``channel <KIND> <rate_hz> <unit>`` lines).
* ``<KIND>.raw`` -- raw little-endian 32-bit floats, one file per channel.
* ``stages`` -- one integer stage code (0..4) per 30 s epoch, one per line.

Stage encoding is fixed: W=0, N1=1, N2=2, N3=3, REM=4.  The model input
channel order is fixed as (EEG1, EEG2, EOG_L, EOG_R, EMG); ECG is carried
only for cardiac-artifact removal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from sleepstage.errors import DataError

EPOCH_SECONDS = 30
TARGET_RATE = 125
EPOCH_SAMPLES = EPOCH_SECONDS * TARGET_RATE  # 3750

#: Channel kinds the network consumes, in fixed column order.
MODEL_INPUT_KINDS = ("EEG1", "EEG2", "EOG_L", "EOG_R", "EMG")
#: All channel kinds a record may carry; ECG is auxiliary.
CHANNEL_KINDS = MODEL_INPUT_KINDS + ("ECG",)


class StageLabel(IntEnum):
    """The five sleep stages with their stable integer encoding."""

    W = 0
    N1 = 1
    N2 = 2
    N3 = 3
    REM = 4


STAGE_NAMES = tuple(s.name for s in StageLabel)
N_STAGES = len(StageLabel)


@dataclass
class Channel:
    """One recorded signal: sample rate in Hz, samples, physical unit tag."""

    rate: int
    samples: np.ndarray
    unit: str = "uV"

    @property
    def seconds(self) -> float:
        return len(self.samples) / self.rate


@dataclass
class PsgRecord:
    """A multi-channel recording with per-epoch stage annotations."""

    record_id: str
    channels: dict[str, Channel]
    stages: np.ndarray  # int array, one stage code per 30 s epoch

    @property
    def n_epochs(self) -> int:
        return len(self.stages)

    def validate(self) -> None:
        """Check channel-duration equality and annotation alignment."""
        durations = {k: c.seconds for k, c in self.channels.items()}
        if len(set(durations.values())) > 1:
            raise DataError(
                f"record {self.record_id}: length mismatch between channels "
                f"({durations})"
            )
        seconds = next(iter(durations.values())) if durations else 0.0
        if seconds != self.n_epochs * EPOCH_SECONDS:
            raise DataError(
                f"record {self.record_id}: length mismatch between channels "
                f"({seconds:g} s) and annotations ({self.n_epochs} epochs x "
                f"{EPOCH_SECONDS} s)"
            )
        bad = [int(s) for s in self.stages if not 0 <= int(s) < N_STAGES]
        if bad:
            raise DataError(
                f"record {self.record_id}: bad annotation (stage codes {bad[:5]})"
            )


@dataclass
class EpochTensor:
    """One 30 s network input sample of shape (3750, 5).

    Columns follow MODEL_INPUT_KINDS.  ``source`` identifies the record and
    epoch index the sample was cut from.
    """

    values: np.ndarray
    label: StageLabel | None = None
    source: tuple[str, int] = ("", -1)


@dataclass
class NormalizationStats:
    """Per-channel mean/std pooled over the training corpus."""

    stats: dict[str, tuple[float, float]] = field(default_factory=dict)

    def mean_std(self, kind: str) -> tuple[float, float]:
        if kind not in self.stats:
            raise DataError(f"channel absent from normalization stats: {kind}")
        return self.stats[kind]

    def save(self, path: str | Path) -> None:
        # 9 significant digits => %.8e
        lines = [f"{k} {m:.8e} {s:.8e}\n" for k, (m, s) in self.stats.items()]
        Path(path).write_text("".join(lines))

    @classmethod
    def load(cls, path: str | Path) -> "NormalizationStats":
        stats = {}
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            kind, mean, std = line.split()
            stats[kind] = (float(mean), float(std))
        return cls(stats)


def load_record(path: str | Path) -> PsgRecord:
    """Load a recording from its directory container.

    Raises DataError for a missing channel file, a duration mismatch
    between channels, or an out-of-range stage code.
    """
    path = Path(path)
    meta_path = path / "meta"
    if not meta_path.exists():
        raise DataError(f"no meta file in record container {path}")

    record_id = path.name
    declared: list[tuple[str, int, str]] = []
    for line in meta_path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "id":
            record_id = parts[1]
        elif parts[0] == "epoch_seconds":
            if int(parts[1]) != EPOCH_SECONDS:
                raise DataError(
                    f"record {record_id}: unsupported epoch length {parts[1]} s"
                )
        elif parts[0] == "channel":
            kind, rate, unit = parts[1], int(parts[2]), parts[3]
            if kind not in CHANNEL_KINDS:
                raise DataError(f"record {record_id}: unknown channel kind {kind}")
            declared.append((kind, rate, unit))

    channels: dict[str, Channel] = {}
    for kind, rate, unit in declared:
        raw = path / f"{kind}.raw"
        if not raw.exists():
            raise DataError(f"record {record_id}: channel absent: {kind}")
        samples = np.fromfile(raw, dtype="<f4")
        channels[kind] = Channel(rate=rate, samples=samples, unit=unit)

    stages_path = path / "stages"
    if not stages_path.exists():
        raise DataError(f"record {record_id}: no stages file")
    codes = []
    for i, line in enumerate(stages_path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            code = int(line)
        except ValueError:
            raise DataError(f"record {record_id}: bad annotation at line {i}: {line!r}")
        if not 0 <= code < N_STAGES:
            raise DataError(f"record {record_id}: bad annotation at line {i}: {code}")
        codes.append(code)

    record = PsgRecord(record_id, channels, np.asarray(codes, dtype=np.int64))
    record.validate()
    return record


def save_record(record: PsgRecord, path: str | Path) -> None:
    """Write a recording in the directory container format (bit-exact floats)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = [f"id {record.record_id}\n", f"epoch_seconds {EPOCH_SECONDS}\n"]
    for kind in CHANNEL_KINDS:
        if kind not in record.channels:
            continue
        ch = record.channels[kind]
        lines.append(f"channel {kind} {ch.rate} {ch.unit}\n")
        ch.samples.astype("<f4").tofile(path / f"{kind}.raw")
    (path / "meta").write_text("".join(lines))
    (path / "stages").write_text(
        "".join(f"{int(s)}\n" for s in record.stages)
    )


def resample(signal: np.ndarray, from_rate: int, to_rate: int) -> np.ndarray:
    """Polyphase rational upsampling from ``from_rate`` to ``to_rate`` Hz.

    Only upsampling is supported; for 50 -> 125 Hz this is the up-5,
    low-pass, down-2 polyphase path.  Content below ~0.8x the original
    Nyquist passes unchanged; the transition band hugs the original
    Nyquist.  Output length is input length * to_rate / from_rate, which
    must be an integer.
    """
    if from_rate > to_rate:
        raise DataError(f"downsampling forbidden ({from_rate} -> {to_rate} Hz)")
    if from_rate == to_rate:
        return np.asarray(signal, dtype=np.float64).copy()
    g = math.gcd(int(to_rate), int(from_rate))
    up, down = to_rate // g, from_rate // g
    if (len(signal) * up) % down != 0:
        raise DataError(
            f"incompatible rates: {len(signal)} samples at {from_rate} Hz do "
            f"not map to a whole number of samples at {to_rate} Hz"
        )
    # mean padding keeps constants exact and avoids edge dips
    return resample_poly(np.asarray(signal, dtype=np.float64), up, down, padtype="mean")


def pooled_mean_std(chunks: list[np.ndarray]) -> tuple[float, float]:
    """Pooled mean and population std over all samples of all chunks.

    Two deterministic passes with float64 accumulation in a fixed order, so
    repeated runs produce bit-identical statistics.
    """
    total = 0
    acc = 0.0
    for c in chunks:
        acc += float(np.sum(c, dtype=np.float64))
        total += len(c)
    if total == 0:
        raise DataError("degenerate channel: no samples")
    mean = acc / total
    sq = 0.0
    for c in chunks:
        d = np.asarray(c, dtype=np.float64) - mean
        sq += float(np.sum(d * d, dtype=np.float64))
    return mean, math.sqrt(sq / total)


def compute_norm_stats(records: list[PsgRecord]) -> NormalizationStats:
    """Pool per-channel mean/std over every sample across training records.

    Records are processed in record-id order so the result is independent
    of input ordering.  Raises DataError for an empty set or a zero-variance
    channel.
    """
    if not records:
        raise DataError("cannot compute normalization stats from an empty set")
    ordered = sorted(records, key=lambda r: r.record_id)
    stats = {}
    for kind in MODEL_INPUT_KINDS:
        chunks = []
        for rec in ordered:
            if kind not in rec.channels:
                raise DataError(f"record {rec.record_id}: channel absent: {kind}")
            chunks.append(rec.channels[kind].samples)
        mean, std = pooled_mean_std(chunks)
        if std <= 0.0:
            raise DataError(f"degenerate channel: {kind} has zero variance")
        stats[kind] = (mean, std)
    return NormalizationStats(stats)


def normalize(epoch: EpochTensor, stats: NormalizationStats) -> EpochTensor:
    """Return a new epoch with each column centered/scaled by its channel stats."""
    values = np.asarray(epoch.values, dtype=np.float64).copy()
    for col, kind in enumerate(MODEL_INPUT_KINDS):
        mean, std = stats.mean_std(kind)
        values[:, col] = (values[:, col] - mean) / std
    return EpochTensor(values.astype(np.float32), epoch.label, epoch.source)


def cut_epochs(
    record: PsgRecord, stats: NormalizationStats | None
) -> list[EpochTensor]:
    """Cut one normalized EpochTensor per annotation, in temporal order.

    Channels must already be at the 125 Hz target rate.  Pass ``stats=None``
    to skip normalization (raw epochs partition the channels exactly).
    """
    for kind in MODEL_INPUT_KINDS:
        if kind not in record.channels:
            raise DataError(f"record {record.record_id}: channel absent: {kind}")
        ch = record.channels[kind]
        if ch.rate != TARGET_RATE:
            raise DataError(
                f"record {record.record_id}: channel {kind} at {ch.rate} Hz, "
                f"expected {TARGET_RATE} Hz (resample first)"
            )
    record.validate()
    epochs = []
    for i, code in enumerate(record.stages):
        sl = slice(i * EPOCH_SAMPLES, (i + 1) * EPOCH_SAMPLES)
        cols = [record.channels[k].samples[sl] for k in MODEL_INPUT_KINDS]
        values = np.stack(cols, axis=1).astype(np.float32)
        epoch = EpochTensor(values, StageLabel(int(code)), (record.record_id, i))
        if stats is not None:
            epoch = normalize(epoch, stats)
        epochs.append(epoch)
    return epochs


def stack_epochs(epochs: list[EpochTensor]) -> tuple[np.ndarray, np.ndarray]:
    """Stack epochs into (X, y) arrays: X (n, 3750, 5) float32, y (n,) int64."""
    X = np.stack([e.values for e in epochs]).astype(np.float32)
    y = np.asarray(
        [-1 if e.label is None else int(e.label) for e in epochs], dtype=np.int64
    )
    return X, y
