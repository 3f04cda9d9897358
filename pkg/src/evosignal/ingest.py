"""Raw recording ingestion: loaders, resampling, windowing, synthesis.

Recordings arrive with irregular per-channel timestamps (consumer EEG
headsets trade a steady clock for battery life), so everything funnels
through a Fourier-based resample to a fixed rate before windowing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import resample as _fourier_resample

from .data import FeatureDataset, load_feature_csv, write_feature_csv  # re-exported
from .errors import (
    InvalidRecording,
    NyquistViolation,
    ParseError,
    SchemaError,
    SignalTooShort,
)

__all__ = [
    "RawRecording",
    "UniformSignal",
    "WindowedSignal",
    "SkippedEvent",
    "LoadReport",
    "resample",
    "make_windows",
    "load_mindbigdata",
    "load_feature_csv",
    "write_feature_csv",
    "load_recording_csv",
    "write_recording_csv",
    "synth_recording",
    "MUSE_CHANNELS",
    "MINDBIGDATA_CHANNELS",
]

MUSE_CHANNELS = ("TP9", "AF7", "AF8", "TP10")
MINDBIGDATA_CHANNELS = ("TP9", "FP1", "FP2", "TP10")

# MindBigData captures are two-second stimulus windows.
_MINDBIGDATA_CAPTURE_SECONDS = 2.0


@dataclass
class RawRecording:
    """Multichannel sample stream with per-sample timestamps.

    ``times[i]`` and ``values[i]`` belong to ``channels[i]``; timestamps
    are seconds, values microvolts. Channels may be sampled on different
    irregular clocks but must cover the same interval.
    """

    channels: list[str]
    times: list[np.ndarray]
    values: list[np.ndarray]
    label: str | None = None

    def __post_init__(self):
        self.channels = list(self.channels)
        self.times = [np.asarray(t, dtype=np.float64) for t in self.times]
        self.values = [np.asarray(v, dtype=np.float64) for v in self.values]

    def validate(self) -> None:
        if not (len(self.channels) == len(self.times) == len(self.values)):
            raise InvalidRecording("channels, times and values must align")
        periods = []
        for name, t, v in zip(self.channels, self.times, self.values):
            if len(t) < 2:
                raise InvalidRecording(f"channel {name} has fewer than 2 samples")
            if len(t) != len(v):
                raise InvalidRecording(f"channel {name}: timestamp/value length mismatch")
            if not np.all(np.diff(t) > 0):
                raise InvalidRecording(f"channel {name}: timestamps not strictly increasing")
            periods.append((t[-1] - t[0]) / (len(t) - 1))
        tol = max(periods)
        starts = [t[0] for t in self.times]
        ends = [t[-1] for t in self.times]
        if max(starts) - min(starts) > tol or max(ends) - min(ends) > tol:
            raise InvalidRecording("channels do not cover the same time interval")

    def duration(self) -> float:
        """Length of the interval common to all channels, in seconds."""
        return min(t[-1] for t in self.times) - max(t[0] for t in self.times)


@dataclass
class UniformSignal:
    """Fixed-rate multichannel signal; ``values`` is (n_channels, n_samples)."""

    channels: list[str]
    rate: float
    values: np.ndarray
    label: str | None = None

    def __post_init__(self):
        self.channels = list(self.channels)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.rate <= 0:
            raise InvalidRecording("rate must be positive")
        if self.values.ndim != 2 or self.values.shape[0] != len(self.channels):
            raise InvalidRecording("values must be (n_channels, n_samples)")

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass
class WindowedSignal:
    """Overlapping fixed-length slices of a UniformSignal.

    ``values`` is (n_windows, n_channels, window_samples); ``starts``
    holds each window's first sample index in the source signal.
    """

    source: UniformSignal
    window_len: float
    stride: float
    starts: np.ndarray
    values: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    def window(self, i: int) -> np.ndarray:
        return self.values[i]


def resample(rec: RawRecording, rate: float) -> UniformSignal:
    """Resample an irregular recording to a fixed rate.

    Each channel is interpolated with a cubic spline onto a dense uniform
    grid over the interval common to all channels, then taken down to the
    target rate in the frequency domain (which also discards any content
    above rate/2). Output length is floor(duration * rate).
    """
    if rate <= 0:
        raise InvalidRecording("target rate must be positive")
    rec.validate()
    start = max(t[0] for t in rec.times)
    end = min(t[-1] for t in rec.times)
    duration = end - start
    n_out = int(np.floor(duration * rate + 1e-9))
    if n_out < 2:
        raise InvalidRecording("recording too short for the requested rate")
    in_rate = max((len(t) - 1) / (t[-1] - t[0]) for t in rec.times)
    upsample = max(4, int(np.ceil(2.0 * in_rate / rate)))
    n_dense = upsample * n_out
    period = n_out / rate
    dense_t = start + np.arange(n_dense) * (period / n_dense)
    out = np.empty((len(rec.channels), n_out))
    for i, (t, v) in enumerate(zip(rec.times, rec.values)):
        keep = (dense_t >= t[0]) & (dense_t <= t[-1])
        dense = np.empty(n_dense)
        spline = CubicSpline(t, v)
        dense[keep] = spline(dense_t[keep])
        if not keep.all():  # clamp the (sub-sample) overhang instead of extrapolating
            dense[~keep] = np.where(dense_t[~keep] < t[0], v[0], v[-1])
        out[i] = _fourier_resample(dense, n_out)
    return UniformSignal(channels=rec.channels, rate=rate, values=out, label=rec.label)


def make_windows(sig: UniformSignal, window_len: float, stride: float) -> WindowedSignal:
    """Slice a uniform signal into overlapping windows from t=0.

    Windows have round(window_len*rate) samples and start every
    round(stride*rate) samples; a trailing partial window is dropped.
    """
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    if not 0 < stride <= window_len:
        raise ValueError("stride must be in (0, window_len]")
    w = int(round(window_len * sig.rate))
    s = int(round(stride * sig.rate))
    n = sig.n_samples
    if n < w:
        raise SignalTooShort(f"signal has {n} samples, window needs {w}")
    count = (n - w) // s + 1
    starts = np.arange(count) * s
    view = np.lib.stride_tricks.sliding_window_view(sig.values, w, axis=1)
    values = np.ascontiguousarray(view[:, starts, :].transpose(1, 0, 2))
    return WindowedSignal(source=sig, window_len=window_len, stride=stride,
                          starts=starts, values=values)


@dataclass
class SkippedEvent:
    event: int
    reason: str


@dataclass
class LoadReport:
    skipped: list[SkippedEvent] = field(default_factory=list)

    def skip(self, event: int, reason: str) -> None:
        self.skipped.append(SkippedEvent(event, reason))


def load_mindbigdata(path, device_filter: str = "MU", per_class_limit: int = 15,
                     seed: int = 0, report: LoadReport | None = None) -> list[RawRecording]:
    """Load open-DB lines into per-event recordings.

    Lines are tab-separated ``id, event, device, channel, code, size, data``
    with comma-separated amplitudes in ``data``. Only ``device_filter``
    records are read; events missing a channel (or with a code outside
    0-9) are skipped into ``report`` rather than failing the load. At most
    ``per_class_limit`` events per digit class are kept, sampled uniformly
    without replacement under ``seed``. Capture timestamps are synthesized
    uniformly over the two-second stimulus window.
    """
    path = Path(path)
    if report is None:
        report = LoadReport()
    wanted = list(MINDBIGDATA_CHANNELS)
    events: dict[int, dict[str, tuple[int, np.ndarray]]] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise ParseError(f"{path}: expected 7 tab-separated fields", line=line_no)
            try:
                event = int(fields[1])
                device = fields[2]
                channel = fields[3]
                code = int(fields[4])
                size = int(fields[5])
                data = np.asarray(fields[6].split(","), dtype=np.float64)
            except ValueError:
                raise ParseError(f"{path}: malformed field", line=line_no) from None
            if device != device_filter:
                continue
            if data.size != size or size < 2:
                raise ParseError(
                    f"{path}: declared size {size} but parsed {data.size} samples",
                    line=line_no,
                )
            events.setdefault(event, {})[channel] = (code, data)

    complete: dict[str, list[int]] = {}
    for event in sorted(events):
        channels = events[event]
        missing = [c for c in wanted if c not in channels]
        if missing:
            report.skip(event, f"missing channels: {','.join(missing)}")
            continue
        codes = {channels[c][0] for c in wanted}
        if len(codes) != 1:
            report.skip(event, "inconsistent class codes across channels")
            continue
        code = codes.pop()
        if not 0 <= code <= 9:
            report.skip(event, f"class code {code} outside 0-9")
            continue
        complete.setdefault(str(code), []).append(event)

    rng = np.random.default_rng(seed)
    recordings: list[RawRecording] = []
    for label in sorted(complete):
        pool = complete[label]
        take = min(per_class_limit, len(pool))
        chosen = sorted(rng.choice(len(pool), size=take, replace=False)) if take else []
        for j in chosen:
            event = pool[j]
            times, values = [], []
            for c in wanted:
                _, data = events[event][c]
                times.append(np.arange(data.size) * (_MINDBIGDATA_CAPTURE_SECONDS / data.size))
                values.append(data)
            recordings.append(RawRecording(channels=wanted, times=times, values=values,
                                           label=label))
    return recordings


def synth_recording(class_spec, duration: float, channels: int, seed: int = 0,
                    base_rate: float = 256.0, jitter: float = 0.3) -> list[RawRecording]:
    """Generate one labeled recording per class entry.

    ``class_spec`` is a list of ``(label, frequency_hz, amplitude,
    noise_std)``. Each recording is a sinusoid at the class frequency
    (phase-shifted per channel) plus Gaussian noise, sampled on jittered
    timestamps around ``base_rate``. Deterministic per seed.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if channels < 1:
        raise ValueError("need at least one channel")
    for label, freq, _amp, _noise in class_spec:
        if freq >= 100.0:
            raise NyquistViolation(f"class {label}: {freq} Hz is not below 100 Hz")
    rng = np.random.default_rng(seed)
    names = [f"ch{i}" for i in range(channels)]
    recordings = []
    for label, freq, amp, noise_std in class_spec:
        n = int(round(duration * base_rate)) + 1
        t = (np.arange(n) + jitter * rng.uniform(-1.0, 1.0, size=n)) / base_rate
        t[0] = 0.0
        t[-1] = duration
        times, values = [], []
        for c in range(channels):
            phase = 2.0 * np.pi * c / channels
            v = amp * np.sin(2.0 * np.pi * freq * t + phase)
            if noise_std > 0:
                v = v + rng.normal(0.0, noise_std, size=n)
            times.append(t.copy())
            values.append(v)
        recordings.append(RawRecording(channels=names, times=times, values=values,
                                       label=str(label)))
    return recordings


def load_recording_csv(path) -> RawRecording:
    """Load the generic recording CSV: columns ``timestamp,<ch...>,label``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        if len(header) < 3 or header[0] != "timestamp" or header[-1] != "label":
            raise SchemaError(f"{path}: header must be timestamp,<channels...>,label")
        channels = header[1:-1]
        times, rows, labels = [], [], []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: expected {len(header)} cells", line=line_no)
            try:
                times.append(float(record[0]))
                rows.append([float(x) for x in record[1:-1]])
            except ValueError:
                raise ParseError(f"{path}: non-numeric cell", line=line_no) from None
            labels.append(record[-1])
    if not rows:
        raise ParseError(f"{path}: no samples", line=2)
    label_set = set(labels)
    if len(label_set) != 1:
        raise ParseError(f"{path}: label column must be constant, saw {sorted(label_set)}")
    t = np.asarray(times)
    matrix = np.asarray(rows, dtype=np.float64).T
    return RawRecording(channels=channels,
                        times=[t.copy() for _ in channels],
                        values=[matrix[i] for i in range(len(channels))],
                        label=labels[0])


def write_recording_csv(rec: RawRecording, path) -> None:
    """Write the generic recording CSV; requires shared per-channel timestamps."""
    base = rec.times[0]
    for t in rec.times[1:]:
        if len(t) != len(base) or not np.array_equal(t, base):
            raise ValueError("generic CSV needs identical timestamps on all channels")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(rec.channels) + ["label"])
        label = "" if rec.label is None else str(rec.label)
        for i, t in enumerate(base):
            writer.writerow([repr(float(t))] + [repr(float(v[i])) for v in rec.values] + [label])
