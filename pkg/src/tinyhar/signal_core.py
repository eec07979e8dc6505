"""Raw 6-axis signal handling: cleansing, decimation, peaks, windowing.

Channel order everywhere is (AccX, AccY, AccZ, GyrX, GyrY, GyrZ).
Accelerometer full scale is +-8 g, gyroscope full scale +-2000 dps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyRecording,
    FullyTrimmed,
    InvalidArgument,
    NoPeaksFound,
)

CHANNELS = ("ACC_X", "ACC_Y", "ACC_Z", "GYRO_X", "GYRO_Y", "GYRO_Z")
N_CHANNELS = 6
ACC_FULL_SCALE = 8.0
GYRO_FULL_SCALE = 2000.0
CHANNEL_FULL_SCALE = np.array([ACC_FULL_SCALE] * 3 + [GYRO_FULL_SCALE] * 3)


@dataclass(frozen=True)
class Recording:
    """Ordered 6-channel IMU sample block with timestamps.

    ``data`` is an (n, 6) float array; ``t`` holds seconds since the start
    of the recording, strictly increasing at roughly 1/rate_hz spacing.
    """

    t: np.ndarray
    data: np.ndarray
    rate_hz: float
    label: Optional[str] = None
    source_id: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[1] != N_CHANNELS:
            raise InvalidArgument(f"expected (n, 6) data, got {data.shape}")
        if len(t) != len(data):
            raise InvalidArgument("timestamp/data length mismatch")

    def __len__(self):
        return len(self.data)

    @property
    def duration_s(self) -> float:
        return len(self) / self.rate_hz


@dataclass(frozen=True)
class Window:
    """Fixed-length sample block ready for featurization."""

    data: np.ndarray  # (window_len, 6)
    rate_hz: float
    label: Optional[str] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[1] != N_CHANNELS:
            raise InvalidArgument(f"expected (n, 6) window, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidArgument("window contains non-finite values")

    def __len__(self):
        return len(self.data)


@dataclass(frozen=True)
class CleansePolicy:
    outlier_sigma: float = 4.0
    trim_rms_window_s: float = 0.5
    trim_rms_ratio: float = 0.1

    def __post_init__(self):
        if self.outlier_sigma <= 0:
            raise InvalidArgument("outlier_sigma must be positive")
        if not 0 < self.trim_rms_ratio < 1:
            raise InvalidArgument("trim_rms_ratio must be in (0, 1)")


@dataclass(frozen=True)
class Trimming:
    """Edge segment removed by cleansing, kept for the Unclassified pool."""

    samples: Recording
    origin_label: Optional[str]

    def __post_init__(self):
        if len(self.samples) == 0:
            raise InvalidArgument("empty trimming")


def decimate(rec: Recording, factor: int, mode: str = "mean") -> Recording:
    """Downsample by an integer factor using non-overlapping block means.

    ``mode="pick"`` keeps every factor-th sample instead (ablation path).
    """
    if len(rec) == 0:
        raise EmptyRecording("cannot decimate an empty recording")
    if factor < 1:
        raise InvalidArgument("factor must be >= 1")
    if factor == 1:
        return rec
    n_out = len(rec) // factor
    if mode == "mean":
        blocks = rec.data[: n_out * factor].reshape(n_out, factor, N_CHANNELS)
        data = blocks.mean(axis=1)
    elif mode == "pick":
        data = rec.data[: n_out * factor : factor].copy()
    else:
        raise InvalidArgument(f"unknown decimation mode {mode!r}")
    t = rec.t[: n_out * factor : factor].copy()
    return Recording(t, data, rec.rate_hz / factor, rec.label, rec.source_id)


def _local_maxima(series: np.ndarray) -> np.ndarray:
    interior = np.arange(1, len(series) - 1)
    if len(interior) == 0:
        return np.empty(0, dtype=int)
    mask = (series[interior] > series[interior - 1]) & (
        series[interior] > series[interior + 1]
    )
    return interior[mask]


def _prominence(series: np.ndarray, idx: int) -> float:
    h = series[idx]
    left = series[:idx]
    higher = np.nonzero(left > h)[0]
    lo = higher[-1] + 1 if len(higher) else 0
    left_min = series[lo : idx + 1].min()
    right = series[idx + 1 :]
    higher = np.nonzero(right > h)[0]
    hi = idx + 1 + higher[0] if len(higher) else len(series)
    right_min = series[idx:hi].min()
    return h - max(left_min, right_min)


def detect_major_peaks(
    series: Sequence[float], min_prominence: float, min_distance: int
) -> List[int]:
    """Indices of local maxima with sufficient prominence, spaced apart.

    When two qualifying peaks fall within ``min_distance`` samples, the
    higher one wins (greedy by height, ties to the earlier index).
    """
    series = np.asarray(series, dtype=float)
    if min_distance < 1:
        raise InvalidArgument("min_distance must be >= 1")
    if not np.all(np.isfinite(series)):
        raise InvalidArgument("series must be finite")
    candidates = [
        i for i in _local_maxima(series) if _prominence(series, i) >= min_prominence
    ]
    kept: List[int] = []
    for i in sorted(candidates, key=lambda i: (-series[i], i)):
        if all(abs(i - j) >= min_distance for j in kept):
            kept.append(i)
    return sorted(kept)


def default_min_prominence(series: np.ndarray) -> float:
    return 0.5 * float(np.std(series))


DEFAULT_MIN_DISTANCE = 6  # samples at 26 Hz


def estimate_window_len(recs: Sequence[Recording], channel: int = 2) -> int:
    """Window length (samples) from the mean interval between major peaks.

    Averages the mean consecutive-peak spacing over all recordings that
    contribute at least two peaks on the selected channel.
    """
    intervals = []
    for rec in recs:
        series = rec.data[:, channel]
        peaks = detect_major_peaks(
            series, default_min_prominence(series), DEFAULT_MIN_DISTANCE
        )
        if len(peaks) >= 2:
            intervals.append(float(np.mean(np.diff(peaks))))
    if not intervals:
        raise NoPeaksFound("no recording yielded two major peaks")
    return int(round(float(np.mean(intervals))))


def _rolling_rms(values: np.ndarray, width: int) -> np.ndarray:
    """Centered rolling RMS with shrinking windows at the edges."""
    sq = values**2
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    n = len(values)
    half = width // 2
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    return np.sqrt((csum[hi] - csum[lo]) / (hi - lo))


def cleanse(
    rec: Recording, policy: CleansePolicy = CleansePolicy()
) -> Tuple[Recording, List[Trimming]]:
    """Clip per-channel outliers and trim quiet edges.

    Outliers beyond ``outlier_sigma`` standard deviations are clipped to the
    sigma bound (not deleted, so window alignment survives). Leading and
    trailing stretches whose rolling RMS falls below ``trim_rms_ratio`` of
    the recording's median rolling RMS are cut off and returned as
    Trimmings. Timestamps of the surviving segment are re-based to zero.
    """
    if len(rec) == 0:
        raise EmptyRecording("cannot cleanse an empty recording")
    data = rec.data.copy()
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    lo = mean - policy.outlier_sigma * std
    hi = mean + policy.outlier_sigma * std
    clipped_rows = np.nonzero(np.any((data < lo) | (data > hi), axis=1))[0]
    data = np.clip(data, lo, hi)
    data = np.clip(data, -CHANNEL_FULL_SCALE, CHANNEL_FULL_SCALE)

    centered = data - data.mean(axis=0)
    activity = np.sqrt((centered**2).mean(axis=1))
    width = max(1, int(round(policy.trim_rms_window_s * rec.rate_hz)))
    rms = _rolling_rms(activity, width)
    median_rms = float(np.median(rms))
    if median_rms <= 0.0:
        raise FullyTrimmed("recording has no activity at all")
    threshold = policy.trim_rms_ratio * median_rms

    active = rms >= threshold
    if not active.any():
        raise FullyTrimmed("entire recording below the activity threshold")
    start = int(np.argmax(active))
    end = len(active) - int(np.argmax(active[::-1]))

    trimmings: List[Trimming] = []

    def _fragment(sl):
        return Recording(
            rec.t[sl] - rec.t[sl][0],
            rec.data[sl],
            rec.rate_hz,
            rec.label,
            rec.source_id,
        )

    if start > 0:
        trimmings.append(Trimming(_fragment(slice(0, start)), rec.label))
    if end < len(rec):
        trimmings.append(Trimming(_fragment(slice(end, len(rec))), rec.label))
    # Clipped segments feed the Unclassified pool too.
    for i in clipped_rows:
        trimmings.append(Trimming(_fragment(slice(i, i + 1)), rec.label))

    out = Recording(
        rec.t[start:end] - rec.t[start],
        data[start:end],
        rec.rate_hz,
        rec.label,
        rec.source_id,
    )
    return out, trimmings


def segment(rec: Recording, window_len: int, stride: Optional[int] = None) -> List[Window]:
    """Cut a recording into fixed-length windows; short tails are dropped."""
    if window_len < 1:
        raise InvalidArgument("window_len must be >= 1")
    if stride is None:
        stride = window_len
    if stride < 1:
        raise InvalidArgument("stride must be >= 1")
    windows = []
    for start in range(0, len(rec) - window_len + 1, stride):
        windows.append(
            Window(rec.data[start : start + window_len], rec.rate_hz, rec.label)
        )
    return windows
