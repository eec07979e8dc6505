"""Per-window statistical features: 13 per channel, 78 per window.

The canonical feature order is a frozen contract (see FEATURE_NAMES and
the shipped manifest). ModelPack headers embed MANIFEST_VERSION so a
loaded model refuses to run against a different feature layout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    EmptySeries,
    InvalidArgument,
    InvalidFraction,
    MaskOutOfRange,
    SeriesTooShort,
)
from .signal_core import CHANNELS, Window

FEATURE_KINDS = (
    "MAX",
    "MIN",
    "MEAN",
    "STD_DEV",
    "RANGE",
    "ABSM",
    "RMS",
    "P2P_LF",
    "P2P_HF",
    "AMDF",
    "ZCR",
    "MCR",
    "MAD",
)

FEATURE_NAMES: Tuple[str, ...] = tuple(
    f"{ch}_{kind}" for ch in CHANNELS for kind in FEATURE_KINDS
)
N_FEATURES = len(FEATURE_NAMES)  # 78
MANIFEST_VERSION = 1

DEFAULT_MA_WIDTH = 5  # samples at 26 Hz


def manifest_text() -> str:
    lines = [f"# feature manifest v{MANIFEST_VERSION}"]
    lines += [f"{i}\t{name}" for i, name in enumerate(FEATURE_NAMES)]
    return "\n".join(lines) + "\n"


def manifest_hash() -> str:
    return hashlib.sha256("\n".join(FEATURE_NAMES).encode()).hexdigest()


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise EmptySeries("empty series")
    return x


def basic_stats(series) -> Tuple[float, float, float, float, float, float]:
    """(max, min, mean, std, range, absm); std is the population form."""
    x = _as_series(series)
    mx, mn = float(x.max()), float(x.min())
    return (
        mx,
        mn,
        float(x.mean()),
        float(x.std()),
        mx - mn,
        float(np.abs(x).mean()),
    )


def rms(series) -> float:
    x = _as_series(series)
    return float(np.sqrt(np.mean(x**2)))


def moving_average(series, width: int) -> np.ndarray:
    """Centered moving average; edge windows shrink instead of padding."""
    x = _as_series(series)
    if width % 2 == 0 or width < 1:
        raise InvalidArgument("moving-average width must be odd and positive")
    csum = np.concatenate([[0.0], np.cumsum(x)])
    n = len(x)
    half = width // 2
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def p2p_split(series, ma_width: int = DEFAULT_MA_WIDTH) -> Tuple[float, float]:
    """Peak-to-peak amplitude of the low/high frequency components.

    The low component is a centered moving average; the high component is
    the residual after subtracting it.
    """
    x = _as_series(series)
    if len(x) < ma_width:
        raise SeriesTooShort(f"need at least {ma_width} samples")
    lf = moving_average(x, ma_width)
    hf = x - lf
    return float(lf.max() - lf.min()), float(hf.max() - hf.min())


def amdf(series) -> float:
    x = _as_series(series)
    if len(x) < 2:
        raise SeriesTooShort("need at least 2 samples")
    return float(np.mean(np.abs(np.diff(x))))


def crossing_rates(series) -> Tuple[float, float]:
    """(zero crossing rate, mean crossing rate).

    A crossing requires a strictly negative product of adjacent values;
    exact zeros do not count.
    """
    x = _as_series(series)
    if len(x) < 2:
        raise SeriesTooShort("need at least 2 samples")
    zcr = float(np.mean(x[:-1] * x[1:] < 0))
    c = x - x.mean()
    mcr = float(np.mean(c[:-1] * c[1:] < 0))
    return zcr, mcr


def mad(series) -> float:
    x = _as_series(series)
    return float(np.mean(np.abs(x - x.mean())))


def channel_features(series, ma_width: int = DEFAULT_MA_WIDTH) -> List[float]:
    """The 13 features for one channel, in canonical kind order."""
    mx, mn, mean, std, rng, absm = basic_stats(series)
    p2p_lf, p2p_hf = p2p_split(series, ma_width)
    zcr, mcr = crossing_rates(series)
    return [
        mx,
        mn,
        mean,
        std,
        rng,
        absm,
        rms(series),
        p2p_lf,
        p2p_hf,
        amdf(series),
        zcr,
        mcr,
        mad(series),
    ]


def extract_features(w: Window, ma_width: int = DEFAULT_MA_WIDTH) -> np.ndarray:
    """Full 78-value feature vector in canonical order."""
    out = np.empty(N_FEATURES)
    for c in range(w.data.shape[1]):
        out[c * 13 : (c + 1) * 13] = channel_features(w.data[:, c], ma_width)
    return out


@dataclass(frozen=True)
class FeatureMask:
    """Retained subset of the 78 canonical features (sorted indices)."""

    kept: Tuple[int, ...]

    def __post_init__(self):
        kept = tuple(sorted(self.kept))
        object.__setattr__(self, "kept", kept)
        if not kept:
            raise MaskOutOfRange("mask must keep at least one feature")
        if len(set(kept)) != len(kept):
            raise MaskOutOfRange("duplicate mask indices")
        if kept[0] < 0 or kept[-1] >= N_FEATURES:
            raise MaskOutOfRange("mask index outside the canonical range")

    @classmethod
    def full(cls) -> "FeatureMask":
        return cls(tuple(range(N_FEATURES)))

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "FeatureMask":
        index = {name: i for i, name in enumerate(FEATURE_NAMES)}
        try:
            return cls(tuple(index[n] for n in names))
        except KeyError as e:
            raise MaskOutOfRange(f"unknown feature name {e.args[0]!r}") from None

    @property
    def names(self) -> List[str]:
        return [FEATURE_NAMES[i] for i in self.kept]

    def __len__(self):
        return len(self.kept)


def select_top_features(importance, fraction: float) -> FeatureMask:
    """Mask of the ceil(fraction * 78) highest-importance features.

    Ties break toward the lower canonical index.
    """
    scores = np.asarray(importance, dtype=float)
    if scores.shape != (N_FEATURES,):
        raise InvalidArgument(f"expected {N_FEATURES} scores, got {scores.shape}")
    if np.any(scores < 0):
        raise InvalidArgument("importance scores must be non-negative")
    if not 0 < fraction <= 1:
        raise InvalidFraction("fraction must be in (0, 1]")
    n_keep = int(np.ceil(fraction * N_FEATURES))
    order = sorted(range(N_FEATURES), key=lambda i: (-scores[i], i))
    return FeatureMask(tuple(order[:n_keep]))


def apply_mask(fv, mask: FeatureMask) -> np.ndarray:
    fv = np.asarray(fv, dtype=float)
    if fv.shape != (N_FEATURES,):
        raise MaskOutOfRange(f"expected a {N_FEATURES}-long vector, got {fv.shape}")
    return fv[list(mask.kept)]
