"""End-to-end glue: recordings -> cleansed windows -> feature tables."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import UNCLASSIFIED, build_unclassified, synth_dataset
from .errors import FullyTrimmed
from .features import DEFAULT_MA_WIDTH, extract_features
from .signal_core import CleansePolicy, Recording, Trimming, Window, cleanse, decimate, segment


def preprocess_recording(
    rec: Recording,
    decimation: int = 4,
    policy: CleansePolicy = CleansePolicy(),
) -> Tuple[Recording, List[Trimming]]:
    """Cleansing first, then downsampling (the pipeline's stage order)."""
    cleaned, trimmings = cleanse(rec, policy)
    return decimate(cleaned, decimation), trimmings


def windows_from_recordings(
    recs: Sequence[Recording],
    window_len: int = 39,
    stride: Optional[int] = None,
    decimation: int = 4,
    policy: CleansePolicy = CleansePolicy(),
    collect_trimmings: Optional[List[Trimming]] = None,
) -> List[Window]:
    windows: List[Window] = []
    for rec in recs:
        try:
            processed, trimmings = preprocess_recording(rec, decimation, policy)
        except FullyTrimmed:
            continue
        if collect_trimmings is not None:
            collect_trimmings.extend(trimmings)
        windows.extend(segment(processed, window_len, stride))
    return windows


def feature_table(
    windows: Sequence[Window],
    class_names: Optional[Sequence[str]] = None,
    ma_width: int = DEFAULT_MA_WIDTH,
) -> Tuple[np.ndarray, np.ndarray, Tuple[str, ...]]:
    """(X, y, class_names) for a labeled window list."""
    if class_names is None:
        class_names = sorted({w.label for w in windows}, key=str)
    index = {c: i for i, c in enumerate(class_names)}
    X = np.array([extract_features(w, ma_width) for w in windows])
    y = np.array([index[w.label] for w in windows])
    return X, y, tuple(class_names)


def synth_feature_corpus(
    spec,
    seed: int = 0,
    window_len: int = 39,
    decimation: int = 4,
    with_unclassified: bool = True,
    ma_width: int = DEFAULT_MA_WIDTH,
) -> Tuple[np.ndarray, np.ndarray, Tuple[str, ...], List[Window]]:
    """Synthetic corpus through the full pipeline to a feature table.

    The Unclassified class is built from the cleansing trimmings plus
    synthetic high-velocity bursts.
    """
    recs = synth_dataset(spec, seed)
    trimmings: List[Trimming] = []
    windows = windows_from_recordings(
        recs, window_len, None, decimation, collect_trimmings=trimmings
    )
    if with_unclassified:
        target_rate = recs[0].rate_hz / decimation if recs else 26.0
        pool = build_unclassified(trimmings, rng_seed=seed + 1, rate_hz=target_rate)
        for rec in pool:
            if rec.rate_hz == target_rate:
                windows.extend(segment(rec, window_len))
            else:
                windows.extend(segment(decimate(rec, decimation), window_len))
    X, y, names = feature_table(windows, ma_width=ma_width)
    return X, y, names, windows
