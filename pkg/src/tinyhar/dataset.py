"""Dataset handling: CSV ingestion, synthetic corpus, splits.

The synthetic generator stands in for a real multi-hour IMU corpus at
desk scale. Classes are frequency-separated sinusoid mixtures, so the
periodicity of each gesture is the class signature. The Unclassified
class is built from cleansing trimmings, outlier segments, and random
high-velocity bursts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ClassTooSmall,
    EmptyPool,
    InvalidArgument,
    InvalidSpec,
    ParseError,
    RateMismatch,
)
from .signal_core import (
    CHANNEL_FULL_SCALE,
    N_CHANNELS,
    Recording,
    Trimming,
    Window,
)

UNCLASSIFIED = "Unclassified"

DEFAULT_GROUPS = (
    "Writing",
    "Cleaning",
    "Sports",
    "Workshop",
    "Kitchen",
    "Other",
    UNCLASSIFIED,
)


@dataclass(frozen=True)
class LabelTaxonomy:
    classes: Tuple[str, ...]
    groups: Dict[str, Tuple[str, ...]]

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise InvalidArgument("duplicate class names")
        seen = {}
        for group, members in self.groups.items():
            for cls in members:
                if cls in seen:
                    raise InvalidArgument(
                        f"class {cls!r} in both {seen[cls]!r} and {group!r}"
                    )
                seen[cls] = group
        missing = set(self.classes) - set(seen)
        if missing:
            raise InvalidArgument(f"classes without a group: {sorted(missing)}")


def default_taxonomy(n_classes: int = 24) -> LabelTaxonomy:
    """Round-robin assignment of synthetic class names to activity groups."""
    classes = tuple(f"Activity{i:02d}" for i in range(n_classes - 1)) + (UNCLASSIFIED,)
    groups: Dict[str, List[str]] = {g: [] for g in DEFAULT_GROUPS}
    real_groups = [g for g in DEFAULT_GROUPS if g != UNCLASSIFIED]
    for i, cls in enumerate(classes[:-1]):
        groups[real_groups[i % len(real_groups)]].append(cls)
    groups[UNCLASSIFIED].append(UNCLASSIFIED)
    return LabelTaxonomy(classes, {g: tuple(m) for g, m in groups.items()})


# --------------------------------------------------------------------------
# CSV contract
#   line 1: #rate_hz=<int>,label=<string>,source=<string>
#   line 2: t,ax,ay,az,gx,gy,gz
#   data rows: decimal text, UTF-8, LF endings
# --------------------------------------------------------------------------

CSV_COLUMNS = ("t", "ax", "ay", "az", "gx", "gy", "gz")


def save_csv(rec: Recording, path) -> None:
    lines = [
        f"#rate_hz={int(rec.rate_hz)},label={rec.label or ''},source={rec.source_id}",
        ",".join(CSV_COLUMNS),
    ]
    for t, row in zip(rec.t, rec.data):
        lines.append(f"{t:.6f}," + ",".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_csv(path) -> Recording:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 3:
        raise ParseError(f"{path}: too short to be a recording")
    header = lines[0]
    if not header.startswith("#"):
        raise ParseError(f"{path}: missing metadata header", row=1)
    meta = {}
    for part in header[1:].split(","):
        if "=" not in part:
            raise ParseError(f"{path}: bad metadata field {part!r}", row=1)
        k, v = part.split("=", 1)
        meta[k.strip()] = v.strip()
    try:
        rate_hz = int(meta["rate_hz"])
    except (KeyError, ValueError):
        raise ParseError(f"{path}: missing or bad rate_hz", row=1) from None
    label = meta.get("label") or None
    source = meta.get("source", "")

    columns = tuple(c.strip() for c in lines[1].split(","))
    if columns != CSV_COLUMNS:
        missing = set(CSV_COLUMNS) - set(columns)
        raise ParseError(
            f"{path}: bad column header, missing {sorted(missing)}", row=2
        )

    t = np.empty(len(lines) - 2)
    data = np.empty((len(lines) - 2, N_CHANNELS))
    for i, line in enumerate(lines[2:]):
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ParseError(f"{path}: expected {len(CSV_COLUMNS)} cells", row=i + 3)
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise ParseError(f"{path}: non-numeric cell", row=i + 3) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"{path}: non-finite cell", row=i + 3)
        t[i] = values[0]
        data[i] = values[1:]

    if len(t) >= 2:
        dt = np.diff(t)
        expected = 1.0 / rate_hz
        if np.any(dt <= 0) or np.any(np.abs(dt - expected) > 0.1 * expected):
            raise RateMismatch(
                f"{path}: timestamps contradict declared rate {rate_hz} Hz"
            )
    return Recording(t, data, rate_hz, label, source)


# --------------------------------------------------------------------------
# Synthetic corpus
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    name: str
    base_freq_hz: float
    amplitudes: Tuple[float, ...]  # per channel, 6 entries
    noise_std: float = 0.05
    duration_s: float = 120.0
    participants: int = 3


@dataclass(frozen=True)
class SynthSpec:
    classes: Tuple[ClassSpec, ...]
    rate_hz: float = 104.0

    def __post_init__(self):
        nyquist = self.rate_hz / 2
        for cs in self.classes:
            if not 0 < cs.base_freq_hz < nyquist:
                raise InvalidSpec(f"{cs.name}: frequency outside (0, {nyquist})")
            if cs.duration_s <= 0:
                raise InvalidSpec(f"{cs.name}: non-positive duration")
            if len(cs.amplitudes) != N_CHANNELS:
                raise InvalidSpec(f"{cs.name}: need 6 amplitudes")
            if not 1 <= cs.participants <= 8:
                raise InvalidSpec(f"{cs.name}: participants out of range")


def default_synth_spec(
    n_classes: int = 24,
    duration_s: float = 120.0,
    rate_hz: float = 104.0,
    noise_std: float = 0.05,
    participants: int = 3,
    freq_step_hz: float = 0.4,
    base_freq_hz: float = 0.8,
) -> SynthSpec:
    """Frequency-separated class roster; class frequencies 0.4 Hz apart."""
    taxonomy = default_taxonomy(n_classes)
    specs = []
    rng = np.random.default_rng(12345)  # fixed: amplitude profile is part of the spec
    for i, name in enumerate(taxonomy.classes):
        if name == UNCLASSIFIED:
            continue
        amps = tuple(0.5 + rng.random(N_CHANNELS) * 1.5)
        specs.append(
            ClassSpec(
                name,
                base_freq_hz + freq_step_hz * i,
                amps,
                noise_std,
                duration_s,
                participants,
            )
        )
    return SynthSpec(tuple(specs), rate_hz)


def _synth_recording(
    cs: ClassSpec, rate_hz: float, rng, participant: int, duration_s: float
) -> Recording:
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    phase = rng.uniform(0, 2 * np.pi, size=N_CHANNELS)
    amp_jitter = rng.uniform(0.85, 1.15, size=N_CHANNELS)
    data = np.empty((n, N_CHANNELS))
    w = 2 * np.pi * cs.base_freq_hz
    for c in range(N_CHANNELS):
        a = cs.amplitudes[c] * amp_jitter[c]
        data[:, c] = a * np.sin(w * t + phase[c]) + 0.3 * a * np.sin(
            2 * w * t + 2 * phase[c]
        )
    data += rng.normal(0, cs.noise_std, size=data.shape)
    np.clip(data, -CHANNEL_FULL_SCALE, CHANNEL_FULL_SCALE, out=data)
    return Recording(t, data, rate_hz, cs.name, f"synth/{cs.name}/p{participant}")


def synth_dataset(spec: SynthSpec, seed: int) -> List[Recording]:
    """Deterministic synthetic corpus: one recording per (class, participant).

    A class's duration_s is its total recorded time, split evenly across
    its participants.
    """
    rng = np.random.default_rng(seed)
    recordings = []
    for cs in spec.classes:
        per_participant = cs.duration_s / cs.participants
        for p in range(cs.participants):
            recordings.append(
                _synth_recording(cs, spec.rate_hz, rng, p, per_participant)
            )
    return recordings


def _burst_recording(rng, rate_hz: float, duration_s: float, idx: int) -> Recording:
    """Random high-velocity movement: saturating random-walk accelerations."""
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    steps = rng.uniform(-1, 1, size=(n, N_CHANNELS)) * CHANNEL_FULL_SCALE * 0.4
    data = np.cumsum(steps, axis=0)
    np.clip(data, -CHANNEL_FULL_SCALE, CHANNEL_FULL_SCALE, out=data)
    return Recording(t, data, rate_hz, UNCLASSIFIED, f"synth/burst/{idx}")


def build_unclassified(
    trimmings: Sequence[Trimming],
    outlier_segments: Sequence[Recording] = (),
    rng_seed: int = 0,
    synthetic_fallback: bool = True,
    n_bursts: int = 8,
    burst_duration_s: float = 15.0,
    rate_hz: float = 26.0,
) -> List[Recording]:
    """Pool of trimmings, outlier segments, and synthetic bursts, relabeled."""
    pool: List[Recording] = []
    for tr in trimmings:
        r = tr.samples
        pool.append(Recording(r.t, r.data, r.rate_hz, UNCLASSIFIED, r.source_id))
    for r in outlier_segments:
        pool.append(Recording(r.t, r.data, r.rate_hz, UNCLASSIFIED, r.source_id))
    if synthetic_fallback and n_bursts > 0:
        rng = np.random.default_rng(rng_seed)
        for i in range(n_bursts):
            pool.append(_burst_recording(rng, rate_hz, burst_duration_s, i))
    if not pool:
        raise EmptyPool("no trimmings, outliers, or synthetic fallback")
    return pool


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSplit:
    train: List[Window]
    validation: List[Window]
    test: List[Window]
    seed: int


def _by_class(windows: Sequence[Window]) -> Dict[str, List[int]]:
    groups: Dict[str, List[int]] = {}
    for i, w in enumerate(windows):
        groups.setdefault(w.label, []).append(i)
    return groups


def split_stratified(
    windows: Sequence[Window],
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Per-class shuffled train/val/test assignment honoring the ratios."""
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgument("ratios must be positive and sum to 1")
    rng = np.random.default_rng(seed)
    parts: Tuple[List[Window], List[Window], List[Window]] = ([], [], [])
    groups = _by_class(windows)
    for cls in sorted(groups, key=str):
        idx = groups[cls]
        if len(idx) < 3:
            raise ClassTooSmall(f"class {cls!r} has only {len(idx)} windows")
        idx = list(rng.permutation(idx))
        n = len(idx)
        n_train = int(round(ratios[0] * n))
        n_val = int(round(ratios[1] * n))
        n_val = min(n_val, n - n_train - 1) or 1
        cuts = [n_train, n_train + n_val]
        parts[0].extend(windows[i] for i in idx[: cuts[0]])
        parts[1].extend(windows[i] for i in idx[cuts[0] : cuts[1]])
        parts[2].extend(windows[i] for i in idx[cuts[1] :])
    return DatasetSplit(parts[0], parts[1], parts[2], seed)


def kfold_stratified(
    windows: Sequence[Window], k: int = 5, seed: int = 0
) -> List[Tuple[List[Window], List[Window]]]:
    """k stratified (train, validation) folds with disjoint validation sets."""
    if k < 2:
        raise InvalidArgument("k must be >= 2")
    rng = np.random.default_rng(seed)
    fold_val: List[List[int]] = [[] for _ in range(k)]
    groups = _by_class(windows)
    for cls in sorted(groups, key=str):
        idx = groups[cls]
        if len(idx) < k:
            raise ClassTooSmall(f"class {cls!r} has fewer than {k} windows")
        idx = list(rng.permutation(idx))
        for f in range(k):
            fold_val[f].extend(idx[f::k])
    folds = []
    for f in range(k):
        val = set(fold_val[f])
        folds.append(
            (
                [w for i, w in enumerate(windows) if i not in val],
                [windows[i] for i in sorted(val)],
            )
        )
    return folds
