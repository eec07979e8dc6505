"""Synthetic incremental-injection scenario builder.

Constructs a 31-gesture roster whose confusion structure is forced by
design: most gestures have unique base frequencies, a few are
indistinguishable twins of existing gestures (mergeable), and a couple
are ambiguous half-and-half mixtures of two existing gestures (must be
discarded). Running the injection loop over it lands on a known final
class count.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dataset import ClassSpec, SynthSpec, synth_dataset
from .evaluation import evaluate
from .injection import MergePolicy, TrainFn
from .mlp import TrainConfig, mlp_train
from .pipeline import feature_table, windows_from_recordings
from .signal_core import N_CHANNELS


@dataclass
class InjectionScenario:
    seed_classes: Tuple[str, ...]
    candidates: Tuple[str, ...]
    policy: MergePolicy
    train_fn: TrainFn
    expected_final_count: int
    class_names: Tuple[str, ...]


def _stable_seed(base: int, name: str) -> int:
    return base + zlib.crc32(name.encode()) % 100000


def build_injection_scenario(
    n_seed: int = 10,
    n_clean: int = 14,
    n_twins: int = 5,
    n_ambiguous: int = 2,
    duration_s: float = 60.0,
    noise_std: float = 0.05,
    rate_hz: float = 104.0,
    window_len: int = 39,
    seed: int = 0,
    train_cfg: Optional[TrainConfig] = None,
) -> InjectionScenario:
    """Roster of n_seed + n_clean + n_twins + n_ambiguous gestures.

    Twins merge into their originals (policy pair present), ambiguous
    gestures overlap two classes and get discarded, so the expected
    final count is n_seed + n_clean.
    """
    rng = np.random.default_rng(777)  # amplitude profiles are part of the scenario
    freq = 0.8
    specs: List[ClassSpec] = []
    for i in range(n_seed):
        amps = tuple(0.5 + rng.random(N_CHANNELS) * 1.5)
        specs.append(ClassSpec(f"Seed{i:02d}", freq, amps, noise_std, duration_s, 2))
        freq += 0.4
    for i in range(n_clean):
        amps = tuple(0.5 + rng.random(N_CHANNELS) * 1.5)
        specs.append(ClassSpec(f"Gesture{i:02d}", freq, amps, noise_std, duration_s, 2))
        freq += 0.4

    twin_pairs: List[Tuple[str, str, str]] = []  # (twin, original, merged)
    twins: List[ClassSpec] = []
    for i in range(n_twins):
        base = specs[i]
        twins.append(replace(base, name=f"{base.name}Twin"))
        twin_pairs.append((twins[-1].name, base.name, f"{base.name}M"))

    ambiguous: Dict[str, Tuple[ClassSpec, ClassSpec]] = {}
    for i in range(n_ambiguous):
        a = specs[n_seed - 2 * i - 2]
        b = specs[n_seed - 2 * i - 1]
        ambiguous[f"Ambiguous{i:02d}"] = (a, b)

    def _relabel(rec, name):
        return replace(rec, label=name, source_id=f"scenario/{name}")

    by_name: Dict[str, List] = {}
    recordings = []
    for s in specs:
        recs = synth_dataset(SynthSpec((s,), rate_hz), _stable_seed(seed, s.name))
        by_name[s.name] = recs
        recordings.extend(recs)
    # Twins are relabeled copies of their original's recordings, so the
    # two classes are indistinguishable by construction.
    for t in twins:
        orig = t.name[: -len("Twin")]
        recordings.extend(_relabel(r, t.name) for r in by_name[orig])
    # Ambiguous gestures copy material from both parents.
    for name, (pa, pb) in ambiguous.items():
        recordings.append(_relabel(by_name[pa.name][0], name))
        recordings.append(_relabel(by_name[pb.name][0], name))

    windows = windows_from_recordings(recordings, window_len)
    all_classes = (
        tuple(s.name for s in specs)
        + tuple(t.name for t in twins)
        + tuple(ambiguous)
    )
    X, y, class_names = feature_table(windows, class_names=all_classes)
    merged_of = {orig: merged for _, orig, merged in twin_pairs}
    for twin, orig, merged in twin_pairs:
        merged_of[twin] = merged

    if train_cfg is None:
        train_cfg = TrainConfig(
            initial_lr=3e-3, patience=15, max_epochs=120, dropout=0.1, batch_size=512
        )
    base_cfg = train_cfg

    def train_fn(classes: Tuple[str, ...], fn_seed: int):
        # Map each original gesture onto its live class: itself while
        # active, or the merged class that absorbed it.
        target_of: Dict[int, int] = {}
        for pos, orig in enumerate(class_names):
            if orig in classes:
                target_of[pos] = classes.index(orig)
            elif merged_of.get(orig) in classes:
                target_of[pos] = classes.index(merged_of[orig])
        keep = np.array([int(lbl) in target_of for lbl in y])
        Xc = X[keep]
        yc = np.array([target_of[int(lbl)] for lbl in y[keep]])

        # stratified 75/25 train/val split
        split_rng = np.random.default_rng(fn_seed + 17)
        val_rows: List[int] = []
        for c in range(len(classes)):
            rows = np.nonzero(yc == c)[0]
            rows = split_rng.permutation(rows)
            val_rows.extend(rows[: max(4, len(rows) // 4)])
        val_mask = np.zeros(len(Xc), dtype=bool)
        val_mask[val_rows] = True

        model, _ = mlp_train(
            (Xc[~val_mask], yc[~val_mask]),
            (Xc[val_mask], yc[val_mask]),
            replace(base_cfg, seed=fn_seed),
            dims=(X.shape[1], 64, 32, len(classes)),
            class_names=tuple(classes),
        )
        _, cm = evaluate(model, Xc[val_mask], yc[val_mask], tuple(classes))
        return model, cm

    return InjectionScenario(
        seed_classes=tuple(s.name for s in specs[:n_seed]),
        candidates=tuple(s.name for s in specs[n_seed:])
        + tuple(t.name for t in twins)
        + tuple(ambiguous),
        policy=MergePolicy.from_pairs(twin_pairs),
        train_fn=train_fn,
        expected_final_count=n_seed + n_clean,
        class_names=class_names,
    )
