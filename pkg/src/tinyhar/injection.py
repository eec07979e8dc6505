"""Incremental class injection: add classes one at a time, then accept,
merge, or discard each based on validation confusion overlap.

The merge decision the original workflow made by hand is encoded as a
declarative MergePolicy listing which class pairs may combine and what
the combined class is called.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from .dataset import UNCLASSIFIED
from .errors import InvalidArgument, TrainFnNondeterministic, UnknownClass
from .evaluation import ConfusionMatrix

# train_fn(classes, seed) -> (model, validation confusion matrix)
TrainFn = Callable[[Tuple[str, ...], int], Tuple[object, ConfusionMatrix]]

DEFAULT_TAU = 0.15


@dataclass(frozen=True)
class MergePolicy:
    """Allowed merges: unordered class pair -> merged class name."""

    mergeable: Dict[FrozenSet[str], str] = field(default_factory=dict)

    def merged_name(self, a: str, b: str) -> Optional[str]:
        return self.mergeable.get(frozenset((a, b)))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[str, str, str]]) -> "MergePolicy":
        return cls({frozenset((a, b)): merged for a, b, merged in pairs})

    @classmethod
    def load(cls, path) -> "MergePolicy":
        """Read `a + b -> merged` lines; `#` starts a comment."""
        pairs = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                left, merged = line.split("->")
                a, b = left.split("+")
            except ValueError:
                raise InvalidArgument(f"bad merge rule {line!r}") from None
            pairs.append((a.strip(), b.strip(), merged.strip()))
        return cls.from_pairs(pairs)

    def save(self, path) -> None:
        lines = [f"{sorted(k)[0]} + {sorted(k)[1]} -> {v}" for k, v in self.mergeable.items()]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class StepRecord:
    candidate: str
    decision: str  # "accepted" | "merged" | "discarded"
    detail: str
    overlap: Tuple[str, ...]
    val_accuracy: float


@dataclass
class InjectionState:
    active: Tuple[str, ...]
    tau: float = DEFAULT_TAU
    merges: List[Tuple[str, str, str]] = field(default_factory=list)
    discarded: Dict[str, str] = field(default_factory=dict)
    confusions: List[ConfusionMatrix] = field(default_factory=list)


@dataclass
class InjectionReport:
    final_classes: Tuple[str, ...]
    steps: List[StepRecord]
    final_accuracy: float

    def to_text(self) -> str:
        lines = [
            f"final classes ({len(self.final_classes)}): "
            + ", ".join(self.final_classes),
            f"final validation accuracy: {self.final_accuracy:.4f}",
            "",
            "decisions:",
        ]
        for s in self.steps:
            extra = f" ({s.detail})" if s.detail else ""
            lines.append(
                f"  {s.candidate}: {s.decision}{extra}"
                f" [val_acc {s.val_accuracy:.4f}]"
            )
        return "\n".join(lines) + "\n"


def assess_overlap(
    cm: ConfusionMatrix, new_class: str, tau: float = DEFAULT_TAU
) -> Set[str]:
    """Existing classes confused with the new one in either direction.

    A class overlaps when its row-normalized confusion rate with the new
    class reaches tau either way. The Unclassified catch-all never counts.
    """
    if not 0 < tau < 1:
        raise InvalidArgument("tau must be in (0, 1)")
    i = cm.index(new_class)
    rates = cm.rates
    overlap = set()
    for j, name in enumerate(cm.class_names):
        if j == i or name == UNCLASSIFIED:
            continue
        if rates[i, j] >= tau or rates[j, i] >= tau:
            overlap.add(name)
    return overlap


def _train(train_fn: TrainFn, classes: Tuple[str, ...], seed: int, verify: bool):
    model, cm = train_fn(classes, seed)
    if verify:
        _, cm2 = train_fn(classes, seed)
        if not np.array_equal(cm.counts, cm2.counts):
            raise TrainFnNondeterministic("train_fn differs across identical runs")
    return model, cm


def inject_step(
    state: InjectionState,
    candidate: str,
    policy: MergePolicy,
    train_fn: TrainFn,
    seed: int = 0,
    verify_determinism: bool = False,
) -> Tuple[StepRecord, InjectionState]:
    """Retrain with the candidate added and apply the overlap rules.

    No overlap: accept. Overlap with exactly one class: merge when the
    policy allows it (both relabel to the merged name, retrain once),
    otherwise discard. Overlap with two or more classes: discard.
    """
    if candidate in state.active or candidate in state.discarded:
        raise InvalidArgument(f"candidate {candidate!r} already processed")
    trial = state.active + (candidate,)
    model, cm = _train(train_fn, trial, seed, verify_determinism)
    state.confusions.append(cm)
    overlap = assess_overlap(cm, candidate, state.tau)
    acc = cm.accuracy

    if not overlap:
        record = StepRecord(candidate, "accepted", "", (), acc)
        new_state = InjectionState(
            trial, state.tau, state.merges, state.discarded, state.confusions
        )
    elif len(overlap) == 1:
        (other,) = overlap
        merged = policy.merged_name(candidate, other)
        if merged is None:
            record = StepRecord(
                candidate,
                "discarded",
                f"overlaps {other}, no merge rule",
                (other,),
                acc,
            )
            state.discarded[candidate] = record.detail
            new_state = state
        else:
            active = tuple(
                merged if c == other else c for c in state.active
            )
            state.merges.append((candidate, other, merged))
            _, cm2 = _train(train_fn, active, seed, verify_determinism)
            state.confusions.append(cm2)
            record = StepRecord(
                candidate, "merged", f"into {merged} with {other}", (other,), cm2.accuracy
            )
            new_state = InjectionState(
                active, state.tau, state.merges, state.discarded, state.confusions
            )
    else:
        record = StepRecord(
            candidate,
            "discarded",
            "overlaps " + ", ".join(sorted(overlap)),
            tuple(sorted(overlap)),
            acc,
        )
        state.discarded[candidate] = record.detail
        new_state = state
    return record, new_state


def run_injection(
    seed_classes: Sequence[str],
    candidates: Sequence[str],
    policy: MergePolicy,
    train_fn: TrainFn,
    tau: float = DEFAULT_TAU,
    seed: int = 0,
    verify_determinism: bool = False,
) -> InjectionReport:
    """Fold inject_step over the candidates, then retrain the final set."""
    seed_classes = tuple(seed_classes)
    if len(seed_classes) < 2:
        raise InvalidArgument("need at least two seed classes")
    if set(candidates) & set(seed_classes):
        raise InvalidArgument("candidates must be disjoint from seed classes")
    state = InjectionState(seed_classes, tau)
    steps: List[StepRecord] = []
    for candidate in candidates:
        record, state = inject_step(
            state, candidate, policy, train_fn, seed, verify_determinism
        )
        steps.append(record)
    _, cm = _train(train_fn, state.active, seed, verify_determinism)
    return InjectionReport(state.active, steps, cm.accuracy)
