"""Fixed-buffer streaming classifier emulating the on-sensor loop.

The engine allocates every buffer once at construction, sized exactly
from the footprint accounting, and then classifies windows as samples
stream in. An allocation counter lets tests assert that steady-state
classification never grows the buffer set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import (
    InferenceSlowerThanWindow,
    InvalidArgument,
    ManifestMismatch,
    MaWidthMismatch,
)
from .features import MANIFEST_VERSION, FeatureMask, channel_features
from .gbdt import Forest, gbdt_predict
from .mlp import MlpModel, mlp_forward
from .modelpack import AccountingModel, decode, footprint
from .signal_core import CHANNEL_FULL_SCALE, N_CHANNELS

Model = Union[MlpModel, Forest]


@dataclass(frozen=True)
class ClassificationEvent:
    window_index: int
    label: int
    scores: np.ndarray


@dataclass(frozen=True)
class DutyCycleReport:
    t_inference_ms: float
    t_window_ms: float
    idle_fraction: float


def duty_cycle(t_inference_ms: float, t_window_ms: float) -> DutyCycleReport:
    """Idle share of each window period: 1 - inference/window."""
    if t_inference_ms <= 0 or t_window_ms <= 0:
        raise InvalidArgument("times must be positive")
    if t_inference_ms >= t_window_ms:
        raise InferenceSlowerThanWindow(
            f"inference {t_inference_ms} ms >= window {t_window_ms} ms"
        )
    return DutyCycleReport(
        t_inference_ms, t_window_ms, 1.0 - t_inference_ms / t_window_ms
    )


class Engine:
    """Single-consumer streaming classifier over a fixed window buffer."""

    def __init__(
        self,
        pack: Union[bytes, Model],
        window_len: int = 39,
        ma_width: Optional[int] = None,
        stride: Optional[int] = None,
        accounting: Optional[AccountingModel] = None,
    ):
        model = decode(pack) if isinstance(pack, (bytes, bytearray)) else pack
        if model.manifest_version != MANIFEST_VERSION:
            raise ManifestMismatch(
                f"pack manifest v{model.manifest_version}, library v{MANIFEST_VERSION}"
            )
        if ma_width is None:
            ma_width = model.ma_width
        if ma_width != model.ma_width or ma_width % 2 == 0 or ma_width < 1:
            raise MaWidthMismatch(
                f"ma_width {ma_width} vs pack {model.ma_width} (must match, odd)"
            )
        self.model = model
        self.window_len = window_len
        self.ma_width = ma_width
        self.stride = stride if stride is not None else window_len
        self.mask: FeatureMask = model.feature_mask
        self._channels = sorted({i // 13 for i in self.mask.kept})
        # (output position, channel slot, feature kind) for each kept feature
        chan_slot = {ch: i for i, ch in enumerate(self._channels)}
        self._kept_layout = [
            (pos, chan_slot[canon // 13], canon % 13)
            for pos, canon in enumerate(self.mask.kept)
        ]

        self.alloc_count = 0
        if accounting is None:
            accounting = AccountingModel(window_len=window_len)
        self.report = footprint(model, accounting)
        # Buffers mirror the footprint breakdown exactly.
        self._window = self._alloc((window_len, len(self._channels)))
        self._features = self._alloc(len(self.mask))
        if isinstance(model, MlpModel):
            self._work = self._alloc(2 * max(model.dims))
        else:
            self._work = self._alloc(model.n_classes)
        self._scratch = self._alloc(self.report.breakdown["scratch"] // 4)
        self._fill = 0
        self._window_index = 0
        self.last_event: Optional[ClassificationEvent] = None

    def _alloc(self, shape) -> np.ndarray:
        # Emulation buffers hold doubles; the footprint accounting charges
        # the 4-byte-per-value layout the device implementation would use.
        self.alloc_count += 1
        return np.zeros(shape, dtype=float)

    @property
    def buffer_bytes(self) -> int:
        return self.report.stack_bytes + self.report.data_bytes

    def _classify(self) -> ClassificationEvent:
        per_channel = [
            channel_features(self._window[:, slot], self.ma_width)
            for slot in range(len(self._channels))
        ]
        for pos, slot, kind in self._kept_layout:
            self._features[pos] = per_channel[slot][kind]
        if isinstance(self.model, MlpModel):
            scores = mlp_forward(self.model, self._features)
        else:
            scores = gbdt_predict(self.model, self._features)
        label = int(np.argmax(scores))
        event = ClassificationEvent(self._window_index, label, scores)
        self._window_index += 1
        self.last_event = event
        return event

    def push_samples(self, samples: np.ndarray) -> List[ClassificationEvent]:
        """Feed raw 6-channel samples; returns events for completed windows.

        Non-finite or out-of-range values are clipped to channel full
        scale (a deployed sensor loop cannot raise to a host).
        """
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[1] != N_CHANNELS:
            raise InvalidArgument(f"expected 6-channel samples, got {samples.shape}")
        samples = np.nan_to_num(samples, posinf=0.0, neginf=0.0)
        samples = np.clip(samples, -CHANNEL_FULL_SCALE, CHANNEL_FULL_SCALE)
        events = []
        for row in samples:
            for ci, ch in enumerate(self._channels):
                self._window[self._fill, ci] = row[ch]
            self._fill += 1
            if self._fill == self.window_len:
                events.append(self._classify())
                keep = self.window_len - self.stride
                if keep > 0:
                    self._window[:keep] = self._window[self.stride :]
                self._fill = keep
        return events
