import struct

import numpy as np
import pytest

from tinyhar.errors import (
    BadMagic,
    ChecksumMismatch,
    StructuralInvariantViolated,
    UnsupportedVersion,
)
from tinyhar.features import FeatureMask
from tinyhar.gbdt import GbdtConfig, gbdt_scores, gbdt_train
from tinyhar.mlp import mlp_forward, mlp_init
from tinyhar.modelpack import (
    MAGIC,
    AccountingModel,
    Budget,
    FootprintReport,
    audit,
    channels_used,
    decode,
    describe,
    encode,
    footprint,
    payload_length,
)


def tiny_forest(n_features=4, n_classes=3, rounds=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(90, n_features))
    y = rng.integers(0, n_classes, 90)
    y[:30] = (X[:30, 0] > 0).astype(int)  # keep it learnable but nontrivial
    return gbdt_train(
        (X, y),
        hyper=GbdtConfig(n_rounds=rounds, max_depth=3),
        feature_mask=FeatureMask(tuple(range(n_features))),
        n_classes=n_classes,
    )


class TestRoundtrip:
    def test_mlp_bytes_stable(self):
        m = mlp_init((78, 64, 32, 24), seed=1)
        # emulate the float32 rounding the trainer applies
        m.weights = [w.astype(np.float32).astype(float) for w in m.weights]
        m.biases = [b.astype(np.float32).astype(float) for b in m.biases]
        raw = encode(m)
        again = encode(decode(raw))
        assert raw == again

    def test_mlp_predicts_identically(self):
        m = mlp_init((10, 8, 4), seed=2, feature_mask=FeatureMask(tuple(range(10))))
        m.weights = [w.astype(np.float32).astype(float) for w in m.weights]
        m.biases = [b.astype(np.float32).astype(float) for b in m.biases]
        back = decode(encode(m))
        X = np.random.default_rng(0).normal(size=(50, 10))
        assert np.array_equal(mlp_forward(m, X), mlp_forward(back, X))

    def test_forest_bytes_stable(self):
        f = tiny_forest()
        raw = encode(f)
        assert raw == encode(decode(raw))

    def test_forest_predicts_identically(self):
        f = tiny_forest()
        back = decode(encode(f))
        X = np.random.default_rng(1).normal(size=(50, 4))
        assert np.array_equal(gbdt_scores(f, X), gbdt_scores(back, X))

    def test_header_fields_survive(self):
        m = mlp_init((78, 16, 5), seed=0)
        back = decode(encode(m))
        assert back.dims == (78, 16, 5)
        assert back.manifest_version == m.manifest_version
        assert back.ma_width == m.ma_width
        assert back.feature_mask == m.feature_mask

    def test_partial_mask_survives(self):
        mask = FeatureMask((0, 5, 13, 40, 77))
        m = mlp_init((5, 4, 3), seed=0, feature_mask=mask)
        assert decode(encode(m)).feature_mask == mask


class TestCorruption:
    def test_every_single_byte_flip_detected_or_harmless(self):
        m = mlp_init((6, 5, 3), seed=3, feature_mask=FeatureMask(tuple(range(6))))
        m.weights = [w.astype(np.float32).astype(float) for w in m.weights]
        m.biases = [b.astype(np.float32).astype(float) for b in m.biases]
        raw = bytearray(encode(m))
        for i in range(len(raw)):
            corrupted = bytearray(raw)
            corrupted[i] ^= 0xFF
            with pytest.raises(
                (BadMagic, ChecksumMismatch, UnsupportedVersion, StructuralInvariantViolated)
            ):
                decode(bytes(corrupted))

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode(b"NOPE" + b"\x00" * 40)

    def test_truncated_stream(self):
        raw = encode(mlp_init((4, 3), feature_mask=FeatureMask((0, 1, 2, 3))))
        with pytest.raises((UnsupportedVersion, ChecksumMismatch)):
            decode(raw[:10])

    def test_future_version_rejected(self):
        raw = bytearray(encode(mlp_init((4, 3), feature_mask=FeatureMask((0, 1, 2, 3)))))
        raw[4] = 9  # format version byte
        body = bytes(raw[:-4])
        import zlib

        patched = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(UnsupportedVersion):
            decode(patched)

    def test_trailing_garbage_detected(self):
        import zlib

        raw = encode(mlp_init((4, 3), feature_mask=FeatureMask((0, 1, 2, 3))))
        body = raw[:-4] + b"\x00\x00"
        patched = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(StructuralInvariantViolated):
            decode(patched)

    def test_mask_popcount_mismatch(self):
        m = mlp_init((5, 4, 3), feature_mask=FeatureMask((0, 1, 2, 3)))  # 4 != 5
        with pytest.raises(StructuralInvariantViolated):
            encode(m)


class TestPayloadLength:
    def test_mlp_hand_count(self):
        m = mlp_init((78, 64, 32, 24))
        # layer count byte + 4 u16 dims + 7928 float32 parameters
        assert payload_length(m) == 1 + 2 * 4 + 4 * 7928

    def test_forest_hand_count(self):
        f = tiny_forest()
        n_leaf = sum(1 for t in f.trees for n in t.nodes if n.is_leaf)
        n_internal = sum(1 for t in f.trees for n in t.nodes if not n.is_leaf)
        # rounds u16 + shrinkage f32 + base f32, per tree a u16 count,
        # 5 bytes per leaf record, 10 per internal record
        expected = 10 + 2 * len(f.trees) + 5 * n_leaf + 10 * n_internal
        assert payload_length(f) == expected

    def test_pack_equals_header_payload_crc(self):
        m = mlp_init((5, 4, 3), feature_mask=FeatureMask(tuple(range(5))))
        raw = encode(m)
        assert len(raw) == 4 + 9 + 10 + payload_length(m) + 4
        assert raw[:4] == MAGIC


class TestFootprint:
    def test_mlp_stack_hand_computed(self):
        m = mlp_init((78, 64, 32, 24))
        rep = footprint(m)
        # features 78*4 + ping-pong 2*78*4 + scratch 64
        assert rep.stack_bytes == 78 * 4 + 2 * 78 * 4 + 64 == 1000

    def test_reduced_forest_stack_hand_computed(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 16))
        y = rng.integers(0, 24, 200)
        mask = FeatureMask(tuple(range(16)))
        f = gbdt_train(
            (X, y), hyper=GbdtConfig(n_rounds=2, max_depth=2),
            feature_mask=mask, n_classes=24,
        )
        rep = footprint(f)
        # features 16*4 + scores 24*4 + scratch 64
        assert rep.stack_bytes == 16 * 4 + 24 * 4 + 64 == 224

    def test_program_is_payload_plus_overhead(self):
        m = mlp_init((10, 8, 4), feature_mask=FeatureMask(tuple(range(10))))
        rep = footprint(m)
        assert rep.program_bytes == payload_length(m) + 4096

    def test_data_scales_with_channels_used(self):
        full = mlp_init((78, 8, 4))
        rep = footprint(full)
        assert rep.data_bytes == 39 * 6 * 4
        acc_only = mlp_init((13, 8, 4), feature_mask=FeatureMask(tuple(range(13))))
        assert footprint(acc_only).data_bytes == 39 * 1 * 4

    def test_program_monotone_in_model_size(self):
        small = mlp_init((10, 4, 3), feature_mask=FeatureMask(tuple(range(10))))
        big = mlp_init((10, 64, 3), feature_mask=FeatureMask(tuple(range(10))))
        assert footprint(big).program_bytes > footprint(small).program_bytes

    def test_stack_monotone_in_width(self):
        narrow = mlp_init((10, 8, 3), feature_mask=FeatureMask(tuple(range(10))))
        wide = mlp_init((10, 200, 3), feature_mask=FeatureMask(tuple(range(10))))
        assert footprint(wide).stack_bytes > footprint(narrow).stack_bytes

    def test_breakdown_sums(self):
        m = mlp_init((20, 10, 4), feature_mask=FeatureMask(tuple(range(20))))
        rep = footprint(m)
        b = rep.breakdown
        assert rep.stack_bytes == b["feature_buffer"] + b["working_buffers"] + b["scratch"]
        assert rep.program_bytes == b["model_payload"] + b["code_overhead"]
        assert rep.data_bytes == b["window_buffer"]

    def test_channels_used(self):
        assert channels_used(FeatureMask.full()) == 6
        assert channels_used(FeatureMask((0, 12))) == 1
        assert channels_used(FeatureMask((0, 13, 77))) == 3


class TestAudit:
    def _report(self, stack, program, data):
        return FootprintReport(stack, program, data, {})

    def test_exactly_at_budget_passes(self):
        result = audit(self._report(850, 32768, 8192), Budget())
        assert result.passed and result.violations == {}

    def test_one_byte_over_fails(self):
        result = audit(self._report(851, 32768, 8192), Budget())
        assert not result.passed
        assert result.violations == {"stack": 1}

    def test_multiple_violations_reported(self):
        result = audit(self._report(900, 40000, 9000), Budget())
        assert set(result.violations) == {"stack", "program", "data"}
        assert result.violations["program"] == 40000 - 32768

    def test_default_mlp_busts_stack_and_program(self):
        m = mlp_init((78, 64, 32, 24))
        result = audit(footprint(m), Budget())
        # full-width network: stack 1000 > 850 and the 32-bit parameter
        # payload plus code overhead exceeds the 32 KiB program budget
        assert result.violations["stack"] == 1000 - 850
        assert result.violations["program"] == (1 + 8 + 4 * 7928 + 4096) - 32768

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            Budget(max_stack=0)


class TestDescribe:
    def test_contains_key_facts(self):
        m = mlp_init((78, 64, 32, 24), seed=0)
        m.weights = [w.astype(np.float32).astype(float) for w in m.weights]
        m.biases = [b.astype(np.float32).astype(float) for b in m.biases]
        text = describe(encode(m))
        assert "kind: MLP" in text
        assert "n_inputs: 78" in text
        assert "n_classes: 24" in text
        assert "stack_bytes: 1000" in text
