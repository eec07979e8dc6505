import numpy as np
import pytest

from tinyhar.dataset import UNCLASSIFIED
from tinyhar.errors import InvalidArgument, TrainFnNondeterministic
from tinyhar.evaluation import ConfusionMatrix
from tinyhar.injection import (
    InjectionState,
    MergePolicy,
    assess_overlap,
    inject_step,
    run_injection,
)


def scripted_cm(classes, confusions=(), n_per=10):
    """Diagonal confusion with scripted (true, predicted, count) entries."""
    n = len(classes)
    counts = np.eye(n, dtype=int) * n_per
    for a, b, c in confusions:
        i, j = classes.index(a), classes.index(b)
        counts[i, j] += c
        counts[i, i] -= c
    return ConfusionMatrix(counts, tuple(classes))


def stub_train_fn(confusions_for):
    """train_fn whose confusion structure is a pure function of the class set."""

    def fn(classes, seed):
        return object(), scripted_cm(list(classes), confusions_for(classes))

    return fn


clean_fn = stub_train_fn(lambda classes: [])


class TestAssessOverlap:
    def test_no_confusion(self):
        cm = scripted_cm(["A", "B", "New"])
        assert assess_overlap(cm, "New") == set()

    def test_forward_direction(self):
        # New predicted as A 20% of the time: rate 0.2 >= tau 0.15
        cm = scripted_cm(["A", "B", "New"], [("New", "A", 2)])
        assert assess_overlap(cm, "New") == {"A"}

    def test_reverse_direction(self):
        # A predicted as New counts too (symmetric test)
        cm = scripted_cm(["A", "B", "New"], [("A", "New", 2)])
        assert assess_overlap(cm, "New") == {"A"}

    def test_below_tau_ignored(self):
        cm = scripted_cm(["A", "B", "New"], [("New", "A", 1)])  # rate 0.1
        assert assess_overlap(cm, "New") == set()

    def test_exactly_tau_counts(self):
        cm = scripted_cm(["A", "New"], [("New", "A", 3)], n_per=20)  # rate 0.15
        assert assess_overlap(cm, "New", tau=0.15) == {"A"}

    def test_unclassified_excluded(self):
        cm = scripted_cm(["A", UNCLASSIFIED, "New"], [("New", UNCLASSIFIED, 5)])
        assert assess_overlap(cm, "New") == set()

    def test_two_overlaps(self):
        cm = scripted_cm(
            ["A", "B", "C", "New"], [("New", "A", 2), ("B", "New", 2)]
        )
        assert assess_overlap(cm, "New") == {"A", "B"}

    def test_bad_tau(self):
        cm = scripted_cm(["A", "New"])
        with pytest.raises(InvalidArgument):
            assess_overlap(cm, "New", tau=0.0)
        with pytest.raises(InvalidArgument):
            assess_overlap(cm, "New", tau=1.0)


class TestInjectStep:
    def test_accept_when_clean(self):
        state = InjectionState(("A", "B"))
        record, state = inject_step(state, "C", MergePolicy(), clean_fn)
        assert record.decision == "accepted"
        assert state.active == ("A", "B", "C")

    def test_merge_with_policy(self):
        fn = stub_train_fn(
            lambda classes: [("New", "A", 3)] if "New" in classes else []
        )
        policy = MergePolicy.from_pairs([("New", "A", "AM")])
        state = InjectionState(("A", "B"))
        record, state = inject_step(state, "New", policy, fn)
        assert record.decision == "merged"
        assert "AM" in record.detail
        assert state.active == ("AM", "B")
        assert state.merges == [("New", "A", "AM")]

    def test_single_overlap_no_policy_discards(self):
        fn = stub_train_fn(
            lambda classes: [("New", "A", 3)] if "New" in classes else []
        )
        state = InjectionState(("A", "B"))
        record, state = inject_step(state, "New", MergePolicy(), fn)
        assert record.decision == "discarded"
        assert state.active == ("A", "B")
        assert "New" in state.discarded

    def test_double_overlap_discards_despite_policy(self):
        fn = stub_train_fn(
            lambda classes: [("New", "A", 3), ("New", "B", 3)]
            if "New" in classes
            else []
        )
        policy = MergePolicy.from_pairs([("New", "A", "AM"), ("New", "B", "BM")])
        state = InjectionState(("A", "B", "C"))
        record, state = inject_step(state, "New", policy, fn)
        assert record.decision == "discarded"
        assert record.overlap == ("A", "B")
        assert state.active == ("A", "B", "C")

    def test_duplicate_candidate_rejected(self):
        state = InjectionState(("A", "B"))
        with pytest.raises(InvalidArgument):
            inject_step(state, "A", MergePolicy(), clean_fn)

    def test_determinism_verification(self):
        calls = {"n": 0}

        def flaky(classes, seed):
            calls["n"] += 1
            conf = [("C", "A", 2)] if calls["n"] % 2 == 0 else []
            return object(), scripted_cm(list(classes), conf)

        state = InjectionState(("A", "B"))
        with pytest.raises(TrainFnNondeterministic):
            inject_step(state, "C", MergePolicy(), flaky, verify_determinism=True)


class TestRunInjection:
    def test_scripted_sequence(self):
        """Accept one, merge one, discard one; final count checks out."""

        def confusions(classes):
            out = []
            if "Twin" in classes and "A" in classes:
                out.append(("Twin", "A", 5))
            if "Amb" in classes:
                for parent in ("B", "C"):
                    if parent in classes:
                        out.append(("Amb", parent, 3))
            return out

        policy = MergePolicy.from_pairs([("Twin", "A", "AM")])
        report = run_injection(
            ("A", "B", "C"),
            ("D", "Twin", "Amb"),
            policy,
            stub_train_fn(confusions),
        )
        decisions = {s.candidate: s.decision for s in report.steps}
        assert decisions == {"D": "accepted", "Twin": "merged", "Amb": "discarded"}
        assert report.final_classes == ("AM", "B", "C", "D")

    def test_deterministic_across_runs(self):
        a = run_injection(("A", "B"), ("C", "D"), MergePolicy(), clean_fn)
        b = run_injection(("A", "B"), ("C", "D"), MergePolicy(), clean_fn)
        assert a.final_classes == b.final_classes
        assert [s.decision for s in a.steps] == [s.decision for s in b.steps]

    def test_report_text(self):
        report = run_injection(("A", "B"), ("C",), MergePolicy(), clean_fn)
        text = report.to_text()
        assert "final classes (3)" in text
        assert "C: accepted" in text

    def test_needs_two_seed_classes(self):
        with pytest.raises(InvalidArgument):
            run_injection(("A",), ("B",), MergePolicy(), clean_fn)

    def test_candidates_disjoint(self):
        with pytest.raises(InvalidArgument):
            run_injection(("A", "B"), ("A",), MergePolicy(), clean_fn)


class TestMergePolicy:
    def test_unordered_lookup(self):
        policy = MergePolicy.from_pairs([("X", "Y", "XY")])
        assert policy.merged_name("X", "Y") == "XY"
        assert policy.merged_name("Y", "X") == "XY"
        assert policy.merged_name("X", "Z") is None

    def test_save_load_roundtrip(self, tmp_path):
        policy = MergePolicy.from_pairs([("X", "Y", "XY"), ("P", "Q", "PQ")])
        path = tmp_path / "policy.txt"
        policy.save(path)
        assert MergePolicy.load(path) == policy

    def test_load_with_comments(self, tmp_path):
        path = tmp_path / "policy.txt"
        path.write_text("# merges\nA + B -> AB  # twin pair\n\n")
        assert MergePolicy.load(path).merged_name("B", "A") == "AB"

    def test_load_bad_line(self, tmp_path):
        path = tmp_path / "policy.txt"
        path.write_text("A B AB\n")
        with pytest.raises(InvalidArgument):
            MergePolicy.load(path)
