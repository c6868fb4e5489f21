import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procflow.corpus import FrameManifest, SegmentAnnotation
from procflow.errors import AuthorizationError, NotFoundError, ValidationError
from procflow.providers import ScriptedVisionProvider
from procflow.verify import (
    ReviewItem,
    SessionStore,
    VerificationRecord,
    auto_verify,
    create_review_session,
    parse_yes_no,
    record_verdict,
    sample_frame_indices,
    session_accuracy,
    verification_statistics,
)


class TestSampleFrameIndices:
    def test_all_when_under_limit(self):
        assert sample_frame_indices(10, 20) == list(range(10))

    def test_even_spacing(self):
        assert sample_frame_indices(21, 5) == [0, 5, 10, 15, 20]

    def test_single_frame(self):
        assert sample_frame_indices(1) == [0]

    def test_invalid_max(self):
        with pytest.raises(ValidationError):
            sample_frame_indices(10, 0)

    @given(st.integers(1, 500), st.integers(1, 40))
    @settings(max_examples=100)
    def test_strictly_increasing_and_bounded(self, frame_count, max_frames):
        indices = sample_frame_indices(frame_count, max_frames)
        assert len(indices) <= max_frames
        assert all(b > a for a, b in zip(indices, indices[1:]))
        assert indices[0] == 0 and indices[-1] <= frame_count - 1
        if frame_count > max_frames > 1:
            assert indices[-1] == frame_count - 1


def _segment():
    return SegmentAnnotation("v1", 0, 10, (), (), ("stirring rice",))


def _manifest(frame_count=10):
    return FrameManifest("v1", fps=1.0, frames=tuple(f"f{i}.png" for i in range(frame_count)))


class TestAutoVerify:
    def test_yes_is_correct(self):
        vision = ScriptedVisionProvider({"The action to verify is": "yes"})
        record = auto_verify(_segment(), "stirring rice", vision, _manifest())
        assert record.status == "Correct"

    def test_no_with_punctuation_is_incorrect(self):
        vision = ScriptedVisionProvider({"The action to verify is": "No."})
        record = auto_verify(_segment(), "stirring rice", vision, _manifest())
        assert record.status == "Incorrect"

    def test_prose_is_error(self):
        vision = ScriptedVisionProvider({"The action to verify is": "The action is visible"})
        record = auto_verify(_segment(), "stirring rice", vision, _manifest())
        assert record.status == "Error"

    def test_prompt_contains_action(self):
        vision = ScriptedVisionProvider({"The action to verify is": "yes"})
        auto_verify(_segment(), "pouring ghee over rice", vision, _manifest())
        assert "'pouring ghee over rice'" in vision.calls[0]

    def test_frame_sampling_respects_cap(self):
        captured = {}

        class CountingVision:
            def vision_analyze(self, frames, prompt):
                captured["count"] = len(frames)
                return "yes"

        segment = SegmentAnnotation("v1", 0, 30, (), (), ("x",))
        auto_verify(segment, "x", CountingVision(), _manifest(30), max_frames=20)
        assert captured["count"] == 20

    def test_parse_rules(self):
        assert parse_yes_no(" Yes ") == "Correct"
        assert parse_yes_no('"no"') == "Incorrect"
        assert parse_yes_no("yes indeed") == "Error"
        assert parse_yes_no("") == "Error"


def records(correct, incorrect, errors=0, biryani=""):
    out = []
    out += [VerificationRecord("s", "a", "Correct", "yes", biryani) for _ in range(correct)]
    out += [VerificationRecord("s", "a", "Incorrect", "no", biryani) for _ in range(incorrect)]
    out += [VerificationRecord("s", "a", "Error", "?", biryani) for _ in range(errors)]
    return out


class TestVerificationStatistics:
    def test_reference_accounting(self):
        stats = verification_statistics(records(11295, 3175))
        assert stats["correct"] == 11295 and stats["incorrect"] == 3175
        # the rounded report sits exactly at the 0.01 boundary; the epsilon
        # only absorbs float representation error in the comparison itself
        assert abs(stats["correct_pct"] - 78.05) <= 0.01 + 1e-9
        assert abs(stats["incorrect_pct"] - 21.95) <= 0.01 + 1e-9
        assert abs(stats["correct_pct"] + stats["incorrect_pct"] - 100.0) <= 0.01

    def test_all_correct(self):
        stats = verification_statistics(records(5, 0))
        assert stats["correct_pct"] == 100.0 and stats["incorrect_pct"] == 0.0

    def test_errors_excluded_from_base(self):
        stats = verification_statistics(records(1, 0, errors=1))
        assert stats["correct_pct"] == 100.0
        assert stats["errors"] == 1

    def test_by_type_breakdown(self):
        stats = verification_statistics(records(3, 1, biryani="ambur") + records(1, 1, biryani="donne"))
        assert stats["by_type"]["ambur"]["correct_pct"] == 75.0
        assert stats["by_type"]["donne"]["correct_pct"] == 50.0


def pool(n=10000, detected_every=2):
    return [
        ReviewItem(f"item-{i:05d}", "detected" if i % detected_every == 0 else "no_difference")
        for i in range(n)
    ]


class TestReviewSession:
    def test_round_robin_across_five_annotators(self):
        annotators = [f"a{i}" for i in range(5)]
        session = create_review_session(pool(10000), 2000, annotators, seed=1)
        counts = {a: 0 for a in annotators}
        for item in session.item_ids:
            counts[session.assignments[item]] += 1
        assert all(c == 400 for c in counts.values())

    def test_single_item_single_annotator(self):
        session = create_review_session(pool(5), 1, ["only"], seed=2)
        assert len(session.item_ids) == 1
        assert session.assignments[session.item_ids[0]] == "only"

    def test_same_seed_same_sample(self):
        a = create_review_session(pool(500), 50, ["x"], seed=11)
        b = create_review_session(pool(500), 50, ["x"], seed=11)
        c = create_review_session(pool(500), 50, ["x"], seed=12)
        assert a.item_ids == b.item_ids
        assert a.item_ids != c.item_ids

    def test_oversized_sample_rejected(self):
        with pytest.raises(ValidationError):
            create_review_session(pool(10), 11, ["x"], seed=0)

    def test_no_annotators_rejected(self):
        with pytest.raises(ValidationError):
            create_review_session(pool(10), 5, [], seed=0)


class TestRecordVerdict:
    def _session(self):
        return create_review_session(pool(10), 4, ["a1", "a2"], seed=3)

    def test_assigned_verdict_stored(self):
        session = self._session()
        item = session.item_ids[0]
        ack = record_verdict(session, item, session.assignments[item], "confirmed")
        assert ack["effective"] == "confirmed"
        assert ack["progress"]["done"] == 1

    def test_unassigned_annotator_rejected(self):
        session = self._session()
        item = session.item_ids[0]
        wrong = "a2" if session.assignments[item] == "a1" else "a1"
        with pytest.raises(AuthorizationError):
            record_verdict(session, item, wrong, "confirmed")

    def test_unknown_item_not_found(self):
        session = self._session()
        with pytest.raises(NotFoundError):
            record_verdict(session, "nope", "a1", "confirmed")

    def test_latest_wins_but_log_keeps_history(self):
        session = self._session()
        item = session.item_ids[0]
        annotator = session.assignments[item]
        record_verdict(session, item, annotator, "rejected")
        ack = record_verdict(session, item, annotator, "confirmed")
        assert ack["effective"] == "confirmed"
        assert len(session.verdict_log) == 2
        assert session.effective_verdicts()[item] == "confirmed"

    def test_invalid_verdict(self):
        session = self._session()
        item = session.item_ids[0]
        with pytest.raises(ValidationError):
            record_verdict(session, item, session.assignments[item], "maybe")


class TestSessionAccuracy:
    def _verdicted_session(self, detected_confirm, detected_reject, none_confirm, none_reject):
        total = detected_confirm + detected_reject + none_confirm + none_reject
        items = [
            ReviewItem(f"d{i}", "detected") for i in range(detected_confirm + detected_reject)
        ] + [ReviewItem(f"n{i}", "no_difference") for i in range(none_confirm + none_reject)]
        session = create_review_session(items, total, ["a"], seed=0)
        for i in range(detected_confirm):
            record_verdict(session, f"d{i}", "a", "confirmed")
        for i in range(detected_confirm, detected_confirm + detected_reject):
            record_verdict(session, f"d{i}", "a", "rejected")
        for i in range(none_confirm):
            record_verdict(session, f"n{i}", "a", "confirmed")
        for i in range(none_confirm, none_confirm + none_reject):
            record_verdict(session, f"n{i}", "a", "rejected")
        return session

    def test_reference_split(self):
        session = self._verdicted_session(675, 325, 457, 543)
        table = session_accuracy(session)
        assert table["detected"]["correct_pct"] == 67.5
        assert table["detected"]["incorrect_pct"] == 32.5
        assert table["no_difference"]["correct_pct"] == 45.7
        assert table["no_difference"]["incorrect_pct"] == 54.3

    def test_all_unsure(self):
        items = [ReviewItem(f"d{i}", "detected") for i in range(4)]
        session = create_review_session(items, 4, ["a"], seed=0)
        for item in session.item_ids:
            record_verdict(session, item, "a", "unsure")
        table = session_accuracy(session)
        assert table["detected"]["correct_pct"] is None
        assert table["detected"]["unsure"] == 4


class TestSessionStore:
    def test_persist_and_reload(self, tmp_path):
        store = SessionStore(tmp_path)
        session = create_review_session(pool(20), 6, ["a1", "a2"], seed=5)
        store.save(session)
        item = session.item_ids[0]
        store.record(session.session_id, item, session.assignments[item], "rejected")
        store.record(session.session_id, item, session.assignments[item], "confirmed")
        loaded = store.load(session.session_id)
        assert loaded.effective_verdicts()[item] == "confirmed"
        assert len(loaded.verdict_log) == 2
        assert store.list_sessions() == [session.session_id]

    def test_unknown_session(self, tmp_path):
        with pytest.raises(NotFoundError):
            SessionStore(tmp_path).load("missing")
