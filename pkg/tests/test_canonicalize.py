import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procflow.canonicalize import (
    ActionCluster,
    ClusteringConfig,
    LabeledInterval,
    build_action_index,
    cluster_actions,
    clusters_to_mapping,
    interval_seconds,
    merge_consecutive,
    refine_cluster,
    representative_phrase,
    span_seconds,
)
from procflow.corpus import load_segment_annotations
from procflow.errors import ValidationError
from procflow.fixtures import build_merge_fixture, build_phrase_fixture
from procflow.providers import ScriptedChatProvider, ScriptedEmbeddingProvider

from conftest import EXAMPLE_SEGMENT
from oracles import ConceptEmbeddingProvider, RandomEmbeddingProvider, brute_force_agglomerative


def partition(clusters: list[ActionCluster]) -> set[frozenset[str]]:
    return {frozenset(c.phrases) for c in clusters}


class TestClusterActions:
    def test_single_phrase_is_singleton(self):
        provider = ScriptedEmbeddingProvider({"stirring rice": [1.0, 0.0]})
        clusters = cluster_actions(["stirring rice"], provider)
        assert len(clusters) == 1
        assert clusters[0].canonical_label == "stirring rice"
        assert clusters[0].phrases == ["stirring rice"]

    def test_identical_pair_merges_orthogonal_stays(self):
        provider = ScriptedEmbeddingProvider(
            {"alpha": [1.0, 0.0], "beta": [1.0, 0.0], "gamma": [0.0, 1.0]}
        )
        clusters = cluster_actions(["alpha", "beta", "gamma"], provider)
        assert partition(clusters) == {frozenset({"alpha", "beta"}), frozenset({"gamma"})}

    def test_threshold_is_strict(self):
        # a pair at distance exactly equal to the threshold must NOT merge
        # ("no pair falls below"); orthogonal vectors give an exact 1.0.
        provider = ScriptedEmbeddingProvider({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        at_threshold = cluster_actions(["a", "b"], provider, ClusteringConfig(distance_threshold=1.0))
        assert len(at_threshold) == 2
        above_threshold = cluster_actions(["a", "b"], provider, ClusteringConfig(distance_threshold=1.25))
        assert len(above_threshold) == 1

    def test_matches_brute_force_oracle_on_random_instances(self):
        rng = np.random.default_rng(1234)
        provider = RandomEmbeddingProvider(dim=12, salt=9)
        for trial in range(60):
            n = int(rng.integers(1, 13))
            phrases = [f"phrase {trial}-{i}" for i in range(n)]
            vectors = provider.embed_texts(phrases)
            got = partition(cluster_actions(phrases, provider, ClusteringConfig(0.3)))
            expected = brute_force_agglomerative(phrases, vectors, 0.3)
            assert got == expected

    def test_partition_property(self):
        provider = RandomEmbeddingProvider(dim=8, salt=3)
        phrases = [f"p{i}" for i in range(10)] + ["p3", "p7"]  # duplicates collapse
        clusters = cluster_actions(phrases, provider)
        seen = [p for c in clusters for p in c.phrases]
        assert sorted(seen) == sorted(set(phrases))

    def test_deterministic(self):
        provider = RandomEmbeddingProvider(dim=8, salt=5)
        phrases = [f"act {i}" for i in range(15)]
        first = cluster_actions(phrases, provider)
        second = cluster_actions(list(reversed(phrases)), provider)
        assert [c.phrases for c in first] == [c.phrases for c in second]
        assert [c.canonical_label for c in first] == [c.canonical_label for c in second]

    def test_empty_input(self):
        assert cluster_actions([], RandomEmbeddingProvider()) == []

    def test_large_phrase_fixture_shardwise_oracle_counts(self):
        phrases = build_phrase_fixture()
        assert len(phrases) == 10481
        provider = ConceptEmbeddingProvider()
        for offset in range(0, len(phrases), 50):
            shard = phrases[offset : offset + 50]
            clusters = cluster_actions(shard, provider, ClusteringConfig(0.3))
            expected = brute_force_agglomerative(shard, provider.embed_texts(shard), 0.3)
            assert len(clusters) == len(expected), f"shard at offset {offset}"


class TestRepresentativePhrase:
    def test_singleton(self):
        assert representative_phrase([("stirring rice", np.array([1.0, 0.0]))]) == "stirring rice"

    def test_tie_prefers_shorter(self):
        v = np.array([1.0, 0.0])
        cluster = [("stirring rice and water with a wooden spoon", v), ("stirring rice", v)]
        assert representative_phrase(cluster) == "stirring rice"

    def test_three_member_medoid_matches_hand_computation(self):
        vecs = {
            "a": np.array([1.0, 0.0]),
            "b": np.array([0.8, 0.6]),
            "c": np.array([0.6, 0.8]),
        }
        # mean similarities: a: (1 + .8 + .6)/3 = .8; b: (.8 + 1 + .96)/3 = .92;
        # c: (.6 + .96 + 1)/3 ~ .853 -> medoid is b
        assert representative_phrase(list(vecs.items())) == "b"

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValidationError):
            representative_phrase([])


def interval(vid, start, end, label, seg_id=None):
    return LabeledInterval(seg_id or f"{vid}:{start}", vid, start, end, label)


class TestMergeConsecutive:
    def test_adjacent_same_label_merge(self):
        spans = merge_consecutive(
            [interval("v", 0, 10, "stir"), interval("v", 10, 20, "stir"), interval("v", 20, 30, "fry")]
        )
        assert [(s.start_s, s.end_s, s.canonical_label) for s in spans] == [
            (0, 20, "stir"),
            (20, 30, "fry"),
        ]
        assert spans[0].source_segment_ids == ("v:0", "v:10")

    def test_gap_stays_separate(self):
        spans = merge_consecutive([interval("v", 0, 10, "stir"), interval("v", 20, 30, "stir")])
        assert len(spans) == 2

    def test_adjacent_different_labels_stay_separate(self):
        spans = merge_consecutive([interval("v", 0, 10, "stir"), interval("v", 10, 20, "fry")])
        assert len(spans) == 2

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError, match="overlaps"):
            merge_consecutive([interval("v", 0, 10, "stir"), interval("v", 5, 15, "stir")])

    @given(
        st.lists(
            st.tuples(st.integers(0, 20), st.sampled_from(["stir", "fry", "wash"])),
            min_size=0,
            max_size=12,
        )
    )
    @settings(max_examples=60)
    def test_idempotent_and_coverage_preserving(self, runs):
        # Build a non-overlapping stream: runs laid out left to right with
        # random-ish gaps encoded by the run offsets.
        segments = []
        t = 0
        for gap_choice, label in runs:
            t += 10 * (gap_choice % 2)
            segments.append(interval("v", t, t + 10, label))
            t += 10
        spans = merge_consecutive(segments)
        assert len(spans) <= len(segments)
        assert span_seconds(spans) == interval_seconds(segments)
        again = merge_consecutive(
            [
                LabeledInterval(f"v:{s.start_s}", s.video_id, s.start_s, s.end_s, s.canonical_label)
                for s in spans
            ]
        )
        assert [(s.video_id, s.start_s, s.end_s, s.canonical_label) for s in again] == [
            (s.video_id, s.start_s, s.end_s, s.canonical_label) for s in spans
        ]

    def test_engineered_fixture_counts(self):
        segments = build_merge_fixture()
        assert len(segments) == 16761
        spans = merge_consecutive(segments)
        assert len(spans) == 14479
        assert round(100 * (len(segments) - len(spans)) / len(segments), 1) == 13.6


class TestRefineCluster:
    def _cluster(self, phrases):
        return ActionCluster(canonical_label=phrases[0], phrases=list(phrases))

    def test_no_split_keeps_cluster(self):
        chat = ScriptedChatProvider({"Should these actions be split": '{"should_split": false}'})
        provider = RandomEmbeddingProvider(dim=8)
        outcome = refine_cluster(self._cluster(["a", "b"]), chat, provider)
        assert not outcome.error and not outcome.split
        assert outcome.clusters[0].phrases == ["a", "b"]

    def test_split_reclusters_at_half_threshold(self):
        chat = ScriptedChatProvider({"Should these actions be split": '{"should_split": true}'})
        vectors = {
            "close one": [1.0, 0.0],
            "close two": [1.0, 0.0],
            "far one": [0.0, 1.0],
            "far two": [0.0, 1.0],
        }
        provider = ScriptedEmbeddingProvider(vectors)
        cluster = self._cluster(sorted(vectors))
        outcome = refine_cluster(cluster, chat, provider, ClusteringConfig(0.3))
        expected = brute_force_agglomerative(
            sorted(vectors), provider.embed_texts(sorted(vectors)), 0.15
        )
        assert outcome.split
        assert {frozenset(c.phrases) for c in outcome.clusters} == expected

    def test_unparseable_after_retry_marks_error(self):
        chat = ScriptedChatProvider(
            {"Should these actions be split": ["no json here", "still prose"]}
        )
        outcome = refine_cluster(self._cluster(["a", "b"]), chat, RandomEmbeddingProvider())
        assert outcome.error
        assert outcome.clusters[0].phrases == ["a", "b"]
        assert len(chat.calls) == 2


def test_action_index_export_matches_wire_format(tmp_path):
    path = tmp_path / "video7.json"
    path.write_text(json.dumps([EXAMPLE_SEGMENT]))
    segments = load_segment_annotations(path, "video7")
    provider = RandomEmbeddingProvider(dim=16)
    clusters, label_of = build_action_index(segments, {"video7": "hyderabadi"}, provider)
    mapping = clusters_to_mapping(clusters)
    assert set(label_of) == set(EXAMPLE_SEGMENT["actions"])
    for entry in mapping.values():
        assert set(entry.keys()) == {"phrases", "clips"}
        for clip in entry["clips"]:
            assert set(clip.keys()) == {"url", "timestamp", "biryani", "video"}
            assert clip["video"] == "video7"
            assert clip["biryani"] == "hyderabadi"
            assert clip["timestamp"] == "59-69"
