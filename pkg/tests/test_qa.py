import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procflow.errors import ValidationError
from procflow.providers import ScriptedChatProvider, ScriptedEmbeddingProvider
from procflow.qa import (
    DatasetManifest,
    QAPair,
    apply_curation,
    bertscore,
    bleu,
    dataset_statistics,
    evaluate_run,
    generate_easy,
    generate_hard,
    generate_medium,
    lcs_length,
    read_answers,
    read_manifest,
    rouge_l,
    sample_combos,
    split_dataset,
    write_manifest,
)
from procflow.text import tokenize

from oracles import exhaustive_lcs, greedy_match_scores


class TestBleu:
    def test_identity_is_one(self):
        tokens = tokenize("layering chicken and rice with mint leaves")
        assert bleu(tokens, [tokens]) == pytest.approx(1.0)

    def test_short_identity_is_one(self):
        assert bleu(["mint", "leaves"], [["mint", "leaves"]]) == pytest.approx(1.0)

    def test_disjoint_unigrams_zero(self):
        assert bleu(["ghee"], [["rice", "water"]]) == 0.0

    def test_empty_candidate_zero(self):
        assert bleu([], [["rice"]]) == 0.0

    def test_clipped_repeat_hand_value(self):
        # "the the the" vs "the cat": p1 = 1/3 clipped; smoothed p2 = 1/3,
        # p3 = 1/2, p4 = 1/1; candidate longer than reference, no penalty.
        got = bleu(["the", "the", "the"], [["the", "cat"]])
        expected = (1 / 3 * 1 / 3 * 1 / 2 * 1) ** 0.25
        assert got == pytest.approx(expected, abs=1e-12)

    def test_brevity_penalty_hand_value(self):
        # "the cat sat" vs "the cat ran on mat": p1=2/3, p2=1/2, smoothed
        # p3=1/2, p4=1; c=3 < r=5 -> penalty exp(1 - 5/3).
        got = bleu(tokenize("the cat sat"), [tokenize("the cat ran on mat")])
        expected = (2 / 3 * 1 / 2 * 1 / 2) ** 0.25 * math.exp(1 - 5 / 3)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_requires_reference(self):
        with pytest.raises(ValidationError):
            bleu(["x"], [])


class TestRougeL:
    def test_identity_is_one(self):
        tokens = tokenize("frying onions in ghee")
        assert rouge_l(tokens, tokens) == pytest.approx(1.0)

    def test_reference_case(self):
        got = rouge_l(tokenize("the cat sat"), tokenize("the cat ran on mat"))
        assert got == pytest.approx(0.5, abs=1e-12)

    def test_disjoint_zero(self):
        assert rouge_l(["ghee"], ["rice"]) == 0.0

    def test_empty_zero(self):
        assert rouge_l([], ["rice"]) == 0.0

    @given(
        st.lists(st.sampled_from("abcd"), min_size=0, max_size=8),
        st.lists(st.sampled_from("abcd"), min_size=0, max_size=8),
    )
    @settings(max_examples=150)
    def test_lcs_matches_exhaustive_oracle(self, a, b):
        if a and b:
            assert lcs_length(a, b) == exhaustive_lcs(a, b)


BASIS_VOCAB = ["the", "cat", "sat", "ran", "on", "mat", "ghee", "rice"]
BASIS_PROVIDER = ScriptedEmbeddingProvider(
    {tok: [1.0 if i == j else 0.0 for j in range(len(BASIS_VOCAB))] for i, tok in enumerate(BASIS_VOCAB)}
)


class TestBertscore:
    def test_identity_is_one(self):
        p, r, f1 = bertscore(["the", "cat"], ["the", "cat"], BASIS_PROVIDER)
        assert (p, r, f1) == (pytest.approx(1.0), pytest.approx(1.0), pytest.approx(1.0))

    def test_orthogonal_is_zero(self):
        p, r, f1 = bertscore(["ghee"], ["rice"], BASIS_PROVIDER)
        assert (p, r, f1) == (0.0, 0.0, 0.0)

    def test_hand_case_matches_greedy_oracle(self):
        cand, ref = ["the", "cat"], ["the", "sat", "mat"]
        vecs = {t: BASIS_PROVIDER.embed_texts([t])[0] for t in set(cand + ref)}
        expected = greedy_match_scores([vecs[t] for t in cand], [vecs[t] for t in ref])
        got = bertscore(cand, ref, BASIS_PROVIDER)
        assert got == pytest.approx(expected, abs=1e-12)
        # P: the->1, cat->0 => 1/2. R: the->1, sat->0, mat->0 => 1/3.
        assert got[0] == pytest.approx(0.5)
        assert got[1] == pytest.approx(1 / 3)

    def test_reference_permutation_invariant(self):
        cand, ref = ["the", "cat", "sat"], ["mat", "the", "ran", "cat"]
        a = bertscore(cand, ref, BASIS_PROVIDER)
        b = bertscore(cand, list(reversed(ref)), BASIS_PROVIDER)
        assert a == pytest.approx(b)

    def test_idf_weighting(self):
        # weight "the" at zero: precision becomes the mean over {cat} alone
        got = bertscore(["the", "cat"], ["the", "sat"], BASIS_PROVIDER,
                        idf_weights={"the": 0.0, "cat": 1.0, "sat": 1.0})
        assert got[0] == pytest.approx(0.0)  # cat matches nothing in ref

    def test_baseline_rescaling(self):
        p, r, f1 = bertscore(["the"], ["the"], BASIS_PROVIDER, baseline=0.5)
        assert f1 == pytest.approx(1.0)
        p2, r2, f2 = bertscore(["ghee"], ["rice"], BASIS_PROVIDER, baseline=0.5)
        assert f2 == pytest.approx(-1.0)

    def test_empty_side_zero(self):
        assert bertscore([], ["the"], BASIS_PROVIDER) == (0.0, 0.0, 0.0)


class TestSampleCombos:
    def test_small_pool_all_pairs(self):
        combos = sample_combos([f"v{i}" for i in range(5)], 2, 10, seed=0)
        assert len(combos) == 10
        assert len(set(combos)) == 10

    def test_seed_determinism(self):
        pool = [f"v{i}" for i in range(120)]
        assert sample_combos(pool, 5, 20, seed=9) == sample_combos(pool, 5, 20, seed=9)

    def test_count_beyond_binomial_rejected(self):
        with pytest.raises(ValidationError):
            sample_combos(["a", "b", "c", "d"], 2, 7, seed=0)


def make_pair(i, tier, arity=None, answer="fragrant rice with saffron", split=None):
    vids = [f"v{j}" for j in range(arity)] if arity else ["v0"]
    return QAPair(
        qa_id=f"{tier}{arity or ''}-{i:04d}",
        question="What is shown?",
        answer=answer,
        tier=tier,
        video_ids=vids,
        hard_arity=arity,
        segment_span={"chunk": 0, "start": 0, "end": 10} if tier == "easy" else None,
        split=split,
    )


class TestSplitDataset:
    def test_even_split_240(self):
        pairs = [make_pair(i, "easy") for i in range(240)]
        manifest = split_dataset(pairs, seed=0)
        assert len(manifest.by_split("train")) == 120
        assert len(manifest.by_split("test")) == 120

    def test_single_pair_bucket(self):
        manifest = split_dataset([make_pair(0, "medium")], seed=0)
        sizes = sorted([len(manifest.by_split("train")), len(manifest.by_split("test"))])
        assert sizes == [0, 1]

    def test_odd_bucket_ceil_to_train(self):
        pairs = [make_pair(i, "hard", arity=5) for i in range(87)]
        manifest = split_dataset(pairs, seed=0)
        assert len(manifest.by_split("train")) == 44
        assert len(manifest.by_split("test")) == 43

    def test_bucket_sizes_differ_at_most_one(self):
        pairs = (
            [make_pair(i, "easy") for i in range(7)]
            + [make_pair(i, "medium") for i in range(12)]
            + [make_pair(i, "hard", arity=2) for i in range(3)]
            + [make_pair(i, "hard", arity=4) for i in range(5)]
        )
        manifest = split_dataset(pairs, seed=3)
        for bucket in {p.bucket() for p in pairs}:
            in_bucket = [p for p in manifest.pairs if p.bucket() == bucket]
            train = sum(1 for p in in_bucket if p.split == "train")
            assert abs(train - (len(in_bucket) - train)) <= 1

    def test_same_seed_same_split(self):
        pairs_a = [make_pair(i, "medium") for i in range(31)]
        pairs_b = [make_pair(i, "medium") for i in range(31)]
        split_a = [p.split for p in split_dataset(pairs_a, seed=5).pairs]
        split_b = [p.split for p in split_dataset(pairs_b, seed=5).pairs]
        assert split_a == split_b


class TestDatasetStatistics:
    def test_reference_distribution(self):
        pairs = (
            [make_pair(i, "easy") for i in range(240)]
            + [make_pair(i, "medium") for i in range(1357)]
            + [make_pair(i, "hard", arity=2) for i in range(146)]
            + [make_pair(i, "hard", arity=3) for i in range(171)]
            + [make_pair(i, "hard", arity=4) for i in range(82)]
            + [make_pair(i, "hard", arity=5) for i in range(87)]
        )
        stats = dataset_statistics(DatasetManifest(pairs=pairs))
        assert stats["counts"] == {"easy": 240, "medium": 1357, "hard": 486}
        assert stats["hard_counts"] == {"hardqa2": 146, "hardqa3": 171, "hardqa4": 82, "hardqa5": 87}
        assert stats["tier_pct"] == {"easy": 11.5, "medium": 65.1, "hard": 23.3}
        # 99.9 sits exactly at the 0.1 boundary; epsilon covers float noise only
        assert abs(sum(stats["tier_pct"].values()) - 100.0) <= 0.1 + 1e-9

    def test_empty_manifest(self):
        stats = dataset_statistics(DatasetManifest())
        assert stats["counts"] == {} and stats["tier_pct"] == {}

    def test_answer_lengths_increase_with_difficulty(self):
        pairs = (
            [make_pair(i, "easy", answer=" ".join(["w"] * 12)) for i in range(4)]
            + [make_pair(i, "medium", answer=" ".join(["w"] * 16)) for i in range(4)]
            + [make_pair(i, "hard", arity=2, answer=" ".join(["w"] * 20)) for i in range(4)]
        )
        stats = dataset_statistics(DatasetManifest(pairs=pairs))
        lengths = stats["mean_answer_words"]
        assert lengths == {"easy": 12.0, "medium": 16.0, "hard": 20.0}
        assert lengths["easy"] < lengths["medium"] < lengths["hard"]


EASY_RESPONSE = "1. mint leaves, ghee\n2. metal cup\n3. pouring ghee over rice\n"


class TestGenerateEasy:
    def _segments(self, n):
        return [(i, (10 * i, 10 * i + 10), f"description of chunk {i}") for i in range(n)]

    def test_three_pairs_per_segment(self):
        chat = ScriptedChatProvider({"Video segment description": EASY_RESPONSE})
        pairs = generate_easy("v1", self._segments(1), chat, seed=0)
        assert len(pairs) == 3
        assert [p.answer for p in pairs] == ["mint leaves, ghee", "metal cup", "pouring ghee over rice"]
        assert all(p.tier == "easy" and not p.curated for p in pairs)
        assert pairs[0].segment_span == {"chunk": 0, "start": 0, "end": 10}

    def test_single_segment_video_samples_one(self):
        chat = ScriptedChatProvider({"Video segment description": EASY_RESPONSE})
        pairs = generate_easy("v1", self._segments(1), chat, seed=7)
        assert {p.segment_span["chunk"] for p in pairs} == {0}

    def test_samples_at_most_three_segments(self):
        chat = ScriptedChatProvider({"Video segment description": EASY_RESPONSE})
        pairs = generate_easy("v1", self._segments(10), chat, seed=0)
        assert len({p.segment_span["chunk"] for p in pairs}) == 3

    def test_unparseable_segment_skipped(self, caplog):
        chat = ScriptedChatProvider({"Video segment description": "no numbered answers"})
        with caplog.at_level("WARNING"):
            pairs = generate_easy("v1", self._segments(1), chat, seed=0)
        assert pairs == []
        assert any("skipped" in r.message for r in caplog.records)

    def test_curation_keeps_two_per_video(self):
        chat = ScriptedChatProvider({"Video segment description": EASY_RESPONSE})
        all_pairs = []
        keep = []
        for v in range(120):
            pairs = generate_easy(f"v{v:03d}", self._segments(3), chat, seed=v)
            all_pairs.extend(pairs)
            keep.extend(p.qa_id for p in pairs[:2])
        curated = apply_curation(all_pairs, keep)
        assert len(curated) == 240
        assert all(p.curated for p in curated)


MEDIUM_RESPONSE = json.dumps(
    {
        "Summary": "a full walkthrough",
        "QA_pairs": [
            {"Q": "What meat is used?", "A": "chicken"},
            {"Q": "What vessel is used?", "A": "clay pot"},
            {"Q": "First step?", "A": "soaking rice"},
            {"Q": "Garnish?", "A": "fried onions"},
        ],
    }
)


class TestGenerateMedium:
    def test_parses_four_pairs(self):
        chat = ScriptedChatProvider({"Video description:": MEDIUM_RESPONSE})
        pairs = generate_medium("v1", "summary text", "transcript text", chat)
        assert len(pairs) == 4
        assert all(p.tier == "medium" and p.video_ids == ["v1"] for p in pairs)

    def test_missing_summary_retry_then_flag(self):
        bad = json.dumps({"QA_pairs": [{"Q": "q", "A": "a"}]})
        chat = ScriptedChatProvider({"Video description:": bad})
        with pytest.raises(ValidationError, match="after retry"):
            generate_medium("v1", "summary", "transcript", chat)
        assert len(chat.calls) == 2

    def test_retry_recovers(self):
        chat = ScriptedChatProvider({"Video description:": ["garbage", MEDIUM_RESPONSE]})
        pairs = generate_medium("v1", "summary", "transcript", chat)
        assert len(pairs) == 4


class TestGenerateHard:
    def test_arity_two(self):
        chat = ScriptedChatProvider({"Video summaries:": MEDIUM_RESPONSE})
        pairs = generate_hard({"v1": "s1", "v2": "s2"}, ["v1", "v2"], chat)
        assert all(p.hard_arity == 2 and p.video_ids == ["v1", "v2"] for p in pairs)

    def test_arity_bounds(self):
        chat = ScriptedChatProvider({})
        summaries = {f"v{i}": "s" for i in range(8)}
        with pytest.raises(ValidationError, match="2-5"):
            generate_hard(summaries, [f"v{i}" for i in range(6)], chat)
        with pytest.raises(ValidationError, match="2-5"):
            generate_hard(summaries, ["v1"], chat)

    def test_missing_summary_rejected(self):
        chat = ScriptedChatProvider({})
        with pytest.raises(ValidationError, match="missing"):
            generate_hard({"v1": "s"}, ["v1", "v9"], chat)


class TestEvaluateRun:
    def _manifest(self):
        pairs = [
            make_pair(0, "easy", answer="golden fried onions", split="test"),
            make_pair(1, "easy", answer="the mat", split="test"),
            make_pair(2, "medium", answer="the cat ran on mat", split="test"),
            make_pair(3, "hard", arity=2, answer="the cat sat", split="test"),
            make_pair(4, "medium", answer="train only answer", split="train"),
        ]
        return DatasetManifest(pairs=pairs)

    def _provider(self):
        vocab = ["golden", "fried", "onions", "the", "cat", "sat", "ran", "on", "mat", "ghee"]
        return ScriptedEmbeddingProvider(
            {t: [1.0 if i == j else 0.0 for j in range(len(vocab))] for i, t in enumerate(vocab)}
        )

    def test_identical_answers_score_one(self):
        manifest = self._manifest()
        answers = {p.qa_id: p.answer for p in manifest.by_split("test")}
        report = evaluate_run(answers, manifest, self._provider())
        for tier_scores in report["overall"].values():
            for value in tier_scores.values():
                assert value == pytest.approx(1.0)
        assert report["hard_breakdown"]["hard2"]["bleu"] == pytest.approx(1.0)

    def test_golden_hand_computed_report(self):
        manifest = self._manifest()
        answers = {
            "easy-0000": "golden fried onions",  # exact: 1.0 everywhere
            "easy-0001": "ghee",                 # disjoint: 0.0 everywhere
            "medium-0002": "the cat sat",        # brevity-penalty BLEU, rouge 0.5
            "hard2-0003": "the cat sat",         # exact
        }
        report = evaluate_run(answers, manifest, self._provider())
        medium_bleu = (2 / 3 * 1 / 2 * 1 / 2) ** 0.25 * math.exp(1 - 5 / 3)
        golden = {
            "easy": {"bleu": 0.5, "rouge_l": 0.5, "bertscore": 0.5},
            "medium": {"bleu": medium_bleu, "rouge_l": 0.5, "bertscore": 0.5},
            "hard": {"bleu": 1.0, "rouge_l": 1.0, "bertscore": 1.0},
        }
        for tier, expected in golden.items():
            for metric, value in expected.items():
                assert report["overall"][tier][metric] == pytest.approx(value, abs=1e-12)
        assert report["hard_breakdown"].keys() == {"hard2"}

    def test_missing_answers_listed(self):
        manifest = self._manifest()
        with pytest.raises(ValidationError, match="easy-0001"):
            evaluate_run({"easy-0000": "x"}, manifest, self._provider())

    def test_absent_tiers_not_reported(self):
        manifest = DatasetManifest(pairs=[make_pair(0, "easy", answer="the cat", split="test")])
        report = evaluate_run({"easy-0000": "the cat"}, manifest, self._provider())
        assert set(report["overall"].keys()) == {"easy"}
        assert report["hard_breakdown"] == {}


def test_manifest_round_trip(tmp_path):
    pairs = [
        make_pair(0, "easy", split="train"),
        make_pair(1, "medium", split="test"),
        make_pair(2, "hard", arity=3, split="test"),
    ]
    path = tmp_path / "manifest.jsonl"
    write_manifest(pairs, path, meta={"config_hash": "abc"})
    loaded = read_manifest(path)
    assert [p.to_dict() for p in loaded.pairs] == [p.to_dict() for p in pairs]
    lines = path.read_text().strip().splitlines()
    assert json.loads(lines[0]) == {"_meta": {"config_hash": "abc"}}
    row = json.loads(lines[2])
    assert set(row).issuperset({"id", "tier", "video_ids", "question", "answer", "split"})


def test_read_answers_rejects_duplicates(tmp_path):
    path = tmp_path / "answers.jsonl"
    path.write_text('{"id": "a", "answer": "x"}\n{"id": "a", "answer": "y"}\n')
    with pytest.raises(ValidationError, match="duplicate"):
        read_answers(path)


def test_qapair_invariants():
    with pytest.raises(ValidationError):
        QAPair("x", "q", "a", "hard", ["v1"], hard_arity=None)
    with pytest.raises(ValidationError):
        QAPair("x", "q", "a", "hard", ["v1", "v2", "v3"], hard_arity=2)
    with pytest.raises(ValidationError):
        QAPair("x", "q", "", "medium", ["v1"])
    with pytest.raises(ValidationError):
        QAPair("x", "q", "a", "easy", ["v1"])  # no segment span
