"""Tiered QA generation, dataset management, and answer evaluation.

Tiers: easy questions ground in one short segment, medium in a whole
video, hard in 2-5 videos. Evaluation scores model answers with BLEU,
ROUGE-L, and an embedding-based greedy token-matching F1.
"""
from __future__ import annotations

import json
import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .prompts import (
    EASY_QA_PROMPT,
    EASY_QA_QUESTIONS,
    HARD_QA_PROMPT,
    HARD_QA_TEMPLATES,
    MEDIUM_QA_PROMPT,
    MEDIUM_QA_TEMPLATES,
    parse_strict_json,
)
from .providers import ChatProvider, EmbeddingProvider
from .text import tokenize

log = logging.getLogger(__name__)

TIERS = ("easy", "medium", "hard")
EASY_CATEGORIES = ("ingredients", "utensils", "actions")


@dataclass
class QAPair:
    qa_id: str
    question: str
    answer: str
    tier: str
    video_ids: list[str]
    hard_arity: int | None = None
    segment_span: dict | None = None  # {"chunk": int, "start": int, "end": int}
    curated: bool = True
    split: str | None = None  # train | test

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValidationError(f"unknown tier {self.tier!r}")
        if not self.answer:
            raise ValidationError(f"{self.qa_id}: answer must be nonempty")
        if self.tier == "hard":
            if self.hard_arity is None or not 2 <= self.hard_arity <= 5:
                raise ValidationError(f"{self.qa_id}: hard pairs need arity 2-5")
            if len(self.video_ids) != self.hard_arity:
                raise ValidationError(f"{self.qa_id}: video count must equal hard arity")
        elif len(self.video_ids) != 1:
            raise ValidationError(f"{self.qa_id}: {self.tier} pairs span exactly one video")
        if self.tier == "easy" and self.segment_span is None:
            raise ValidationError(f"{self.qa_id}: easy pairs carry a segment span")

    def bucket(self) -> tuple[str, int | None]:
        return (self.tier, self.hard_arity)

    def to_dict(self) -> dict:
        out = {
            "id": self.qa_id,
            "tier": self.tier,
            "video_ids": list(self.video_ids),
            "question": self.question,
            "answer": self.answer,
            "split": self.split,
        }
        if self.hard_arity is not None:
            out["hard_arity"] = self.hard_arity
        if self.segment_span is not None:
            out["segment_span"] = dict(self.segment_span)
        if not self.curated:
            out["curated"] = False
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "QAPair":
        return cls(
            qa_id=data["id"],
            question=data["question"],
            answer=data["answer"],
            tier=data["tier"],
            video_ids=list(data["video_ids"]),
            hard_arity=data.get("hard_arity"),
            segment_span=data.get("segment_span"),
            curated=data.get("curated", True),
            split=data.get("split"),
        )


@dataclass
class DatasetManifest:
    pairs: list[QAPair] = field(default_factory=list)

    def by_split(self, split: str) -> list[QAPair]:
        return [p for p in self.pairs if p.split == split]


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

_NUMBERED_LINE = re.compile(r"^\s*([123])[.)]\s*(.+?)\s*$")


def _parse_easy_answers(response: str) -> dict[int, str] | None:
    answers: dict[int, str] = {}
    current = None
    for line in response.splitlines():
        m = _NUMBERED_LINE.match(line)
        if m:
            current = int(m.group(1))
            answers[current] = m.group(2)
        elif current is not None and line.strip():
            answers[current] += " " + line.strip()
    if set(answers) != {1, 2, 3} or not all(answers.values()):
        return None
    return answers


def generate_easy(
    video_id: str,
    segments: Sequence[tuple[int, tuple[int, int], str]],
    chat_provider: ChatProvider,
    seed: int,
    max_segments: int = 3,
) -> list[QAPair]:
    """Segment-grounded QA pairs from up to three sampled segments.

    ``segments`` holds (chunk index, (start, end), description) triples.
    Every generated pair is marked uncurated; a separate curation file
    selects the keepers.
    """
    if not segments:
        raise ValidationError(f"{video_id}: easy generation needs at least one described segment")
    rng = random.Random(seed)
    count = min(max_segments, len(segments))
    chosen = sorted(rng.sample(range(len(segments)), count))
    pairs: list[QAPair] = []
    for idx in chosen:
        chunk, (start, end), description = segments[idx]
        response = chat_provider.chat_complete(EASY_QA_PROMPT.format(segment_description=description))
        answers = _parse_easy_answers(response)
        if answers is None:
            log.warning("%s chunk %d: unparseable easy-QA response, skipped", video_id, chunk)
            continue
        for number, category in enumerate(EASY_CATEGORIES, start=1):
            pairs.append(
                QAPair(
                    qa_id=f"easy-{video_id}-{chunk:03d}-{category}",
                    question=EASY_QA_QUESTIONS[number - 1],
                    answer=answers[number],
                    tier="easy",
                    video_ids=[video_id],
                    segment_span={"chunk": chunk, "start": start, "end": end},
                    curated=False,
                )
            )
    return pairs


def apply_curation(pairs: Sequence[QAPair], kept_ids: Sequence[str]) -> list[QAPair]:
    """Keep only the pairs named by the human curation file."""
    keep = set(kept_ids)
    out = []
    for p in pairs:
        if p.qa_id in keep:
            p.curated = True
            out.append(p)
    return out


def _parse_qa_block(response: str) -> list[tuple[str, str]]:
    parsed = parse_strict_json(response)
    if "Summary" not in parsed or "QA_pairs" not in parsed:
        raise ParseError("response must contain Summary and QA_pairs")
    pairs = []
    for entry in parsed["QA_pairs"]:
        q, a = str(entry["Q"]).strip(), str(entry["A"]).strip()
        if q and a:
            pairs.append((q, a))
    return pairs


def generate_medium(
    video_id: str,
    video_description: str,
    transcript_text: str,
    chat_provider: ChatProvider,
    templates: str = MEDIUM_QA_TEMPLATES,
) -> list[QAPair]:
    """Whole-video QA pairs from the summary plus transcript.

    A malformed response is retried once; a second failure raises so the
    caller can flag the video.
    """
    prompt = MEDIUM_QA_PROMPT.format(
        templates=templates, video_description=video_description, transcript=transcript_text
    )
    last: Exception | None = None
    for _ in range(2):
        response = chat_provider.chat_complete(prompt)
        try:
            qa = _parse_qa_block(response)
            return [
                QAPair(
                    qa_id=f"medium-{video_id}-{i:03d}",
                    question=q,
                    answer=a,
                    tier="medium",
                    video_ids=[video_id],
                )
                for i, (q, a) in enumerate(qa)
            ]
        except (ParseError, KeyError, TypeError) as exc:
            last = exc
    raise ValidationError(f"{video_id}: medium QA generation failed after retry: {last}")


def generate_hard(
    summaries: dict[str, str],
    combo: Sequence[str],
    chat_provider: ChatProvider,
    templates: str = HARD_QA_TEMPLATES,
) -> list[QAPair]:
    """Multi-video QA pairs over 2-5 combined summaries."""
    if not 2 <= len(combo) <= 5:
        raise ValidationError(f"hard combos span 2-5 videos, got {len(combo)}")
    missing = [v for v in combo if v not in summaries]
    if missing:
        raise ValidationError(f"missing summaries for {missing}")
    joined = "\n\n".join(f"Video {i + 1} ({v}):\n{summaries[v]}" for i, v in enumerate(combo))
    prompt = HARD_QA_PROMPT.format(templates=templates, video_summaries=joined)
    combo_key = "+".join(combo)
    last: Exception | None = None
    for _ in range(2):
        response = chat_provider.chat_complete(prompt)
        try:
            qa = _parse_qa_block(response)
            return [
                QAPair(
                    qa_id=f"hard{len(combo)}-{combo_key}-{i:03d}",
                    question=q,
                    answer=a,
                    tier="hard",
                    video_ids=list(combo),
                    hard_arity=len(combo),
                )
                for i, (q, a) in enumerate(qa)
            ]
        except (ParseError, KeyError, TypeError) as exc:
            last = exc
    raise ValidationError(f"{combo_key}: hard QA generation failed after retry: {last}")


def sample_combos(
    pool: Sequence[str], arity: int, count: int, seed: int
) -> list[tuple[str, ...]]:
    """Seeded sample of distinct video combinations."""
    if arity > len(pool):
        raise ValidationError(f"arity {arity} exceeds pool size {len(pool)}")
    total = math.comb(len(pool), arity)
    if count > total:
        raise ValidationError(f"cannot draw {count} distinct combos from C({len(pool)},{arity})={total}")
    rng = random.Random(seed)
    seen: set[tuple[str, ...]] = set()
    out: list[tuple[str, ...]] = []
    while len(out) < count:
        combo = tuple(sorted(rng.sample(list(pool), arity)))
        if combo not in seen:
            seen.add(combo)
            out.append(combo)
    return out


def split_dataset(pairs: Sequence[QAPair], seed: int) -> DatasetManifest:
    """Stratified even train/test split per (tier, hard arity) bucket."""
    buckets: dict[tuple, list[QAPair]] = {}
    for p in pairs:
        buckets.setdefault(p.bucket(), []).append(p)
    rng = random.Random(seed)
    for key in sorted(buckets, key=str):
        bucket = buckets[key]
        order = list(range(len(bucket)))
        rng.shuffle(order)
        train_count = (len(bucket) + 1) // 2
        train_idx = set(order[:train_count])
        for i, p in enumerate(bucket):
            p.split = "train" if i in train_idx else "test"
    return DatasetManifest(pairs=list(pairs))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Geometric mean of clipped n-gram precisions with brevity penalty.

    Higher-order precisions with a zero raw numerator are smoothed by
    adding one to both numerator and denominator, so short-but-exact
    answers do not collapse to zero.
    """
    if not references:
        raise ValidationError("bleu requires at least one reference")
    c = len(candidate)
    if c == 0:
        return 0.0
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, k in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], k)
        numerator = sum(min(k, max_ref[g]) for g, k in cand_counts.items())
        denominator = sum(cand_counts.values())
        if n == 1:
            if numerator == 0:
                return 0.0
        elif numerator == 0:
            numerator, denominator = numerator + 1, denominator + 1
        log_sum += math.log(numerator / denominator) / max_n
    brevity = 1.0 if c >= r else math.exp(1 - r / c)
    return brevity * math.exp(log_sum)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length by dynamic programming."""
    dp = [0] * (len(b) + 1)
    for x in a:
        prev = 0
        for j, y in enumerate(b, start=1):
            cur = dp[j]
            dp[j] = prev + 1 if x == y else max(dp[j], dp[j - 1])
            prev = cur
    return dp[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS-based F1: recall against the reference, precision against the candidate."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    recall = lcs / len(reference)
    precision = lcs / len(candidate)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def bertscore(
    candidate: Sequence[str],
    reference: Sequence[str],
    embedding_provider: EmbeddingProvider,
    idf_weights: dict[str, float] | None = None,
    baseline: float | None = None,
) -> tuple[float, float, float]:
    """Greedy token matching in embedding space.

    Each candidate token aligns with its most similar reference token for
    precision and vice versa for recall; F1 is their harmonic mean.
    Optional idf weights reweight the token means; an optional baseline b
    rescales every score as (s - b) / (1 - b).
    """
    if not candidate or not reference:
        return (0.0, 0.0, 0.0)
    cand_vecs = np.stack(embedding_provider.embed_texts(list(candidate)))
    ref_vecs = np.stack(embedding_provider.embed_texts(list(reference)))
    sims = cand_vecs @ ref_vecs.T

    def weighted_mean(scores: np.ndarray, tokens: Sequence[str]) -> float:
        if idf_weights is None:
            return float(scores.mean())
        weights = np.array([idf_weights.get(t, 1.0) for t in tokens], dtype=np.float64)
        if weights.sum() == 0:
            return float(scores.mean())
        return float((scores * weights).sum() / weights.sum())

    precision = weighted_mean(sims.max(axis=1), candidate)
    recall = weighted_mean(sims.max(axis=0), reference)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    if baseline is not None:
        rescale = lambda s: (s - baseline) / (1 - baseline)  # noqa: E731
        return (rescale(precision), rescale(recall), rescale(f1))
    return (precision, recall, f1)


# ---------------------------------------------------------------------------
# Evaluation and statistics
# ---------------------------------------------------------------------------


def evaluate_run(
    answers: dict[str, str],
    manifest: DatasetManifest,
    embedding_provider: EmbeddingProvider,
    baseline: float | None = None,
) -> dict:
    """Score model answers on the test split, per tier and per hard arity."""
    test_pairs = manifest.by_split("test")
    missing = sorted(p.qa_id for p in test_pairs if p.qa_id not in answers)
    if missing:
        raise ValidationError(f"missing model answers for: {', '.join(missing)}")

    def score(pair: QAPair) -> dict[str, float]:
        gold = tokenize(pair.answer)
        got = tokenize(answers[pair.qa_id])
        _, _, f1 = bertscore(got, gold, embedding_provider, baseline=baseline)
        return {
            "bleu": bleu(got, [gold]),
            "rouge_l": rouge_l(got, gold),
            "bertscore": f1,
        }

    scored = [(p, score(p)) for p in test_pairs]

    def means(rows: list[dict[str, float]]) -> dict[str, float] | None:
        if not rows:
            return None
        return {
            metric: sum(r[metric] for r in rows) / len(rows)
            for metric in ("bleu", "rouge_l", "bertscore")
        }

    overall = {}
    for tier in TIERS:
        m = means([s for p, s in scored if p.tier == tier])
        if m is not None:
            overall[tier] = m
    hard_breakdown = {}
    for arity in (2, 3, 4, 5):
        m = means([s for p, s in scored if p.tier == "hard" and p.hard_arity == arity])
        if m is not None:
            hard_breakdown[f"hard{arity}"] = m
    return {"overall": overall, "hard_breakdown": hard_breakdown, "scored_pairs": len(scored)}


def dataset_statistics(manifest: DatasetManifest) -> dict:
    """Tier distribution (one decimal) and mean answer word counts."""
    pairs = manifest.pairs
    if not pairs:
        return {"counts": {}, "hard_counts": {}, "tier_pct": {}, "mean_answer_words": {}}
    counts = {tier: sum(1 for p in pairs if p.tier == tier) for tier in TIERS}
    counts = {t: n for t, n in counts.items() if n}
    hard_counts = {}
    for arity in (2, 3, 4, 5):
        n = sum(1 for p in pairs if p.tier == "hard" and p.hard_arity == arity)
        if n:
            hard_counts[f"hardqa{arity}"] = n
    total = len(pairs)
    tier_pct = {t: round(100 * n / total, 1) for t, n in counts.items()}
    mean_words = {
        t: sum(len(p.answer.split()) for p in pairs if p.tier == t) / n for t, n in counts.items()
    }
    return {
        "counts": counts,
        "hard_counts": hard_counts,
        "tier_pct": tier_pct,
        "mean_answer_words": mean_words,
    }


# ---------------------------------------------------------------------------
# Manifest and answer files
# ---------------------------------------------------------------------------


def write_manifest(pairs: Sequence[QAPair], path: str | Path, meta: dict | None = None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for p in pairs:
            fh.write(json.dumps(p.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> DatasetManifest:
    pairs = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            if "_meta" in data:
                continue
            pairs.append(QAPair.from_dict(data))
    return DatasetManifest(pairs=pairs)


def read_answers(path: str | Path) -> dict[str, str]:
    answers: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            if "_meta" in data:
                continue
            if data["id"] in answers:
                raise ValidationError(f"duplicate model answer for id {data['id']!r}")
            answers[data["id"]] = data["answer"]
    return answers
