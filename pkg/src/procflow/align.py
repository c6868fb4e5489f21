"""Transcript/recipe alignment: coarse filtering, DTW, chunk assignment."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .text import DEFAULT_STOP_WORDS, tokenize

MISC_ROUTE = -1  # sentinel step index for chunks that survive no pair


@dataclass
class AlignmentResult:
    path: list[tuple[int, int]]  # (step index, sentence index), both endpoints anchored
    total_cost: float
    step_assignments: dict[int, int]  # sentence index -> step index

    def to_dict(self) -> dict:
        return {
            "path": [[i, j] for i, j in self.path],
            "cost": self.total_cost,
        }


@dataclass(frozen=True)
class ChunkAssignment:
    segment_id: str
    step_index: int
    confidence: float
    rank: int

    def to_dict(self, step_ids: Sequence[str]) -> dict:
        return {
            "segment": self.segment_id,
            "step": step_ids[self.step_index],
            "confidence": self.confidence,
            "rank": self.rank,
        }


def coarse_filter(
    segment_keywords: Sequence[str],
    sentences: Sequence[str],
    steps: Sequence[str],
    min_overlap: int = 1,
    stop_words: frozenset[str] = DEFAULT_STOP_WORDS,
) -> set[tuple[int, int]]:
    """Keyword-overlap pruning of (sentence, step) candidate pairs.

    A pair survives when at least ``min_overlap`` keyword tokens appear in
    both texts. An empty keyword set keeps every pair; a segment whose
    result is empty gets routed to the misc step by the caller.
    """
    keyword_tokens = set()
    for kw in segment_keywords:
        keyword_tokens.update(t for t in tokenize(kw) if t not in stop_words)
    if not keyword_tokens:
        return {(i, j) for i in range(len(sentences)) for j in range(len(steps))}
    sentence_hits = [keyword_tokens & set(tokenize(s)) for s in sentences]
    step_hits = [keyword_tokens & set(tokenize(s)) for s in steps]
    kept = set()
    for i, s_hit in enumerate(sentence_hits):
        if not s_hit:
            continue
        for j, p_hit in enumerate(step_hits):
            if len(s_hit & p_hit) >= min_overlap:
                kept.add((i, j))
    return kept


def cosine_distance_matrix(rows: Sequence[np.ndarray], cols: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise cosine distances between two unit-norm vector sequences."""
    a = np.stack(rows)
    b = np.stack(cols)
    return np.clip(1.0 - a @ b.T, 0.0, 2.0)


def dtw_align(
    step_embeddings: Sequence[np.ndarray], sentence_embeddings: Sequence[np.ndarray]
) -> AlignmentResult:
    """Dynamic time warping between recipe steps and transcript sentences."""
    if len(step_embeddings) == 0 or len(sentence_embeddings) == 0:
        raise ValidationError("dtw_align requires two nonempty sequences")
    dist = cosine_distance_matrix(step_embeddings, sentence_embeddings)
    return dtw_from_matrix(dist)


def dtw_from_matrix(dist: np.ndarray) -> AlignmentResult:
    """Minimum-cost monotone path through a distance matrix.

    Moves are {advance step, advance sentence, advance both}; the path is
    anchored at (0, 0) and (M-1, N-1) and its cost is the sum of the
    distances it visits. Backtrace ties resolve diagonal first, then step
    advance, then sentence advance, which fixes one optimum among equals.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.size == 0:
        raise ValidationError("distance matrix must be 2-D and nonempty")
    if not np.all(np.isfinite(dist)):
        raise ValidationError("distance matrix must be finite")
    m, n = dist.shape
    acc = np.full((m, n), np.inf)
    acc[0, 0] = dist[0, 0]
    for i in range(m):
        for j in range(n):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = dist[i, j] + best

    path = [(m - 1, n - 1)]
    i, j = m - 1, n - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], 0, (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], 1, (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], 2, (i, j - 1)))
        _, _, (i, j) = min(candidates)
        path.append((i, j))
    path.reverse()

    assignments: dict[int, int] = {}
    for step_idx, sent_idx in path:
        assignments[sent_idx] = step_idx  # last step visited per sentence wins
    return AlignmentResult(path=path, total_cost=float(acc[m - 1, n - 1]), step_assignments=assignments)


def assign_chunks(
    chunk_actions: Sequence[Sequence[np.ndarray]],
    step_embeddings: Sequence[np.ndarray],
    misc_index: int,
    chunk_ids: Sequence[str] | None = None,
    chunk_starts: Sequence[int] | None = None,
) -> list[ChunkAssignment]:
    """Assign each chunk to its best-matching recipe step.

    A chunk's confidence against a step is the max cosine similarity over
    its action embeddings; the chunk goes to the argmax step (earlier step
    on ties). Chunks with no actions land on the misc step with confidence
    zero. Ranks are dense, 1-based, per step, ordered by confidence then
    chunk start time.
    """
    if not step_embeddings:
        raise ValidationError("assign_chunks requires at least one step")
    ids = list(chunk_ids) if chunk_ids is not None else [str(i) for i in range(len(chunk_actions))]
    starts = list(chunk_starts) if chunk_starts is not None else list(range(len(chunk_actions)))
    steps = np.stack(step_embeddings)
    chosen: list[tuple[str, int, float, int]] = []
    for idx, actions in enumerate(chunk_actions):
        if len(actions) == 0:
            chosen.append((ids[idx], misc_index, 0.0, starts[idx]))
            continue
        sims = np.stack(actions) @ steps.T  # actions x steps
        per_step = sims.max(axis=0)
        step_idx = int(np.argmax(per_step))  # argmax returns the earliest on ties
        chosen.append((ids[idx], step_idx, float(per_step[step_idx]), starts[idx]))

    assignments = []
    by_step: dict[int, list[tuple[str, int, float, int]]] = {}
    for entry in chosen:
        by_step.setdefault(entry[1], []).append(entry)
    order = {}
    for step_idx, entries in by_step.items():
        entries.sort(key=lambda e: (-e[2], e[3]))
        for rank, entry in enumerate(entries, start=1):
            order[entry[0]] = rank
    for seg_id, step_idx, conf, _start in chosen:
        assignments.append(
            ChunkAssignment(segment_id=seg_id, step_index=step_idx, confidence=conf, rank=order[seg_id])
        )
    return assignments


def heatmap_export(
    step_ids: Sequence[str],
    sentence_count: int,
    similarity: np.ndarray,
    result: AlignmentResult,
) -> dict:
    """Serializable similarity matrix plus DTW path for heatmap rendering."""
    return {
        "steps": list(step_ids),
        "sentences": sentence_count,
        "matrix": [[float(x) for x in row] for row in similarity],
        "path": [[i, j] for i, j in result.path],
    }
