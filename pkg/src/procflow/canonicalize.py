"""Canonical action classes and temporal merging.

Agglomerative clustering collapses lexical variants of the same action
("stirring rice" vs "stirring rice and water with a wooden spoon") into one
class; merging fuses adjacent same-action segments of a video into a single
continuous span.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import SegmentAnnotation, format_timestamp
from .errors import ParseError, ValidationError
from .prompts import CLUSTER_SPLIT_PROMPT, parse_strict_json
from .providers import ChatProvider, EmbeddingProvider


@dataclass
class ClusteringConfig:
    distance_threshold: float = 0.3  # cosine distance; merge while pairs fall below
    linkage: str = "average"

    def __post_init__(self):
        if not 0 < self.distance_threshold <= 2:
            raise ValidationError("distance_threshold must be in (0, 2]")
        if self.linkage != "average":
            raise ValidationError("only average linkage is supported")


@dataclass
class ActionCluster:
    canonical_label: str
    phrases: list[str]
    clips: list[dict] = field(default_factory=list)

    def to_mapping_entry(self) -> dict:
        return {"phrases": list(self.phrases), "clips": list(self.clips)}


@dataclass(frozen=True)
class LabeledInterval:
    """One (video, time interval, canonical label) occurrence."""

    segment_id: str
    video_id: str
    start_s: int
    end_s: int
    label: str


@dataclass(frozen=True)
class MergedSpan:
    video_id: str
    canonical_label: str
    start_s: int
    end_s: int
    source_segment_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "video": self.video_id,
            "label": self.canonical_label,
            "timestamp": format_timestamp(self.start_s, self.end_s),
            "sources": list(self.source_segment_ids),
        }


def _cluster_label(phrases: list[str]) -> str:
    return min(phrases)


def _partition_phrases(
    phrases: list[str], vectors: list[np.ndarray], threshold: float
) -> list[list[int]]:
    """Bottom-up average-linkage merging over cosine distance.

    Clusters merge while the smallest inter-cluster average distance stays
    strictly below the threshold. Ties on that minimum are broken by the
    lexicographically smallest (label, label) pair, a cluster's label being
    its smallest member phrase, so the dendrogram is deterministic.
    """
    n = len(phrases)
    mat = np.stack(vectors)
    base = np.clip(1.0 - mat @ mat.T, 0.0, 2.0)

    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    # dist_sums[i, j] = total pairwise base distance between clusters i and j
    dist_sums = base.copy()
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)

    while active.sum() > 1:
        avg = dist_sums / np.outer(sizes, sizes)
        avg[~active, :] = np.inf
        avg[:, ~active] = np.inf
        np.fill_diagonal(avg, np.inf)
        minimum = avg.min()
        if not minimum < threshold:
            break
        ties = np.argwhere(avg == minimum)
        best = None
        best_key = None
        for i, j in ties:
            if i >= j:
                continue
            la, lb = _cluster_label([phrases[m] for m in members[i]]), _cluster_label(
                [phrases[m] for m in members[j]]
            )
            key = (min(la, lb), max(la, lb))
            if best_key is None or key < best_key:
                best_key, best = key, (int(i), int(j))
        a, b = best
        members[a] = members[a] + members[b]
        del members[b]
        dist_sums[a, :] += dist_sums[b, :]
        dist_sums[:, a] += dist_sums[:, b]
        sizes[a] += sizes[b]
        active[b] = False

    return sorted(members.values(), key=lambda idxs: _cluster_label([phrases[m] for m in idxs]))


def representative_phrase(cluster: list[tuple[str, np.ndarray]]) -> str:
    """Medoid of a cluster: the member with maximal mean cosine similarity.

    Ties break toward the shortest phrase, then lexicographically.
    """
    if not cluster:
        raise ValidationError("cluster must be nonempty")
    mat = np.stack([vec for _, vec in cluster])
    mean_sims = (mat @ mat.T).mean(axis=1)
    ranked = sorted(
        zip((phrase for phrase, _ in cluster), mean_sims),
        key=lambda pv: (-pv[1], len(pv[0]), pv[0]),
    )
    return ranked[0][0]


def cluster_actions(
    phrases: list[str],
    provider: EmbeddingProvider,
    cfg: ClusteringConfig | None = None,
) -> list[ActionCluster]:
    """Group action phrases into canonical classes.

    Duplicate strings count as one phrase. Each returned cluster carries
    the medoid as its canonical label; clips are attached separately when
    clustering a corpus.
    """
    cfg = cfg or ClusteringConfig()
    unique = sorted(set(phrases))
    if not unique:
        return []
    vectors = provider.embed_texts(unique)
    groups = _partition_phrases(unique, vectors, cfg.distance_threshold)
    clusters = []
    for idxs in groups:
        member_pairs = [(unique[i], vectors[i]) for i in idxs]
        clusters.append(
            ActionCluster(
                canonical_label=representative_phrase(member_pairs),
                phrases=sorted(unique[i] for i in idxs),
            )
        )
    return sorted(clusters, key=lambda c: c.canonical_label)


def build_action_index(
    segments: list[SegmentAnnotation],
    video_types: dict[str, str],
    provider: EmbeddingProvider,
    cfg: ClusteringConfig | None = None,
) -> tuple[list[ActionCluster], dict[str, str]]:
    """Cluster every action phrase in a corpus and attach timestamped clips.

    Returns the clusters plus a phrase -> canonical label lookup.
    """
    phrases = sorted({p for seg in segments for p in seg.actions})
    clusters = cluster_actions(phrases, provider, cfg)
    label_of = {p: c.canonical_label for c in clusters for p in c.phrases}
    clips: dict[str, list[dict]] = {c.canonical_label: [] for c in clusters}
    seen: set[tuple] = set()
    for seg in segments:
        for phrase in seg.actions:
            label = label_of[phrase]
            key = (label, seg.video_id, seg.start_s, seg.end_s)
            if key in seen:
                continue
            seen.add(key)
            clips[label].append(
                {
                    "url": seg.url,
                    "timestamp": seg.timestamp,
                    "biryani": video_types.get(seg.video_id, ""),
                    "video": seg.video_id,
                }
            )
    for cluster in clusters:
        cluster.clips = sorted(
            clips[cluster.canonical_label], key=lambda c: (c["video"], int(c["timestamp"].split("-")[0]))
        )
    return clusters, label_of


def clusters_to_mapping(clusters: list[ActionCluster]) -> dict:
    """Serialize clusters in the action-to-timestamped-clips JSON shape."""
    return {c.canonical_label: c.to_mapping_entry() for c in clusters}


def merge_consecutive(segments: list[LabeledInterval]) -> list[MergedSpan]:
    """Fuse temporally adjacent same-label intervals per video.

    Adjacency means one interval ends exactly where the next starts; gaps
    and label changes keep spans separate. Overlapping intervals within a
    video are rejected. Idempotent: merging the output changes nothing.
    """
    by_video: dict[str, list[LabeledInterval]] = {}
    for seg in segments:
        by_video.setdefault(seg.video_id, []).append(seg)
    spans: list[MergedSpan] = []
    for video_id in sorted(by_video):
        ordered = sorted(by_video[video_id], key=lambda s: (s.start_s, s.end_s))
        current: list[LabeledInterval] = []
        for seg in ordered:
            if seg.end_s <= seg.start_s:
                raise ValidationError(f"{video_id}: interval {seg.start_s}-{seg.end_s} is empty")
            if current and seg.start_s < current[-1].end_s:
                raise ValidationError(
                    f"{video_id}: segment starting at {seg.start_s}s overlaps the previous one"
                )
            if current and seg.start_s == current[-1].end_s and seg.label == current[-1].label:
                current.append(seg)
                continue
            if current:
                spans.append(_flush(current))
            current = [seg]
        if current:
            spans.append(_flush(current))
    return spans


def _flush(run: list[LabeledInterval]) -> MergedSpan:
    return MergedSpan(
        video_id=run[0].video_id,
        canonical_label=run[0].label,
        start_s=run[0].start_s,
        end_s=run[-1].end_s,
        source_segment_ids=tuple(s.segment_id for s in run),
    )


@dataclass
class RefineOutcome:
    error: bool
    split: bool
    clusters: list[ActionCluster]


def refine_cluster(
    cluster: ActionCluster,
    chat_provider: ChatProvider,
    embedding_provider: EmbeddingProvider,
    cfg: ClusteringConfig | None = None,
) -> RefineOutcome:
    """Ask the chat model whether a cluster conflates distinct actions.

    A yes answer re-clusters the members at half the distance threshold;
    an unparseable answer (after one retry) leaves the cluster intact and
    flags the outcome as an error.
    """
    if len(cluster.phrases) < 2:
        raise ValidationError("refine_cluster needs a cluster with at least 2 phrases")
    cfg = cfg or ClusteringConfig()
    prompt = CLUSTER_SPLIT_PROMPT.format(
        action_count=len(cluster.phrases),
        actions_str="\n".join(f"- {p}" for p in cluster.phrases),
    )
    decision = None
    for _ in range(2):
        response = chat_provider.chat_complete(prompt)
        try:
            parsed = parse_strict_json(response)
            value = parsed["should_split"]
            if not isinstance(value, bool):
                raise ParseError("should_split must be a JSON boolean")
            decision = value
            break
        except (ParseError, KeyError, TypeError):
            continue
    if decision is None:
        return RefineOutcome(error=True, split=False, clusters=[cluster])
    if not decision:
        return RefineOutcome(error=False, split=False, clusters=[cluster])
    halved = ClusteringConfig(distance_threshold=cfg.distance_threshold / 2, linkage=cfg.linkage)
    sub = cluster_actions(cluster.phrases, embedding_provider, halved)
    if len(sub) == 1:
        sub[0].clips = list(cluster.clips)
        return RefineOutcome(error=False, split=False, clusters=sub)
    # Clips carry no phrase provenance, so the caller reattaches them from
    # the corpus when a split actually happens.
    return RefineOutcome(error=False, split=True, clusters=sub)


def span_seconds(spans: list[MergedSpan]) -> dict[tuple[str, str], int]:
    """Total covered seconds per (video, label); merging preserves this."""
    totals: dict[tuple[str, str], int] = {}
    for s in spans:
        key = (s.video_id, s.canonical_label)
        totals[key] = totals.get(key, 0) + (s.end_s - s.start_s)
    return totals


def interval_seconds(segments: list[LabeledInterval]) -> dict[tuple[str, str], int]:
    totals: dict[tuple[str, str], int] = {}
    for s in segments:
        key = (s.video_id, s.label)
        totals[key] = totals.get(key, 0) + (s.end_s - s.start_s)
    return totals
