"""Input artifacts: segment annotations, transcripts, recipes, frame manifests.

Everything here is immutable after load and safe for concurrent reads.
Loaders validate eagerly and raise with enough context to find the bad
record; serializers round-trip the on-disk schemas field for field.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ParseError, ValidationError
from .providers import EmbeddingProvider, cosine_similarity
from .text import DEFAULT_STOP_WORDS, split_verb_noun, tokenize

BIRYANI_TYPES = (
    "ambur",
    "bombay",
    "dindigul",
    "donne",
    "hyderabadi",
    "kashmiri",
    "kolkata",
    "awadhi",
    "malabar",
    "mughlai",
    "sindhi",
    "thalassery",
)

_SEGMENT_FIELDS = ("timestamp", "title", "url", "ingredients", "utensils", "actions")
_TIMESTAMP_RE = re.compile(r"^(\d+)-(\d+)$")


def parse_timestamp(value: str) -> tuple[int, int]:
    """Parse an ``"A-B"`` interval string into integer seconds, end > start."""
    m = _TIMESTAMP_RE.match(value.strip()) if isinstance(value, str) else None
    if not m:
        raise ParseError(f"timestamp must look like '<int>-<int>', got {value!r}")
    start, end = int(m.group(1)), int(m.group(2))
    if end <= start:
        raise ValidationError(f"timestamp end must exceed start, got {value!r}")
    return start, end


def format_timestamp(start_s: int, end_s: int) -> str:
    return f"{start_s}-{end_s}"


@dataclass(frozen=True)
class SegmentAnnotation:
    """One annotated video chunk (nominally 10 s before merging)."""

    video_id: str
    start_s: int
    end_s: int
    ingredients: tuple[str, ...]
    utensils: tuple[str, ...]
    actions: tuple[str, ...]
    title: str = ""
    url: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def timestamp(self) -> str:
        return format_timestamp(self.start_s, self.end_s)

    def to_dict(self) -> dict:
        out = {
            "timestamp": self.timestamp,
            "title": self.title,
            "url": self.url,
            "ingredients": list(self.ingredients),
            "utensils": list(self.utensils),
            "actions": list(self.actions),
        }
        out.update(self.extras)
        return out


@dataclass(frozen=True)
class Sentence:
    text: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class Transcript:
    video_id: str
    sentences: tuple[Sentence, ...]

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "sentences": [
                {"text": s.text, "start": s.start_s, "end": s.end_s} for s in self.sentences
            ],
        }


@dataclass(frozen=True)
class RecipeStep:
    step_id: str
    title: str
    description: str
    misc: bool = False


@dataclass(frozen=True)
class CanonicalRecipe:
    """Template recipe: ordered steps grouped into contiguous stage chapters."""

    biryani_type: str
    steps: tuple[RecipeStep, ...]
    chapters: tuple[tuple[str, tuple[str, ...]], ...]  # (name, step ids)

    def misc_step(self) -> RecipeStep:
        return next(s for s in self.steps if s.misc)

    def misc_index(self) -> int:
        return next(i for i, s in enumerate(self.steps) if s.misc)

    def chapter_of(self, step_id: str) -> str:
        for name, ids in self.chapters:
            if step_id in ids:
                return name
        raise ValidationError(f"step {step_id!r} belongs to no chapter")

    def to_dict(self) -> dict:
        return {
            "biryani_type": self.biryani_type,
            "chapters": [{"name": n, "steps": list(ids)} for n, ids in self.chapters],
            "steps": [
                {"id": s.step_id, "title": s.title, "description": s.description, "misc": s.misc}
                for s in self.steps
            ],
        }


@dataclass(frozen=True)
class FrameManifest:
    """Per-video frame index: file paths and/or precomputed embeddings."""

    video_id: str
    fps: float
    frames: tuple[str, ...] = ()
    embeddings_file: str = ""

    def frame_range(self, start_s: float, end_s: float) -> tuple[int, int]:
        lo = int(start_s * self.fps)
        hi = min(len(self.frames), int(end_s * self.fps)) if self.frames else int(end_s * self.fps)
        return lo, max(lo, hi)

    def frames_for_interval(self, start_s: float, end_s: float) -> list[str]:
        lo, hi = self.frame_range(start_s, end_s)
        return list(self.frames[lo:hi])


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    biryani_type: str
    title: str
    url: str
    duration_s: int
    frame_manifest: str = ""  # path to the manifest file, relative to workspace


@dataclass
class Corpus:
    videos: list[VideoRecord]
    segments: dict[str, list[SegmentAnnotation]] = field(default_factory=dict)
    transcripts: dict[str, Transcript] = field(default_factory=dict)
    recipes: dict[str, CanonicalRecipe] = field(default_factory=dict)

    def all_segments(self) -> list[SegmentAnnotation]:
        return [s for vid in sorted(self.segments) for s in self.segments[vid]]


@dataclass
class CorpusStats:
    video_count: int
    type_counts: dict[str, int]
    duration_histogram: dict[int, int]  # bin start seconds -> count
    verb_frequency: dict[str, int]
    noun_frequency: dict[str, int]
    cooccurrence: dict[str, dict[str, int]]  # noun -> verb -> count

    def to_dict(self) -> dict:
        return {
            "video_count": self.video_count,
            "type_counts": dict(self.type_counts),
            "duration_histogram": {str(k): v for k, v in self.duration_histogram.items()},
            "verb_frequency": dict(self.verb_frequency),
            "noun_frequency": dict(self.noun_frequency),
            "cooccurrence": {n: dict(v) for n, v in self.cooccurrence.items()},
        }


def _read_json(path: str | Path):
    raw = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON at offset {exc.pos}: {exc.msg}", offset=exc.pos) from exc


def load_segment_annotations(path: str | Path, video_id: str | None = None) -> list[SegmentAnnotation]:
    """Load one video's segment annotation file (a JSON array of records).

    ``video_id`` defaults to the file stem. Unknown fields on a record are
    kept in ``extras`` so serialization round-trips.
    """
    data = _read_json(path)
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON array of segment records")
    vid = video_id if video_id is not None else Path(path).stem
    segments = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict) or "timestamp" not in rec:
            raise ValidationError(f"{path}: record {i} is not a segment object")
        try:
            start, end = parse_timestamp(rec["timestamp"])
        except (ParseError, ValidationError) as exc:
            raise ValidationError(f"{path}: record {i}: {exc}") from exc
        for key in ("ingredients", "utensils", "actions"):
            if not isinstance(rec.get(key), list):
                raise ValidationError(f"{path}: record {i}: field {key!r} must be a list")
        extras = {k: v for k, v in rec.items() if k not in _SEGMENT_FIELDS}
        segments.append(
            SegmentAnnotation(
                video_id=vid,
                start_s=start,
                end_s=end,
                ingredients=tuple(rec["ingredients"]),
                utensils=tuple(rec["utensils"]),
                actions=tuple(rec["actions"]),
                title=rec.get("title", ""),
                url=rec.get("url", ""),
                extras=extras,
            )
        )
    return segments


def load_transcript(path: str | Path) -> Transcript:
    data = _read_json(path)
    sentences = []
    for i, s in enumerate(data.get("sentences", [])):
        if s["start"] < 0 or s["end"] < 0:
            raise ValidationError(f"{path}: sentence {i} has a negative time")
        sentences.append(Sentence(text=s["text"], start_s=s["start"], end_s=s["end"]))
    if any(a.start_s > b.start_s for a, b in zip(sentences, sentences[1:])):
        raise ValidationError(f"{path}: sentences must be ordered by start time")
    return Transcript(video_id=data["video_id"], sentences=tuple(sentences))


def load_recipe(path: str | Path) -> CanonicalRecipe:
    data = _read_json(path)
    steps = tuple(
        RecipeStep(
            step_id=str(s["id"]),
            title=s["title"],
            description=s.get("description", ""),
            misc=bool(s.get("misc", False)),
        )
        for s in data["steps"]
    )
    ids = [s.step_id for s in steps]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: step ids must be unique")
    if sum(1 for s in steps if s.misc) != 1:
        raise ValidationError(f"{path}: recipe must have exactly one misc step")
    chapters = tuple((c["name"], tuple(str(x) for x in c["steps"])) for c in data["chapters"])
    owned = [sid for _, sids in chapters for sid in sids]
    if sorted(owned) != sorted(ids) or len(owned) != len(ids):
        raise ValidationError(f"{path}: every step must belong to exactly one chapter")
    return CanonicalRecipe(biryani_type=data["biryani_type"], steps=steps, chapters=chapters)


def load_frame_manifest(path: str | Path) -> FrameManifest:
    data = _read_json(path)
    return FrameManifest(
        video_id=data["video_id"],
        fps=float(data.get("fps", 1.0)),
        frames=tuple(data.get("frames", [])),
        embeddings_file=data.get("embeddings_file", ""),
    )


def load_video_records(path: str | Path, allowed_types: Sequence[str] = BIRYANI_TYPES) -> list[VideoRecord]:
    data = _read_json(path)
    records = []
    seen = set()
    for rec in data:
        vid = rec["video_id"]
        if vid in seen:
            raise ValidationError(f"{path}: duplicate video_id {vid!r}")
        seen.add(vid)
        if rec["duration_s"] <= 0:
            raise ValidationError(f"{path}: video {vid!r} must have positive duration")
        if rec["biryani_type"] not in allowed_types:
            raise ValidationError(f"{path}: video {vid!r} has unknown type {rec['biryani_type']!r}")
        records.append(
            VideoRecord(
                video_id=vid,
                biryani_type=rec["biryani_type"],
                title=rec.get("title", ""),
                url=rec.get("url", ""),
                duration_s=int(rec["duration_s"]),
                frame_manifest=rec.get("frame_manifest", ""),
            )
        )
    return records


def corpus_statistics(
    corpus: Corpus,
    histogram_bin_s: int = 60,
    stop_words: frozenset[str] = DEFAULT_STOP_WORDS,
) -> CorpusStats:
    """Dataset-level statistics over videos and their action phrases.

    The verb of an action phrase is its first whitespace token; noun
    tokens are the remaining content tokens. Co-occurrence counts one per
    action phrase containing both the noun and the verb.
    """
    type_counts = Counter(v.biryani_type for v in corpus.videos)
    histogram: Counter[int] = Counter()
    for v in corpus.videos:
        histogram[(v.duration_s // histogram_bin_s) * histogram_bin_s] += 1
    verbs: Counter[str] = Counter()
    nouns: Counter[str] = Counter()
    cooc: dict[str, Counter[str]] = {}
    for seg in corpus.all_segments():
        for phrase in seg.actions:
            if not phrase.strip():
                raise ValidationError(f"empty action phrase in segment {seg.video_id}:{seg.timestamp}")
            verb, noun_tokens = split_verb_noun(phrase, stop_words)
            verbs[verb] += 1
            for noun in set(noun_tokens):
                nouns[noun] += 1
                cooc.setdefault(noun, Counter())[verb] += 1
    return CorpusStats(
        video_count=len(corpus.videos),
        type_counts=dict(sorted(type_counts.items())),
        duration_histogram=dict(sorted(histogram.items())),
        verb_frequency=dict(sorted(verbs.items())),
        noun_frequency=dict(sorted(nouns.items())),
        cooccurrence={n: dict(sorted(c.items())) for n, c in sorted(cooc.items())},
    )


def retrieve_clips(
    query: str,
    action_index: dict[str, list[dict]],
    embedding_provider: EmbeddingProvider,
    k: int,
) -> list[tuple[dict, float]]:
    """Skill-based retrieval: rank canonical labels against the query.

    ``action_index`` maps canonical labels to their clip dicts. Returns the
    union of the top-k labels' clips, each paired with its label's cosine
    score; ties rank lexicographically by label.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not action_index:
        return []
    labels = sorted(action_index)
    vectors = embedding_provider.embed_texts([query] + labels)
    query_vec, label_vecs = vectors[0], vectors[1:]
    scored = sorted(
        ((label, cosine_similarity(query_vec, vec)) for label, vec in zip(labels, label_vecs)),
        key=lambda pair: (-pair[1], pair[0]),
    )
    results = []
    for label, score in scored[:k]:
        for clip in action_index[label]:
            results.append((clip, score))
    return results


@dataclass
class SceneGraph:
    """Entities (ingredients/utensils) linked by action-verb edges."""

    nodes: list[dict]  # {"name", "kind": ingredient|utensil|action}
    edges: list[dict]  # {"source", "target", "verb"}

    def to_dict(self) -> dict:
        return {"nodes": self.nodes, "edges": self.edges}


def build_scene_graph(
    segment: SegmentAnnotation, stop_words: frozenset[str] = DEFAULT_STOP_WORDS
) -> SceneGraph:
    """Connect a segment's entities with edges labeled by action verbs.

    An action's noun tokens are matched against entity token sets; one
    matched entity yields a self-loop, several yield pairwise edges, none
    yields an isolated node carrying the whole action phrase.
    """
    nodes: list[dict] = []
    node_tokens: dict[str, set[str]] = {}
    for name in segment.ingredients:
        if name not in node_tokens:
            nodes.append({"name": name, "kind": "ingredient"})
            node_tokens[name] = set(tokenize(name))
    for name in segment.utensils:
        if name not in node_tokens:
            nodes.append({"name": name, "kind": "utensil"})
            node_tokens[name] = set(tokenize(name))
    edges: list[dict] = []
    for phrase in segment.actions:
        verb, noun_tokens = split_verb_noun(phrase, stop_words)
        wanted = set(noun_tokens)
        matched = [n["name"] for n in nodes if node_tokens[n["name"]] & wanted]
        if not matched:
            nodes.append({"name": phrase, "kind": "action"})
        elif len(matched) == 1:
            edges.append({"source": matched[0], "target": matched[0], "verb": verb})
        else:
            for i in range(len(matched)):
                for j in range(i + 1, len(matched)):
                    edges.append({"source": matched[i], "target": matched[j], "verb": verb})
    return SceneGraph(nodes=nodes, edges=edges)
