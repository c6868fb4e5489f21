"""Pipeline stages over a workspace directory.

Stage order mirrors the processing flow: ingest inputs, dataset stats,
action canonicalization, temporal merging, automated verification,
multimodal alignment, pairwise comparison, QA generation and evaluation.
Every stage is deterministic given the workspace, config, and seed.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import align as align_mod
from . import compare as compare_mod
from . import qa as qa_mod
from .canonicalize import (
    ClusteringConfig,
    LabeledInterval,
    MergedSpan,
    build_action_index,
    clusters_to_mapping,
    merge_consecutive,
    refine_cluster,
)
from .corpus import (
    Corpus,
    FrameManifest,
    SegmentAnnotation,
    corpus_statistics,
    load_frame_manifest,
    load_recipe,
    load_segment_annotations,
    load_transcript,
    load_video_records,
    retrieve_clips,
)
from .errors import DependencyError, ValidationError
from .fixtures import make_mock_providers, render_description
from .prompts import MULTIMODAL_SUMMARY_PROMPT, VIDEO_SUMMARY_PROMPT
from .providers import HttpEmbeddingProvider, HttpProvider, ProviderConfig
from .verify import auto_verify, verification_statistics
from .workspace import Workspace

STAGE_DEPS: dict[str, list[str]] = {
    "ingest": [],
    "stats": ["ingest"],
    "canonicalize": ["ingest"],
    "merge": ["canonicalize"],
    "verify-auto": ["merge"],
    "align": ["merge"],
    "compare": ["canonicalize", "align"],
    "qa-gen": ["ingest"],
    "qa-eval": ["qa-gen"],
    "retrieve": ["canonicalize"],
    "review-serve": ["compare"],
}

STAGE_MARKERS: dict[str, str] = {
    "ingest": "corpus/index.json",
    "stats": "stats/corpus_stats.json",
    "canonicalize": "clusters/action_map.json",
    "merge": "merge/spans.json",
    "verify-auto": "verify/records.json",
    "align": "align/summary.json",
    "compare": "compare/summary.json",
    "qa-gen": "qa/manifest.jsonl",
    "qa-eval": "qa/report.json",
}

# review-serve needs only the comparison review pool, not every compare artifact
DEP_ARTIFACT_OVERRIDES = {("review-serve", "compare"): "compare/review_pool.json"}

SAMPLING_STAGES = ("compare", "qa-gen")

PIPELINE_ORDER = (
    "ingest", "stats", "canonicalize", "merge", "verify-auto",
    "align", "compare", "qa-gen", "qa-eval",
)


@dataclass
class StageFlags:
    seed: int | None = None
    force: bool = False
    max_pairs: int | None = None
    k: int | None = None
    query: str | None = None
    answers: str | None = None
    tier: str = "all"
    manifest: str | None = None


def check_dependencies(stage: str, ws: Workspace) -> None:
    for dep in STAGE_DEPS[stage]:
        marker = DEP_ARTIFACT_OVERRIDES.get((stage, dep), STAGE_MARKERS.get(dep))
        if marker and not ws.has_derived(marker):
            raise DependencyError(
                f"stage {stage!r} requires {dep!r} to have run first", missing_stage=dep
            )


def _http_provider_config(ws: Workspace, kind: str) -> ProviderConfig:
    entry = ws.config["providers"][kind]
    return ProviderConfig(
        endpoint=entry["endpoint"],
        model=entry.get("model", ""),
        auth_env=entry.get("auth_env", f"PROCFLOW_API_KEY_{kind.upper()}"),
        temperature=entry.get("temperature", 0.0),
        cache_dir=str(ws.derived / "cache" / kind),
    )


def build_providers(ws: Workspace):
    mode = ws.config.get("providers", {}).get("mode", "mock")
    if mode == "mock":
        return make_mock_providers(ws.config)
    if mode == "http":
        return (
            HttpEmbeddingProvider(
                _http_provider_config(ws, "embedding"), dimension=ws.config["embedding_dim"]
            ),
            HttpProvider(_http_provider_config(ws, "chat")),
            HttpProvider(_http_provider_config(ws, "vision")),
        )
    raise ValidationError(f"unknown provider mode {mode!r}")


def assignment_embedding_provider(ws: Workspace, default):
    """Second embedding channel for chunk-to-step assignment.

    Defaults to the DTW channel; an ``embedding_assign`` entry in the http
    provider config switches it to a separate encoder.
    """
    pconf = ws.config.get("providers", {})
    if pconf.get("mode") == "http" and "embedding_assign" in pconf:
        return HttpEmbeddingProvider(
            _http_provider_config(ws, "embedding_assign"), dimension=ws.config["embedding_dim"]
        )
    return default


def load_corpus(ws: Workspace) -> Corpus:
    videos = load_video_records(ws.root / "videos.json")
    corpus = Corpus(videos=list(videos))
    for video in videos:
        ann = ws.root / "annotations" / f"{video.video_id}.json"
        if ann.exists():
            corpus.segments[video.video_id] = load_segment_annotations(ann, video.video_id)
        tr = ws.root / "transcripts" / f"{video.video_id}.json"
        if tr.exists():
            corpus.transcripts[video.video_id] = load_transcript(tr)
    for recipe_path in sorted((ws.root / "recipes").glob("*.json")):
        recipe = load_recipe(recipe_path)
        corpus.recipes[recipe.biryani_type] = recipe
    return corpus


def _manifest_for(ws: Workspace, video) -> FrameManifest:
    return load_frame_manifest(ws.root / video.frame_manifest)


def _frame_embeddings(ws: Workspace, manifest: FrameManifest) -> list[np.ndarray]:
    path = ws.root / manifest.embeddings_file
    data = json.loads(path.read_text(encoding="utf-8"))
    return [np.asarray(v, dtype=np.float64) for v in data]


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    missing = [v.video_id for v in corpus.videos if v.video_id not in corpus.segments]
    if missing:
        raise ValidationError(f"videos without annotation files: {missing}")
    index = {
        "videos": [
            {
                "video_id": v.video_id,
                "biryani_type": v.biryani_type,
                "title": v.title,
                "url": v.url,
                "duration_s": v.duration_s,
                "frame_manifest": v.frame_manifest,
            }
            for v in corpus.videos
        ],
        "segment_counts": {vid: len(segs) for vid, segs in sorted(corpus.segments.items())},
        "transcript_counts": {
            vid: len(t.sentences) for vid, t in sorted(corpus.transcripts.items())
        },
        "recipe_types": sorted(corpus.recipes),
    }
    return [ws.write_json("corpus/index.json", index)]


def stage_stats(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    stats = corpus_statistics(corpus, histogram_bin_s=ws.config["histogram_bin_s"])
    return [ws.write_json("stats/corpus_stats.json", stats.to_dict())]


def stage_canonicalize(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    embedding, chat, _vision = build_providers(ws)
    cfg = ClusteringConfig(distance_threshold=ws.config["clustering"]["distance_threshold"])
    video_types = {v.video_id: v.biryani_type for v in corpus.videos}
    clusters, label_of = build_action_index(corpus.all_segments(), video_types, embedding, cfg)
    refine_log = {}
    if ws.config.get("refine_clusters"):
        refined = []
        for cluster in clusters:
            if len(cluster.phrases) < 2:
                refined.append(cluster)
                continue
            outcome = refine_cluster(cluster, chat, embedding, cfg)
            refine_log[cluster.canonical_label] = (
                "error" if outcome.error else ("split" if outcome.split else "kept")
            )
            if outcome.split:
                # re-attach clips from the corpus for the new sub-clusters
                sub_phrases = [p for c in outcome.clusters for p in c.phrases]
                sub_segments = [
                    s for s in corpus.all_segments() if any(p in sub_phrases for p in s.actions)
                ]
                halved = ClusteringConfig(distance_threshold=cfg.distance_threshold / 2)
                sub_clusters, sub_labels = build_action_index(
                    [_restrict_actions(s, sub_phrases) for s in sub_segments],
                    video_types,
                    embedding,
                    halved,
                )
                refined.extend(sub_clusters)
                label_of.update(sub_labels)
            else:
                refined.extend(outcome.clusters)
        clusters = sorted(refined, key=lambda c: c.canonical_label)
    outputs = [
        ws.write_json("clusters/action_map.json", {"actions": clusters_to_mapping(clusters)}),
        ws.write_json("clusters/phrase_labels.json", {"labels": dict(sorted(label_of.items()))}),
    ]
    if refine_log:
        outputs.append(ws.write_json("clusters/refine_log.json", {"outcomes": refine_log}))
    return outputs


def _restrict_actions(segment: SegmentAnnotation, phrases: list[str]) -> SegmentAnnotation:
    return dataclasses.replace(
        segment, actions=tuple(p for p in segment.actions if p in phrases)
    )


def _labeled_intervals(ws: Workspace, corpus: Corpus, label_of: dict[str, str]):
    streams: dict[tuple[str, str], list[LabeledInterval]] = {}
    for seg in corpus.all_segments():
        for label in sorted({label_of[p] for p in seg.actions}):
            streams.setdefault((seg.video_id, label), []).append(
                LabeledInterval(
                    segment_id=f"{seg.video_id}:{seg.timestamp}",
                    video_id=seg.video_id,
                    start_s=seg.start_s,
                    end_s=seg.end_s,
                    label=label,
                )
            )
    return streams


def stage_merge(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    label_of = ws.read_json("clusters/phrase_labels.json", force=flags.force)["labels"]
    streams = _labeled_intervals(ws, corpus, label_of)
    spans: list[MergedSpan] = []
    before = 0
    for key in sorted(streams):
        before += len(streams[key])
        spans.extend(merge_consecutive(streams[key]))
    spans.sort(key=lambda s: (s.video_id, s.start_s, s.canonical_label))
    payload = {
        "before": before,
        "after": len(spans),
        "spans": [s.to_dict() for s in spans],
    }
    return [ws.write_json("merge/spans.json", payload)]


def _spans_from_artifact(rows: list[dict]) -> list[MergedSpan]:
    spans = []
    for row in rows:
        start, end = (int(x) for x in row["timestamp"].split("-"))
        spans.append(
            MergedSpan(
                video_id=row["video"],
                canonical_label=row["label"],
                start_s=start,
                end_s=end,
                source_segment_ids=tuple(row["sources"]),
            )
        )
    return spans


def stage_verify_auto(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    _embedding, _chat, vision = build_providers(ws)
    spans = _spans_from_artifact(ws.read_json("merge/spans.json", force=flags.force)["spans"])
    manifests = {v.video_id: _manifest_for(ws, v) for v in corpus.videos}
    types = {v.video_id: v.biryani_type for v in corpus.videos}
    max_frames = ws.config["verify"]["max_frames"]
    records = []
    for span in spans:
        segment = SegmentAnnotation(
            video_id=span.video_id,
            start_s=span.start_s,
            end_s=span.end_s,
            ingredients=(),
            utensils=(),
            actions=(span.canonical_label,),
        )
        record = auto_verify(
            segment, span.canonical_label, vision, manifests[span.video_id], max_frames
        )
        records.append(dataclasses.replace(record, biryani_type=types.get(span.video_id, "")))
    stats = verification_statistics(records)
    return [
        ws.write_json("verify/records.json", {"records": [r.to_dict() for r in records]}),
        ws.write_json("verify/stats.json", stats),
    ]


def stage_align(ws: Workspace, flags: StageFlags) -> list[Path]:
    corpus = load_corpus(ws)
    embedding, _chat, _vision = build_providers(ws)
    assign_embedding = assignment_embedding_provider(ws, embedding)
    label_of = ws.read_json("clusters/phrase_labels.json", force=flags.force)["labels"]
    min_overlap = ws.config["coarse_min_overlap"]
    outputs = []
    step_votes: dict[str, Counter] = {}
    for video in corpus.videos:
        transcript = corpus.transcripts.get(video.video_id)
        recipe = corpus.recipes.get(video.biryani_type)
        if transcript is None or recipe is None or not transcript.sentences:
            continue
        step_texts = [f"{s.title}. {s.description}" for s in recipe.steps]
        step_ids = [s.step_id for s in recipe.steps]
        sentence_texts = [s.text for s in transcript.sentences]
        step_vecs = embedding.embed_texts(step_texts)
        sent_vecs = embedding.embed_texts(sentence_texts)
        assign_step_vecs = (
            step_vecs if assign_embedding is embedding else assign_embedding.embed_texts(step_texts)
        )
        result = align_mod.dtw_align(step_vecs, sent_vecs)
        similarity = 1.0 - align_mod.cosine_distance_matrix(step_vecs, sent_vecs)

        segments = corpus.segments.get(video.video_id, [])
        misc_index = recipe.misc_index()
        chunk_ids, chunk_starts, chunk_actions = [], [], []
        routed_misc: list[str] = []
        for seg in segments:
            keywords = list(seg.ingredients) + list(seg.utensils)
            kept = align_mod.coarse_filter(
                keywords, sentence_texts, step_texts, min_overlap=min_overlap
            )
            seg_id = f"{video.video_id}:{seg.timestamp}"
            if not kept or not seg.actions:
                routed_misc.append(seg_id)
                chunk_ids.append(seg_id)
                chunk_starts.append(seg.start_s)
                chunk_actions.append([])
                continue
            labels = sorted({label_of[p] for p in seg.actions})
            chunk_ids.append(seg_id)
            chunk_starts.append(seg.start_s)
            chunk_actions.append(assign_embedding.embed_texts(labels))
        assignments = align_mod.assign_chunks(
            chunk_actions, assign_step_vecs, misc_index, chunk_ids, chunk_starts
        )
        for seg, assignment in zip(segments, assignments):
            for phrase in seg.actions:
                label = label_of[phrase]
                step_votes.setdefault(label, Counter())[step_ids[assignment.step_index]] += 1
        payload = {
            "video_id": video.video_id,
            "path": [[i, j] for i, j in result.path],
            "cost": result.total_cost,
            "assignments": [a.to_dict(step_ids) for a in assignments],
            "misc_routed": routed_misc,
        }
        outputs.append(ws.write_json(f"align/{video.video_id}.json", payload))
        outputs.append(
            ws.write_json(
                f"align/{video.video_id}_heatmap.json",
                align_mod.heatmap_export(step_ids, len(sentence_texts), similarity, result),
            )
        )

    step_order = {sid: i for i, (sid, *_rest) in enumerate(_recipe_step_ids(corpus))}
    action_steps = {}
    for label, votes in sorted(step_votes.items()):
        best = sorted(votes.items(), key=lambda kv: (-kv[1], step_order.get(kv[0], 99)))
        action_steps[label] = best[0][0]
    outputs.append(
        ws.write_json(
            "align/summary.json",
            {"videos": sorted(v.video_id for v in corpus.videos), "action_steps": action_steps},
        )
    )
    return outputs


def _recipe_step_ids(corpus: Corpus):
    for recipe in corpus.recipes.values():
        return [(s.step_id,) for s in recipe.steps]
    return []


def stage_compare(ws: Workspace, flags: StageFlags) -> list[Path]:
    if flags.seed is None:
        raise ValidationError("compare is a sampling stage: --seed is required")
    corpus = load_corpus(ws)
    embedding, chat, vision = build_providers(ws)
    action_map = ws.read_json("clusters/action_map.json", force=flags.force)["actions"]
    align_summary = ws.read_json("align/summary.json", force=flags.force)
    max_pairs = flags.max_pairs if flags.max_pairs is not None else ws.config["compare"]["max_pairs"]
    k_frames = flags.k if flags.k is not None else ws.config["compare"]["k_frames"]

    manifests = {v.video_id: _manifest_for(ws, v) for v in corpus.videos}
    embeddings_cache = {vid: _frame_embeddings(ws, m) for vid, m in manifests.items()}

    proposer = compare_mod.Proposer(chat)
    results: list[compare_mod.ComparisonResult] = []
    proposals_out = {}
    hit_cache: dict[tuple[str, str], compare_mod.FrameHit] = {}

    def clip_frames(clip: compare_mod.ClipRef, sub_actions: list[str]) -> list[str]:
        manifest = manifests[clip.video_id]
        lo, _hi = manifest.frame_range(clip.start_s, clip.end_s)
        refs: list[str] = []
        for sub in sub_actions:
            key = (clip.clip_id, sub)
            if key not in hit_cache:
                frame_vecs = embeddings_cache[clip.video_id]
                window = frame_vecs[lo : manifest.frame_range(clip.start_s, clip.end_s)[1]]
                hit_cache[key] = compare_mod.localize_frames(sub, window, embedding, clip, k_frames)
            hit = hit_cache[key]
            for idx in hit.frame_indices:
                ref = manifest.frames[lo + idx]
                if ref not in refs:
                    refs.append(ref)
        return refs

    for label in sorted(action_map):
        clips = [
            compare_mod.ClipRef(
                video_id=c["video"],
                start_s=int(c["timestamp"].split("-")[0]),
                end_s=int(c["timestamp"].split("-")[1]),
                url=c["url"],
                biryani_type=c["biryani"],
            )
            for c in action_map[label]["clips"]
        ]
        if len(clips) < 2:
            continue
        proposal = proposer.propose(label)
        if proposal is None:
            continue
        proposals_out[label] = {
            "variations": proposal.variations,
            "sub_actions": proposal.sub_actions,
            "mapping": proposal.mapping,
        }
        pairs = compare_mod.enumerate_pairs(clips, max_pairs=max_pairs, seed=flags.seed)
        for clip_a, clip_b in pairs:
            result = compare_mod.ComparisonResult(clip_a=clip_a, clip_b=clip_b, action_class=label)
            for variation in proposal.variations:
                subs = proposal.mapping[variation]
                frames_a = clip_frames(clip_a, subs)
                frames_b = clip_frames(clip_b, subs)
                context = compare_mod.importance_context(proposal, variation)
                result.verdicts[variation] = compare_mod.run_differencer(
                    frames_a, frames_b, label, variation, context, vision
                )
            results.append(result)

    summary = compare_mod.aggregate_results(results)
    summary["proposer_errors"] = dict(sorted(proposer.errors.items()))
    recipe = corpus.recipes[sorted(corpus.recipes)[0]]
    variation_map = compare_mod.stage_variation_map(
        results, recipe, align_summary["action_steps"]
    )
    review_items = _review_pool(results)
    return [
        ws.write_json("compare/proposals.json", {"proposals": proposals_out}),
        ws.write_jsonl("compare/results.jsonl", [r.to_dict() for r in results]),
        ws.write_json("compare/summary.json", summary),
        ws.write_json("compare/variation_map.json", variation_map),
        ws.write_json("compare/review_pool.json", {"items": review_items}),
    ]


def _review_pool(results: list[compare_mod.ComparisonResult]) -> list[dict]:
    items = []
    for r in results:
        for variation, verdict in sorted(r.verdicts.items()):
            if verdict.error:
                continue
            items.append(
                {
                    "id": f"cmp-{hashlib.sha256((r.clip_a.clip_id + r.clip_b.clip_id + variation).encode()).hexdigest()[:12]}",
                    "category": "detected" if verdict.detected else "no_difference",
                    "action_class": r.action_class,
                    "variation": variation,
                    "clip_a": {"video": r.clip_a.video_id, "timestamp": f"{r.clip_a.start_s}-{r.clip_a.end_s}", "url": r.clip_a.url, "biryani": r.clip_a.biryani_type, "title": r.clip_a.title, "frames": []},
                    "clip_b": {"video": r.clip_b.video_id, "timestamp": f"{r.clip_b.start_s}-{r.clip_b.end_s}", "url": r.clip_b.url, "biryani": r.clip_b.biryani_type, "title": r.clip_b.title, "frames": []},
                    "model": {
                        "answer": verdict.answer,
                        "confidence": verdict.confidence,
                        "explanation": verdict.explanation,
                    },
                }
            )
    return items


def stage_qa_gen(ws: Workspace, flags: StageFlags) -> list[Path]:
    if flags.seed is None:
        raise ValidationError("qa-gen is a sampling stage: --seed is required")
    corpus = load_corpus(ws)
    _embedding, chat, _vision = build_providers(ws)
    qa_config = ws.config["qa"]
    all_pairs: list[qa_mod.QAPair] = []
    flagged: list[str] = []

    descriptions: dict[str, list[tuple[int, tuple[int, int], str]]] = {}
    summaries: dict[str, str] = {}
    mm_summaries: dict[str, str] = {}
    for video in corpus.videos:
        segments = corpus.segments.get(video.video_id, [])
        described = [
            (i, (s.start_s, s.end_s), render_description(s.ingredients, s.utensils, s.actions))
            for i, s in enumerate(segments)
        ]
        descriptions[video.video_id] = described
        chunk_text = "\n".join(
            f"CHUNK: {i + 1}\n{desc}" for i, (_c, _t, desc) in enumerate(described)
        )
        summaries[video.video_id] = chat.chat_complete(
            VIDEO_SUMMARY_PROMPT.format(segment_descriptions=chunk_text)
        )
        transcript = corpus.transcripts.get(video.video_id)
        transcript_text = (
            " ".join(s.text for s in transcript.sentences) if transcript else ""
        )
        mm_summaries[video.video_id] = chat.chat_complete(
            MULTIMODAL_SUMMARY_PROMPT.format(
                video_description=summaries[video.video_id], transcript=transcript_text
            )
        )

    tiers = ("easy", "medium", "hard") if flags.tier == "all" else (flags.tier,)
    if flags.tier not in ("all", "easy", "medium", "hard"):
        raise ValidationError(f"unknown tier {flags.tier!r}")
    outputs: list[Path] = []

    if "easy" in tiers:
        # Generate, then keep only human-curated ids when the file exists.
        easy_pairs: list[qa_mod.QAPair] = []
        for video in corpus.videos:
            described = descriptions[video.video_id]
            if not described:
                continue
            easy_pairs.extend(
                qa_mod.generate_easy(
                    video.video_id,
                    described,
                    chat,
                    seed=flags.seed + zlib.crc32(video.video_id.encode("utf-8")),
                    max_segments=qa_config["easy_segments_per_video"],
                )
            )
        curation_path = ws.root / "curation" / "easy_keep.json"
        outputs.append(ws.write_jsonl("qa/easy_uncurated.jsonl", [p.to_dict() for p in easy_pairs]))
        if curation_path.exists():
            kept_ids = json.loads(curation_path.read_text(encoding="utf-8"))["keep"]
            all_pairs.extend(qa_mod.apply_curation(easy_pairs, kept_ids))

    if "medium" in tiers:
        for video in corpus.videos:
            transcript = corpus.transcripts.get(video.video_id)
            transcript_text = " ".join(s.text for s in transcript.sentences) if transcript else ""
            try:
                all_pairs.extend(
                    qa_mod.generate_medium(
                        video.video_id, summaries[video.video_id], transcript_text, chat
                    )
                )
            except ValidationError:
                flagged.append(video.video_id)

    if "hard" in tiers:
        pool = sorted(mm_summaries)
        for arity_str, count in sorted(qa_config["hard_combos"].items()):
            arity = int(arity_str)
            combos = qa_mod.sample_combos(pool, arity, count, seed=flags.seed + arity)
            for combo in combos:
                try:
                    all_pairs.extend(qa_mod.generate_hard(mm_summaries, combo, chat))
                except ValidationError:
                    flagged.append("+".join(combo))

    manifest = qa_mod.split_dataset(all_pairs, seed=flags.seed)
    stats = qa_mod.dataset_statistics(manifest)
    manifest_path = ws.derived_path("qa", "manifest.jsonl")
    qa_mod.write_manifest(
        manifest.pairs, manifest_path, meta={"config_hash": ws.config_hash, "flagged": flagged}
    )
    outputs.append(manifest_path)
    outputs.append(ws.write_json("qa/dataset_stats.json", stats))
    return outputs


def _mock_answers(manifest: qa_mod.DatasetManifest) -> dict[str, str]:
    """Deterministic stand-in model answers for mock-mode evaluation."""
    answers = {}
    for pair in manifest.by_split("test"):
        h = int.from_bytes(hashlib.sha256(pair.qa_id.encode()).digest()[:4], "big")
        if h % 3 == 0:
            answers[pair.qa_id] = pair.answer
        elif h % 3 == 1:
            words = pair.answer.split()
            answers[pair.qa_id] = " ".join(words[: max(1, len(words) // 2)])
        else:
            answers[pair.qa_id] = "the cook prepares the biryani with fragrant spices"
    return answers


def stage_qa_eval(ws: Workspace, flags: StageFlags) -> list[Path]:
    embedding, _chat, _vision = build_providers(ws)
    if flags.manifest:
        manifest = qa_mod.read_manifest(flags.manifest)
    else:
        manifest = qa_mod.read_manifest(ws.derived / "qa" / "manifest.jsonl")
        # The JSONL meta line carries the producing config hash; enforce it.
        ws.read_jsonl("qa/manifest.jsonl", force=flags.force)
    if flags.answers:
        answers = qa_mod.read_answers(flags.answers)
    else:
        if ws.config.get("providers", {}).get("mode") != "mock":
            raise ValidationError("qa-eval needs --answers unless running in mock provider mode")
        answers = _mock_answers(manifest)
        ws.write_jsonl(
            "qa/mock_answers.jsonl",
            [{"id": k, "answer": v} for k, v in sorted(answers.items())],
        )
    report = qa_mod.evaluate_run(answers, manifest, embedding)
    return [ws.write_json("qa/report.json", report)]


def stage_retrieve(ws: Workspace, flags: StageFlags) -> list[Path]:
    if not flags.query:
        raise ValidationError("retrieve requires --query")
    embedding, _chat, _vision = build_providers(ws)
    action_map = ws.read_json("clusters/action_map.json", force=flags.force)["actions"]
    index = {label: entry["clips"] for label, entry in action_map.items()}
    k = flags.k if flags.k is not None else 5
    ranked = retrieve_clips(flags.query, index, embedding, k)
    slug = hashlib.sha256(flags.query.encode("utf-8")).hexdigest()[:12]
    payload = {
        "query": flags.query,
        "k": k,
        "results": [{"clip": clip, "score": score} for clip, score in ranked],
    }
    path = ws.write_json(f"retrieve/{slug}.json", payload)
    print(json.dumps(payload["results"], indent=2, sort_keys=True))
    return [path]


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "stats": stage_stats,
    "canonicalize": stage_canonicalize,
    "merge": stage_merge,
    "verify-auto": stage_verify_auto,
    "align": stage_align,
    "compare": stage_compare,
    "qa-gen": stage_qa_gen,
    "qa-eval": stage_qa_eval,
    "retrieve": stage_retrieve,
}


def run_stage(stage: str, ws: Workspace, flags: StageFlags) -> list[Path]:
    if stage not in STAGE_DEPS:
        raise ValidationError(f"unknown stage {stage!r}")
    check_dependencies(stage, ws)
    return STAGE_FUNCS[stage](ws, flags)
