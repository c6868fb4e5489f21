"""Pairwise video comparison: propose variations, localize frames, difference.

One proposal is generated per action class and cached; clip pairs within a
class are enumerated (optionally capped by seeded sampling); the differencer
answers one multiple-choice query per proposed variation per pair.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import CanonicalRecipe
from .errors import ParseError, ValidationError
from .prompts import ACTION_DIFF_PROMPT, VARIATION_PROPOSER_PROMPT, parse_strict_json
from .providers import ChatProvider, EmbeddingProvider, VisionProvider

log = logging.getLogger(__name__)

ANSWERS = ("a", "b", "c", "d")


@dataclass
class Proposal:
    action_class: str
    variations: list[str]
    sub_actions: list[str]
    mapping: dict[str, list[str]]

    def validate(self) -> None:
        if not 2 <= len(self.variations) <= 3:
            raise ValidationError(f"{self.action_class}: need 2-3 variations, got {len(self.variations)}")
        if not 2 <= len(self.sub_actions) <= 4:
            raise ValidationError(f"{self.action_class}: need 2-4 sub-actions, got {len(self.sub_actions)}")
        for variation in self.variations:
            mapped = self.mapping.get(variation, [])
            if not mapped:
                raise ValidationError(f"{self.action_class}: variation {variation!r} maps to no sub-action")
            for sub in mapped:
                if sub not in self.sub_actions:
                    raise ValidationError(f"{self.action_class}: unknown sub-action {sub!r} in mapping")


@dataclass(frozen=True)
class ClipRef:
    """A timestamped clip of one action class within one video."""

    video_id: str
    start_s: int
    end_s: int
    url: str = ""
    title: str = ""
    biryani_type: str = ""

    @property
    def clip_id(self) -> str:
        return f"{self.video_id}:{self.start_s}-{self.end_s}"


@dataclass
class FrameHit:
    clip: ClipRef
    sub_action: str
    frame_indices: list[int]
    scores: list[float]


@dataclass
class DiffVerdict:
    answer: str
    confidence: int
    difference_visible: bool
    explanation: str = ""
    error: bool = False

    @property
    def detected(self) -> bool:
        return (not self.error) and self.answer in ("a", "b") and self.difference_visible


@dataclass
class ComparisonResult:
    clip_a: ClipRef
    clip_b: ClipRef
    action_class: str
    verdicts: dict[str, DiffVerdict] = field(default_factory=dict)  # variation -> verdict

    @property
    def comparison_detected(self) -> bool:
        return any(v.detected for v in self.verdicts.values())

    @property
    def all_errors(self) -> bool:
        return bool(self.verdicts) and all(v.error for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "pair": [self.clip_a.clip_id, self.clip_b.clip_id],
            "action_class": self.action_class,
            "detected": self.comparison_detected,
            "verdicts": {
                variation: {
                    "answer": v.answer,
                    "confidence": v.confidence,
                    "difference_visible": v.difference_visible,
                    "explanation": v.explanation,
                    "error": v.error,
                }
                for variation, v in sorted(self.verdicts.items())
            },
        }


class Proposer:
    """Generates and caches one variation proposal per action class."""

    def __init__(self, chat_provider: ChatProvider):
        self._chat = chat_provider
        self._cache: dict[str, Proposal] = {}
        self.errors: dict[str, str] = {}

    def propose(self, action_class: str) -> Proposal | None:
        """Cached proposal, or None once a class is marked errored."""
        if not action_class:
            raise ValidationError("action_class must be nonempty")
        if action_class in self._cache:
            return self._cache[action_class]
        if action_class in self.errors:
            return None
        try:
            proposal = propose_differences(action_class, self._chat)
        except ValidationError as exc:
            self.errors[action_class] = str(exc)
            return None
        self._cache[action_class] = proposal
        return proposal


def propose_differences(action_class: str, chat_provider: ChatProvider) -> Proposal:
    """One proposer call with strict-JSON parsing and a single retry."""
    if not action_class:
        raise ValidationError("action_class must be nonempty")
    prompt = VARIATION_PROPOSER_PROMPT.format(action_class=action_class)
    last_error: Exception | None = None
    for _ in range(2):
        response = chat_provider.chat_complete(prompt)
        try:
            parsed = parse_strict_json(response)
            proposal = Proposal(
                action_class=action_class,
                variations=[str(v) for v in parsed["variations"]],
                sub_actions=[str(s) for s in parsed["sub_actions"]],
                mapping={str(k): [str(x) for x in v] for k, v in parsed["mapping"].items()},
            )
            proposal.validate()
            return proposal
        except (ParseError, ValidationError, KeyError, TypeError) as exc:
            last_error = exc
    raise ValidationError(f"proposal for {action_class!r} failed after retry: {last_error}")


def enumerate_pairs(
    clips: Sequence[ClipRef], max_pairs: int | None = None, seed: int | None = None
) -> list[tuple[ClipRef, ClipRef]]:
    """All unordered clip pairs, optionally capped by seeded sampling.

    Order is deterministic: clips sort by (video, start) and pairs are
    emitted in lexicographic index order before any sampling.
    """
    ordered = sorted(clips, key=lambda c: (c.video_id, c.start_s))
    pairs = [
        (ordered[i], ordered[j])
        for i in range(len(ordered))
        for j in range(i + 1, len(ordered))
    ]
    if max_pairs is not None and len(pairs) > max_pairs:
        if seed is None:
            raise ValidationError("sampling a pair cap requires an explicit seed")
        rng = random.Random(seed)
        idx = sorted(rng.sample(range(len(pairs)), max_pairs))
        pairs = [pairs[i] for i in idx]
    return pairs


def localize_frames(
    sub_action: str,
    frame_embeddings: Sequence[np.ndarray],
    text_provider: EmbeddingProvider,
    clip: ClipRef,
    k: int = 2,
) -> FrameHit:
    """Top-k frames whose embeddings best match the sub-action text.

    Ties prefer the earlier frame; clips with fewer than k frames return
    every frame.
    """
    if len(frame_embeddings) == 0:
        raise ValidationError(f"clip {clip.clip_id} has no frames to localize")
    query = text_provider.embed_texts([sub_action])[0]
    scores = [float(np.dot(query, f)) for f in frame_embeddings]
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
    return FrameHit(
        clip=clip,
        sub_action=sub_action,
        frame_indices=ranked,
        scores=[scores[i] for i in ranked],
    )


def importance_context(proposal: Proposal, variation: str) -> str:
    """Prose rendering of when a variation is visually detectable."""
    subs = proposal.mapping.get(variation, [])
    return (
        f"This difference is most visually detectable during: {', '.join(subs)}."
        if subs
        else ""
    )


def run_differencer(
    frames_a: Sequence[str],
    frames_b: Sequence[str],
    action_class: str,
    variation: str,
    context: str,
    vision_provider: VisionProvider,
) -> DiffVerdict:
    """One multiple-choice differencer call for one variation on one pair.

    Parse failures retry once and then produce an error verdict, which
    aggregation excludes from its rate denominators.
    """
    total = len(frames_a) + len(frames_b)
    prompt = ACTION_DIFF_PROMPT.format(
        total_frames=total,
        action=action_class,
        clip1_range=f"1-{len(frames_a)}",
        clip2_start=len(frames_a) + 1,
        clip2_end=total,
        query_string=variation,
        importance_context=context,
    )
    for _ in range(2):
        response = vision_provider.vision_analyze(list(frames_a) + list(frames_b), prompt)
        try:
            parsed = parse_strict_json(response)
            answer = str(parsed["answer"]).strip().lower()
            if answer not in ANSWERS:
                raise ParseError(f"answer {answer!r} outside a-d")
            confidence = int(parsed["confidence"])
            if not 1 <= confidence <= 5:
                clamped = min(5, max(1, confidence))
                log.warning("confidence %d outside 1-5, clamped to %d", confidence, clamped)
                confidence = clamped
            return DiffVerdict(
                answer=answer,
                confidence=confidence,
                difference_visible=bool(parsed["difference_visible"]),
                explanation=str(parsed.get("explanation", "")),
            )
        except (ParseError, KeyError, TypeError, ValueError):
            continue
    return DiffVerdict(answer="", confidence=1, difference_visible=False, error=True)


def aggregate_results(results: Sequence[ComparisonResult]) -> dict:
    """Comparison-level and per-variation detection rates.

    A comparison counts as detected when any of its variations is; the
    absolute rate counts each proposed variation separately. Error
    verdicts (and comparisons whose verdicts all errored) stay out of both
    denominators and are tallied on the side.
    """
    usable = [r for r in results if r.verdicts and not r.all_errors]
    error_comparisons = len(results) - len(usable)
    detected = sum(1 for r in usable if r.comparison_detected)
    variations_total = 0
    variations_detected = 0
    variation_errors = 0
    for r in usable:
        for v in r.verdicts.values():
            if v.error:
                variation_errors += 1
                continue
            variations_total += 1
            variations_detected += 1 if v.detected else 0
    comparisons = len(usable)
    detected_rate = detected / comparisons if comparisons else 0.0
    absolute_rate = variations_detected / variations_total if variations_total else 0.0
    return {
        "comparisons": comparisons,
        "detected": detected,
        "detected_pct": round(100 * detected_rate, 1),
        "no_difference_pct": round(100 * (1 - detected_rate), 1) if comparisons else 0.0,
        "variations_total": variations_total,
        "variations_detected": variations_detected,
        "absolute_pct": round(100 * absolute_rate, 1),
        "error_comparisons": error_comparisons,
        "error_verdicts": variation_errors,
    }


def stage_variation_map(
    results: Sequence[ComparisonResult],
    recipe: CanonicalRecipe,
    action_to_step: dict[str, str],
) -> dict:
    """Per-chapter variation intensities for the timeline visualization.

    An action's intensity is the fraction of its comparisons that detected
    a difference; actions without comparisons are omitted rather than
    reported as zero.
    """
    per_action: dict[str, list[ComparisonResult]] = {}
    for r in results:
        per_action.setdefault(r.action_class, []).append(r)
    step_order = {s.step_id: i for i, s in enumerate(recipe.steps)}
    chapters: dict[str, list[dict]] = {name: [] for name, _ in recipe.chapters}
    for action, rs in sorted(per_action.items()):
        usable = [r for r in rs if r.verdicts and not r.all_errors]
        if not usable:
            continue
        step_id = action_to_step.get(action)
        if step_id is None:
            continue
        chapter = recipe.chapter_of(step_id)
        intensity = sum(1 for r in usable if r.comparison_detected) / len(usable)
        chapters[chapter].append(
            {
                "action": action,
                "step": step_id,
                "intensity": intensity,
                "comparisons": len(usable),
            }
        )
    ordered = []
    for name, _ids in recipe.chapters:
        actions = sorted(chapters[name], key=lambda a: (step_order[a["step"]], a["action"]))
        ordered.append({"chapter": name, "actions": actions})
    return {"biryani_type": recipe.biryani_type, "chapters": ordered}
